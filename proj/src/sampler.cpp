#include "mview/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace mview {

void SamplerConfig::validate() const {
  if (window < 1) throw ConfigError("window must be >= 1");
  if (negatives_k < 1) throw ConfigError("negatives_k must be >= 1");
  if (!(noise_power >= 0.0 && noise_power <= 1.0))
    throw ConfigError("noise_power must lie in [0, 1]");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

NoiseDistribution::NoiseDistribution(std::span<const std::int64_t> freq, double power) {
  if (freq.empty()) throw ConfigError("noise distribution over an empty vocabulary");
  cdf_.reserve(freq.size());
  double acc = 0;
  for (auto f : freq) {
    if (f < 1) throw ConfigError("noise distribution needs counts >= 1");
    acc += std::pow(static_cast<double>(f), power);
    cdf_.push_back(acc);
  }
  for (auto& c : cdf_) c /= acc;
  cdf_.back() = 1.0;
}

double NoiseDistribution::probability(Index i) const {
  const auto k = static_cast<std::size_t>(i);
  return k == 0 ? cdf_[0] : cdf_[k] - cdf_[k - 1];
}

Index NoiseDistribution::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double u = uni(rng);
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<Index>(it - cdf_.begin());
}

NoiseDistribution build_noise(std::span<const std::int64_t> freq, double power) {
  return NoiseDistribution(freq, power);
}

std::vector<Index> sample_negatives(const NoiseDistribution& dist, std::size_t k, Index exclude,
                                    std::mt19937_64& rng) {
  if (dist.size() < 2) throw ConfigError("negative sampling needs a vocabulary of size >= 2");
  std::vector<Index> out;
  out.reserve(k);
  while (out.size() < k) {
    const Index s = dist.sample(rng);
    if (s != exclude) out.push_back(s);
  }
  return out;
}

std::vector<std::pair<Index, Index>> gen_skipgram_pairs(std::span<const Index> sequence,
                                                        std::size_t window) {
  std::vector<std::pair<Index, Index>> out;
  const auto n = sequence.size();
  for (std::size_t t = 0; t < n; ++t) {
    const auto lo = t >= window ? t - window : 0;
    const auto hi = std::min(n - 1, t + window);
    for (std::size_t j = lo; j <= hi; ++j)
      if (j != t) out.emplace_back(sequence[t], sequence[j]);
  }
  return out;
}

std::vector<std::vector<Index>> encode_sessions(std::span<const Session> sessions,
                                                const Vocab& vocab) {
  std::vector<std::vector<Index>> out;
  out.reserve(sessions.size());
  for (const auto& s : sessions) {
    std::vector<Index> seq;
    seq.reserve(s.nodes.size());
    for (const auto& node : s.nodes) seq.push_back(vocab.at(node));
    out.push_back(std::move(seq));
  }
  return out;
}

IntraStream::IntraStream(View view, std::vector<std::vector<Index>> sequences,
                         NoiseDistribution noise, const SamplerConfig& config, std::uint64_t seed)
    : view_(view), noise_(std::move(noise)), config_(config), rng_(seed) {
  config_.validate();
  for (const auto& seq : sequences) {
    auto p = gen_skipgram_pairs(seq, config_.window);
    // Equal neighbours cannot occur after duplicate collapse, but walks may revisit.
    for (auto& pr : p)
      if (pr.first != pr.second) pairs_.push_back(pr);
  }
  if (pairs_.empty()) throw ConfigError("view " + std::string(to_string(view)) +
                                        " has no skip-gram pairs");
  reshuffle();
}

void IntraStream::reshuffle() {
  std::shuffle(pairs_.begin(), pairs_.end(), rng_);
  cursor_ = 0;
}

std::size_t IntraStream::batches_per_epoch() const {
  return (pairs_.size() + config_.batch_size - 1) / config_.batch_size;
}

std::vector<IntraExample> IntraStream::next_batch() {
  if (cursor_ >= pairs_.size()) {
    ++epoch_;
    reshuffle();
  }
  const auto end = std::min(pairs_.size(), cursor_ + config_.batch_size);
  std::vector<IntraExample> batch;
  batch.reserve(end - cursor_);
  for (; cursor_ < end; ++cursor_) {
    const auto [c, ctx] = pairs_[cursor_];
    batch.push_back({view_, c, ctx, sample_negatives(noise_, config_.negatives_k, ctx, rng_)});
  }
  return batch;
}

InterStream::InterStream(const CrossViewLinks& links, NoiseDistribution noise_to,
                         const SamplerConfig& config, std::uint64_t seed)
    : from_view_(links.from_view),
      to_view_(links.to_view),
      noise_(std::move(noise_to)),
      config_(config),
      rng_(seed) {
  config_.validate();
  if (links.empty()) throw ConfigError("inter-view task without links");
  if (noise_.size() < 2) throw ConfigError("attribute vocabulary of size < 2");
  double acc = 0;
  for (const auto& [pair, count] : links.observed_pairs) {
    positives_.push_back(pair);
    acc += config_.inter_uniform ? 1.0 : static_cast<double>(count);
    cdf_.push_back(acc);
  }
  for (auto& c : cdf_) c /= acc;
  cdf_.back() = 1.0;
}

InterExample InterStream::next() {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), uni(rng_));
  if (it == cdf_.end()) --it;
  const auto [from, to] = positives_[static_cast<std::size_t>(it - cdf_.begin())];
  return {from_view_, to_view_, from, to,
          sample_negatives(noise_, config_.negatives_k, to, rng_)};
}

std::vector<InterExample> InterStream::next_batch() {
  std::vector<InterExample> batch;
  batch.reserve(config_.batch_size);
  for (std::size_t i = 0; i < config_.batch_size; ++i) batch.push_back(next());
  return batch;
}

void dump_examples(std::ostream& out, std::span<const IntraExample> batch) {
  for (const auto& e : batch) {
    out << to_string(e.view) << '\t' << e.center << '\t' << e.context << '\t';
    for (std::size_t i = 0; i < e.negatives.size(); ++i) {
      if (i) out << ',';
      out << e.negatives[i];
    }
    out << '\n';
  }
}

}  // namespace mview
