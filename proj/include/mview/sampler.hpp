#pragma once

#include <iosfwd>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "mview/common.hpp"
#include "mview/graph.hpp"

namespace mview {

struct SamplerConfig {
  std::size_t window = 9;
  std::size_t negatives_k = 10;
  double noise_power = 0.75;
  std::size_t batch_size = 2048;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  bool inter_uniform = false;  // uniform over links instead of occurrence-weighted

  void validate() const;
};

/// Unigram^power noise, stored as a cumulative table.
class NoiseDistribution {
 public:
  NoiseDistribution() = default;
  NoiseDistribution(std::span<const std::int64_t> freq, double power);

  Index size() const { return static_cast<Index>(cdf_.size()); }
  double probability(Index i) const;
  Index sample(std::mt19937_64& rng) const;

 private:
  std::vector<double> cdf_;
};

NoiseDistribution build_noise(std::span<const std::int64_t> freq, double power);

/// k draws from `dist`, each redrawn while equal to `exclude`.
std::vector<Index> sample_negatives(const NoiseDistribution& dist, std::size_t k, Index exclude,
                                    std::mt19937_64& rng);

/// (center, context) pairs for every in-bounds offset in [-window, window] \ {0}.
std::vector<std::pair<Index, Index>> gen_skipgram_pairs(std::span<const Index> sequence,
                                                        std::size_t window);

struct IntraExample {
  View view = View::item;
  Index center = 0;
  Index context = 0;
  std::vector<Index> negatives;
};

struct InterExample {
  View from_view = View::item;
  View to_view = View::category;
  Index from = 0;
  Index to_pos = 0;
  std::vector<Index> to_negs;
};

/// Encodes sessions with the graph's vocabulary.
std::vector<std::vector<Index>> encode_sessions(std::span<const Session> sessions,
                                                const Vocab& vocab);

/// Skip-gram example stream over one view. Pairs of an epoch are shuffled;
/// `next_batch` returns fewer than `batch_size` examples (possibly zero) at
/// the end of an epoch and starts a fresh shuffled epoch on the next call.
class IntraStream {
 public:
  IntraStream(View view, std::vector<std::vector<Index>> sequences, NoiseDistribution noise,
              const SamplerConfig& config, std::uint64_t seed);

  std::vector<IntraExample> next_batch();
  std::size_t pairs_per_epoch() const { return pairs_.size(); }
  std::size_t epoch() const { return epoch_; }
  std::size_t batches_per_epoch() const;

 private:
  void reshuffle();

  View view_;
  std::vector<std::pair<Index, Index>> pairs_;
  NoiseDistribution noise_;
  SamplerConfig config_;
  std::mt19937_64 rng_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
};

/// Inter-view (item, attribute) stream with negatives from the attribute view.
class InterStream {
 public:
  InterStream(const CrossViewLinks& links, NoiseDistribution noise_to,
              const SamplerConfig& config, std::uint64_t seed);

  InterExample next();
  std::vector<InterExample> next_batch();

 private:
  View from_view_;
  View to_view_;
  std::vector<std::pair<Index, Index>> positives_;
  std::vector<double> cdf_;
  NoiseDistribution noise_;
  SamplerConfig config_;
  std::mt19937_64 rng_;
};

/// `view<TAB>center<TAB>context<TAB>neg1,...`
void dump_examples(std::ostream& out, std::span<const IntraExample> batch);

}  // namespace mview
