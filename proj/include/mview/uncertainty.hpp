#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mview/common.hpp"

namespace mview {

/// Learned homoscedastic uncertainty of one task, parameterised as
/// log_var = log(sigma^2). The effective variance is floored at floor_var,
/// which caps the task weight 1/sigma^2 at 1/floor_var.
template <typename Scalar>
struct TaskUncertainty {
  std::string task;
  Scalar log_var = 0;
  Scalar floor_var = Scalar(0.05);

  bool clamped() const { return log_var < std::log(floor_var); }
  Scalar sigma2() const { return clamped() ? floor_var : std::exp(log_var); }
  Scalar weight() const { return Scalar(1) / sigma2(); }

  /// Pulls log_var back onto the floor after an update.
  void project() { log_var = std::max(log_var, std::log(floor_var)); }
};

template <typename Scalar>
struct WeightedTotal {
  Scalar total = 0;
  std::vector<Scalar> weights;       // effective 1/sigma^2 per task
  std::vector<Scalar> log_var_grad;  // d total / d log_var per task
};

/// total = sum_t [ L_t / s2_t + log s2_t ] with s2_t = max(exp(log_var_t), floor).
/// The derivative w.r.t. log_var_t is 1 - L_t / s2_t, and 0 while clamped.
template <typename Scalar>
WeightedTotal<Scalar> weighted_total(std::span<const Scalar> losses,
                                     std::span<const TaskUncertainty<Scalar>> tasks) {
  if (losses.size() != tasks.size())
    throw ConfigError("every task needs an uncertainty entry");
  WeightedTotal<Scalar> out;
  out.weights.reserve(losses.size());
  out.log_var_grad.reserve(losses.size());
  for (std::size_t t = 0; t < losses.size(); ++t) {
    const Scalar s2 = tasks[t].sigma2();
    const Scalar w = Scalar(1) / s2;
    out.total += w * losses[t] + std::log(s2);
    out.weights.push_back(w);
    out.log_var_grad.push_back(tasks[t].clamped() ? Scalar(0) : Scalar(1) - w * losses[t]);
  }
  return out;
}

/// Fixed linear combination sum_t w_t L_t; log_var gradients are zero.
template <typename Scalar>
WeightedTotal<Scalar> static_total(std::span<const Scalar> losses,
                                   std::span<const Scalar> weights) {
  if (losses.size() != weights.size()) throw ConfigError("every task needs a static weight");
  WeightedTotal<Scalar> out;
  for (std::size_t t = 0; t < losses.size(); ++t) {
    out.total += weights[t] * losses[t];
    out.weights.push_back(weights[t]);
    out.log_var_grad.push_back(Scalar(0));
  }
  return out;
}

}  // namespace mview
