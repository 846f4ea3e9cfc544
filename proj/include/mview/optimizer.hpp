#pragma once

#include <cmath>
#include <vector>

#include "mview/common.hpp"
#include "mview/embedding.hpp"

namespace mview {

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind algorithm = OptimizerKind::adam;
  double learning_rate = 0.01;
  double clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (!(clip_norm > 0)) throw ConfigError("clip_norm must be > 0");
  }
};

/// Scale factor applied to every gradient so the global norm stays <= clip.
template <typename Scalar>
Scalar clip_scale(Scalar squared_norm, Scalar clip) {
  const Scalar norm = std::sqrt(squared_norm);
  return norm > clip ? clip / norm : Scalar(1);
}

/// SGD or lazy Adam over parameter blocks addressed by slot number. Adam
/// moments of a sparse block are only read and written for the touched rows;
/// bias correction uses the global step count.
template <typename Scalar>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config) : config_(config) { config_.validate(); }

  const OptimizerConfig& config() const { return config_; }
  long step() const { return step_; }

  void begin_step() {
    ++step_;
    if (config_.algorithm == OptimizerKind::adam) {
      bc1_ = Scalar(1) - std::pow(Scalar(config_.beta1), Scalar(step_));
      bc2_ = Scalar(1) - std::pow(Scalar(config_.beta2), Scalar(step_));
    }
  }

  void update_rows(std::size_t slot, Matrix<Scalar>& param, const SparseRows<Scalar>& grad,
                   Scalar scale) {
    auto& st = state(slot, param);
    for (std::size_t k = 0; k < grad.size(); ++k) {
      const Index r = grad.rows()[k];
      apply(param.row(r), grad.value(k).transpose() * scale, st, r);
    }
  }

  void update_dense(std::size_t slot, Matrix<Scalar>& param, const Matrix<Scalar>& grad,
                    Scalar scale) {
    auto& st = state(slot, param);
    for (Index r = 0; r < param.rows(); ++r) apply(param.row(r), grad.row(r) * scale, st, r);
  }

  void update_scalar(std::size_t slot, Scalar& param, Scalar grad, Scalar scale) {
    Matrix<Scalar> p(1, 1), g(1, 1);
    p(0, 0) = param;
    g(0, 0) = grad;
    update_dense(slot, p, g, scale);
    param = p(0, 0);
  }

 private:
  struct State {
    Matrix<Scalar> m;
    Matrix<Scalar> v;
  };

  State& state(std::size_t slot, const Matrix<Scalar>& param) {
    if (slot >= states_.size()) states_.resize(slot + 1);
    auto& st = states_[slot];
    if (config_.algorithm == OptimizerKind::adam && st.m.size() != param.size()) {
      st.m = Matrix<Scalar>::Zero(param.rows(), param.cols());
      st.v = Matrix<Scalar>::Zero(param.rows(), param.cols());
    }
    return st;
  }

  template <typename RowP, typename RowG>
  void apply(RowP&& p, const RowG& g, State& st, Index r) {
    const Scalar lr(config_.learning_rate);
    if (config_.algorithm == OptimizerKind::sgd) {
      p -= lr * g;
      return;
    }
    const Scalar b1(config_.beta1), b2(config_.beta2), eps(config_.epsilon);
    auto m = st.m.row(r);
    auto v = st.v.row(r);
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / bc1_) / ((v.array() / bc2_).sqrt() + eps);
  }

  OptimizerConfig config_;
  long step_ = 0;
  Scalar bc1_ = 1, bc2_ = 1;
  std::vector<State> states_;
};

}  // namespace mview
