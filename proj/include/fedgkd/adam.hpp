#pragma once

#include "fedgkd/graph.hpp"
#include "fedgkd/model.hpp"

namespace fedgkd {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled (AdamW-style): theta -= lr * weight_decay * theta.
  double weight_decay = 1e-6;
};

/// Adam over a flat parameter vector. Moments are sized on first use.
class AdamState {
 public:
  explicit AdamState(AdamConfig config = {}) : config_(config) {}

  void step(Vector& params, const Vector& grads);
  void step(ModelParams& params, const ModelParams& grads);

  const AdamConfig& config() const { return config_; }
  long steps() const { return t_; }
  const Vector& first_moment() const { return m_; }
  const Vector& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  Vector m_, v_;
  long t_ = 0;
};

}  // namespace fedgkd
