#include "fedgkd/adam.hpp"

#include <cmath>

#include "fedgkd/error.hpp"

namespace fedgkd {

void AdamState::step(Vector& params, const Vector& grads) {
  if (params.size() != grads.size()) throw InputError("adam: parameter/gradient size mismatch");
  if (t_ == 0) {
    m_ = Vector::Zero(params.size());
    v_ = Vector::Zero(params.size());
  } else if (m_.size() != params.size()) {
    throw InputError("adam: parameter size changed between steps");
  }
  ++t_;
  const auto& c = config_;
  m_ = c.beta1 * m_ + (1.0 - c.beta1) * grads;
  v_ = c.beta2 * v_ + (1.0 - c.beta2) * grads.cwiseProduct(grads);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t_));
  if (c.weight_decay != 0.0) params *= 1.0 - c.lr * c.weight_decay;
  params.array() -= c.lr * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + c.eps);
}

void AdamState::step(ModelParams& params, const ModelParams& grads) {
  if (!params.same_shape(grads)) throw InputError("adam: gradient shape mismatch");
  Vector flat = params.flatten();
  step(flat, grads.flatten());
  params.unflatten(flat);
}

}  // namespace fedgkd
