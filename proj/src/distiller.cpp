#include "fedgkd/distiller.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "fedgkd/adam.hpp"
#include "fedgkd/error.hpp"

namespace fedgkd {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v;
  std::memcpy(&v, in.data() + at, 4);
  return v;
}

}  // namespace

std::size_t DistillInit::wire_bytes() const {
  return 8 * static_cast<std::size_t>(X0.size()) + 4 * y0.size();
}

DistillInit server_init_distill(int m, int num_classes, int feature_dim, std::uint64_t seed) {
  if (m < 1) throw InputError("distillation needs at least one node per class");
  if (num_classes < 1 || feature_dim < 1) throw InputError("distillation sizes must be positive");
  DistillInit init;
  init.seed = seed;
  const int n = m * num_classes;
  init.X0.resize(n, feature_dim);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < feature_dim; ++j) init.X0(i, j) = normal(rng);
  init.y0.resize(n);
  for (int i = 0; i < n; ++i) init.y0[i] = i / m;
  return init;
}

FeatureMap parse_feature_map(const std::string& s) {
  if (s == "xh" || s == "XH" || s == "x+h") return FeatureMap::kXH;
  if (s == "x" || s == "X") return FeatureMap::kX;
  if (s == "h" || s == "H") return FeatureMap::kH;
  if (s == "y" || s == "y-soft" || s == "ysoft") return FeatureMap::kYSoft;
  throw InputError("unknown feature map '" + s + "' (expected xh, x, h, y-soft)");
}

std::string to_string(FeatureMap f) {
  switch (f) {
    case FeatureMap::kXH:
      return "xh";
    case FeatureMap::kX:
      return "x";
    case FeatureMap::kH:
      return "h";
    case FeatureMap::kYSoft:
      return "y-soft";
  }
  return "xh";
}

static_assert(std::endian::native == std::endian::little, "wire format assumes a little-endian host");

std::string TaskFeature::serialize() const {
  std::string out;
  out.reserve(wire_bytes());
  put_u32(out, static_cast<std::uint32_t>(client_id));
  put_u32(out, static_cast<std::uint32_t>(round));
  put_u32(out, static_cast<std::uint32_t>(M.rows()));
  put_u32(out, static_cast<std::uint32_t>(M.cols()));
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      const double v = M(i, j);
      char b[8];
      std::memcpy(b, &v, 8);
      out.append(b, 8);
    }
  }
  return out;
}

TaskFeature TaskFeature::deserialize(const std::string& bytes) {
  if (bytes.size() < 16) throw InputError("task feature: truncated header");
  TaskFeature f;
  f.client_id = static_cast<int>(get_u32(bytes, 0));
  f.round = static_cast<int>(get_u32(bytes, 4));
  const auto rows = get_u32(bytes, 8), cols = get_u32(bytes, 12);
  if (bytes.size() != 16 + 8ULL * rows * cols) throw InputError("task feature: payload size mismatch");
  f.M.resize(rows, cols);
  std::size_t at = 16;
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j, at += 8) {
      double v;
      std::memcpy(&v, bytes.data() + at, 8);
      f.M(i, j) = v;
    }
  }
  return f;
}

double AdjacencySample::soft_density() const {
  const auto n = soft.rows();
  if (n < 2) return 0.0;
  return soft.sum() / static_cast<double>(n * (n - 1));
}

double AdjacencySample::hard_density() const {
  const auto n = hard.rows();
  if (n < 2) return 0.0;
  return hard.sum() / static_cast<double>(n * (n - 1));
}

AdjacencySample sample_soft_adjacency(const Matrix& Xs, double gamma, double tau_g, Rng& rng) {
  if (!(tau_g > 0.0)) throw InputError("Gumbel temperature must be positive");
  const auto n = Xs.rows();
  const Matrix gram = Xs * Xs.transpose();
  AdjacencySample s;
  s.hard = Matrix::Zero(n, n);
  s.soft = Matrix::Zero(n, n);
  s.logit = Matrix::Zero(n, n);
  for (Eigen::Index u = 0; u < n; ++u) {
    for (Eigen::Index v = u + 1; v < n; ++v) {
      const double w = standard_gumbel(rng);
      const double w_prime = standard_gumbel(rng);
      const double logit = (gram(u, v) - gamma + w - w_prime) / tau_g;
      const double p = sigmoid(logit);
      s.logit(u, v) = s.logit(v, u) = logit;
      s.soft(u, v) = s.soft(v, u) = p;
      s.hard(u, v) = s.hard(v, u) = p > 0.5 ? 1.0 : 0.0;
    }
  }
  return s;
}

Matrix straight_through_backward(const AdjacencySample& sample, const Matrix& Xs, const Matrix& d_hard,
                                 double tau_g) {
  // Each unordered pair is one variable feeding both (u, v) and (v, u).
  Matrix coeff = (d_hard + d_hard.transpose()).cwiseProduct(
                     sample.soft.cwiseProduct((1.0 - sample.soft.array()).matrix())) /
                 tau_g;
  coeff.diagonal().setZero();
  return coeff * Xs;
}

DistillOutcome distill_round(const DistillInit& init, const ModelParams& params, const DistillConfig& config,
                             std::uint64_t seed, int client_id, int round) {
  if (!params.all_finite()) throw NumericError("distillation received non-finite model parameters");
  if (init.X0.cols() != params.input_dim()) throw InputError("distillation init feature dim mismatch");
  const int n = init.num_nodes();
  const int C = params.num_classes();

  DistillOutcome out;
  auto& g = out.graph;
  g.gamma = config.gamma;
  g.tau_g = config.tau_g;
  g.Xs = init.X0;
  g.y_logits = Matrix::Zero(n, C);
  for (int i = 0; i < n; ++i) {
    if (init.y0[i] < 0 || init.y0[i] >= C) throw InputError("distillation label outside [0, C)");
    g.y_logits(i, init.y0[i]) = 1.0;
  }

  Rng rng(seed);
  AdamState adam(AdamConfig{.lr = config.lr, .weight_decay = 0.0});
  const Eigen::Index x_size = g.Xs.size();
  Vector flat(x_size + g.y_logits.size());

  for (int step = 0; step < config.steps; ++step) {
    const AdjacencySample sample = sample_soft_adjacency(g.Xs, config.gamma, config.tau_g, rng);
    out.soft_densities.push_back(sample.soft_density());
    const DenseAdjacency adj{sample.hard};
    const ForwardTrace trace = forward(params, adj, g.Xs);
    const Matrix targets = softmax(g.y_logits);
    const LossResult loss = loss_ce_soft(trace.logits, targets);
    if (!std::isfinite(loss.value)) {
      throw NumericError("non-finite distillation loss (client " + std::to_string(client_id) + ", round " +
                         std::to_string(round) + ", step " + std::to_string(step) + ")");
    }
    out.losses.push_back(loss.value);

    const Gradients grads = backward(trace, params, g.Xs, loss.dlogits, {}, {.input = true, .adjacency = true});
    const Matrix dX = *grads.dX + straight_through_backward(sample, g.Xs, *grads.dP, config.tau_g);
    // Softmax Jacobian: dz = t * (dt - sum(t * dt)).
    const Matrix& dt = *loss.dtargets;
    const Vector inner = targets.cwiseProduct(dt).rowwise().sum();
    const Matrix dY = targets.cwiseProduct((dt.colwise() - inner));

    flat.head(x_size) = Eigen::Map<const Vector>(g.Xs.data(), x_size);
    flat.tail(g.y_logits.size()) = Eigen::Map<const Vector>(g.y_logits.data(), g.y_logits.size());
    Vector gflat(flat.size());
    gflat.head(x_size) = Eigen::Map<const Vector>(dX.data(), x_size);
    gflat.tail(dY.size()) = Eigen::Map<const Vector>(dY.data(), dY.size());
    adam.step(flat, gflat);
    Eigen::Map<Vector>(g.Xs.data(), x_size) = flat.head(x_size);
    Eigen::Map<Vector>(g.y_logits.data(), g.y_logits.size()) = flat.tail(g.y_logits.size());
  }

  Rng final_rng(config.final_sample_seed.value_or(derive_seed(seed, Stream::kFinalSample)));
  const AdjacencySample final_sample = sample_soft_adjacency(g.Xs, config.gamma, config.tau_g, final_rng);
  out.soft_densities.push_back(final_sample.soft_density());
  const DenseAdjacency final_adj{config.soft_final_adjacency ? final_sample.soft : final_sample.hard};
  const ForwardTrace trace = forward(params, final_adj, g.Xs);
  if (!trace.H.allFinite()) {
    throw NumericError("non-finite distilled embeddings (client " + std::to_string(client_id) + ", round " +
                       std::to_string(round) + ")");
  }

  auto& f = out.feature;
  f.client_id = client_id;
  f.round = round;
  switch (config.feature_map) {
    case FeatureMap::kXH:
      f.M.resize(n, g.Xs.cols() + trace.H.cols());
      f.M << g.Xs, trace.H;
      break;
    case FeatureMap::kX:
      f.M = g.Xs;
      break;
    case FeatureMap::kH:
      f.M = trace.H;
      break;
    case FeatureMap::kYSoft:
      f.M = g.soft_labels();
      break;
  }
  return out;
}

}  // namespace fedgkd
