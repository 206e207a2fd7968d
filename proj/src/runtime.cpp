#include "fedgkd/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "fedgkd/adam.hpp"
#include "fedgkd/checkpoint.hpp"
#include "fedgkd/error.hpp"
#include "fedgkd/rng.hpp"

namespace fedgkd {
namespace {

// Runs fn(i) for i in [0, n). Each index writes only its own slot, so the
// result does not depend on scheduling.
template <typename Fn>
void for_each_client(int n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::exception_ptr first_error;
  int next = 0;
  auto worker = [&] {
    while (true) {
      int i;
      {
        std::lock_guard lock(mu);
        if (next >= n || first_error) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < std::min(workers, n); ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
}

Matrix uniform_q(int n) { return Matrix::Constant(n, n, 1.0 / n); }

std::vector<ModelParams> locals_of(const FederationState& s) {
  std::vector<ModelParams> out;
  out.reserve(s.clients.size());
  for (const auto& c : s.clients) out.push_back(c.local);
  return out;
}

std::string with_context(const std::exception& e, int client, int round) {
  return "client " + std::to_string(client) + ", round " + std::to_string(round) + ": " + e.what();
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

Method parse_method(const std::string& s) {
  if (s == "fedgkd") return Method::kFedGKD;
  if (s == "local") return Method::kLocal;
  if (s == "fedavg") return Method::kFedAvg;
  if (s == "fedprox") return Method::kFedProx;
  if (s == "fedper") return Method::kFedPer;
  throw InputError("unknown method '" + s + "' (expected fedgkd, local, fedavg, fedprox, fedper)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kFedGKD:
      return "fedgkd";
    case Method::kLocal:
      return "local";
    case Method::kFedAvg:
      return "fedavg";
    case Method::kFedProx:
      return "fedprox";
    case Method::kFedPer:
      return "fedper";
  }
  return "fedgkd";
}

void FedConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw InputError("invalid config: " + what);
  };
  require(rounds >= 1, "rounds must be >= 1");
  require(local_epochs >= 0, "local_epochs must be >= 0");
  require(distill_steps >= 0, "distill_steps must be >= 0");
  require(lr > 0.0 && lr_distill > 0.0, "learning rates must be > 0");
  require(lambda >= 0.0, "lambda must be >= 0");
  require(gamma > 0.0, "gamma must be > 0");
  require(tau_g > 0.0 && tau > 0.0 && tau_s > 0.0, "temperatures must be > 0");
  require(distill_per_class >= 1, "distill_per_class must be >= 1");
  require(hidden_dim >= 1, "hidden_dim must be >= 1");
  require(weight_decay >= 0.0, "weight_decay must be >= 0");
  require(patience >= 1, "patience must be >= 1");
  require(workers >= 1, "workers must be >= 1");
}

FederationState init_federation(const FedConfig& config, const FederatedSplit& split) {
  config.validate();
  if (split.client_graphs.empty()) throw InputError("federation needs at least one client");
  const int D = split.client_graphs.front().feature_dim();
  const int C = split.client_graphs.front().num_classes();
  for (const auto& g : split.client_graphs) {
    if (g.feature_dim() != D || g.num_classes() != C) {
      throw InputError("client graphs disagree on feature dimension or class count");
    }
  }
  FederationState s;
  s.config = config;
  const ModelParams init = ModelParams::glorot(D, config.hidden_dim, C, derive_seed(config.seed, Stream::kInit));
  const int n = static_cast<int>(split.client_graphs.size());
  s.clients.resize(n);
  for (int i = 0; i < n; ++i) {
    auto& c = s.clients[i];
    c.id = i;
    c.split_index = i;
    c.graph = &split.client_graphs[i];
    c.adjacency = normalize(*c.graph);
    c.local = init;
    c.anchor = init;
  }
  s.last_bytes_up.assign(n, 0);
  s.last_bytes_down.assign(n, 0);
  return s;
}

ModelParams local_train(const Graph& g, const NormalizedAdjacency& adj, const ModelParams& start,
                        const ModelParams& anchor, int epochs, double lr, double lambda, double weight_decay,
                        std::vector<double>* losses) {
  if (!start.same_shape(anchor)) throw InputError("local_train: anchor shape differs from start");
  ModelParams w = start;
  const auto& train = g.masks().train;
  if (std::none_of(train.begin(), train.end(), [](bool b) { return b; })) return w;

  AdamState adam(AdamConfig{.lr = lr, .weight_decay = weight_decay});
  const ProximalTerm prox{lambda, &anchor};
  for (int e = 0; e < epochs; ++e) {
    const ForwardTrace trace = forward(w, adj, g.features());
    const LossResult loss = loss_ce(trace.logits, g.labels(), train);
    const double total = loss.value + prox.value(w);
    if (!std::isfinite(total)) throw NumericError("non-finite training loss at epoch " + std::to_string(e));
    if (losses) losses->push_back(total);
    const Gradients grads = backward(trace, w, g.features(), loss.dlogits, prox);
    adam.step(w, grads.params);
  }
  return w;
}

ModelParams local_train(const Graph& g, const NormalizedAdjacency& adj, const ModelParams& start,
                        const ModelParams& anchor, int epochs, double lr, double lambda, double weight_decay) {
  return local_train(g, adj, start, anchor, epochs, lr, lambda, weight_decay, nullptr);
}

void run_round_fedgkd(FederationState& s) {
  const auto& cfg = s.config;
  const int t = s.round + 1;
  const int n = static_cast<int>(s.clients.size());

  for_each_client(n, cfg.workers, [&](int i) {
    auto& c = s.clients[i];
    try {
      c.local = local_train(*c.graph, c.adjacency, c.anchor, c.anchor, cfg.local_epochs, cfg.lr, cfg.lambda,
                            cfg.weight_decay);
    } catch (const std::exception& e) {
      throw NumericError(with_context(e, i, t));
    }
  });

  const auto& first = s.clients.front().local;
  const DistillInit init = server_init_distill(cfg.distill_per_class, first.num_classes(), first.input_dim(),
                                               derive_seed(cfg.seed, Stream::kDistillInit, {std::uint64_t(t)}));
  DistillConfig dcfg{.steps = cfg.distill_steps,
                     .lr = cfg.lr_distill,
                     .gamma = cfg.gamma,
                     .tau_g = cfg.tau_g,
                     .feature_map = cfg.feature_map,
                     .soft_final_adjacency = cfg.soft_final_adjacency,
                     .final_sample_seed = derive_seed(cfg.seed, Stream::kFinalSample, {std::uint64_t(t)})};

  std::vector<DistillOutcome> outcomes(n);
  for_each_client(n, cfg.workers, [&](int i) {
    try {
      outcomes[i] = distill_round(init, s.clients[i].local, dcfg,
                                  derive_seed(cfg.seed, Stream::kDistill, {std::uint64_t(t), std::uint64_t(i)}), i, t);
    } catch (const std::exception& e) {
      throw NumericError(with_context(e, i, t));
    }
  });

  s.task_features.clear();
  double density = 0.0;
  for (auto& o : outcomes) {
    density += mean_of(o.soft_densities);
    s.task_features.push_back(std::move(o.feature));
  }
  s.last_soft_density = density / n;

  s.relations = compute_relations(s.task_features);
  s.kernel = relate(*s.relations, cfg.tau, cfg.tau_s);
  if (cfg.force_uniform_q) s.kernel->Q = uniform_q(n);
  if (cfg.relation_dump_dir) {
    char name[32];
    std::snprintf(name, sizeof name, "round_%04d", t);
    dump_relations(*s.relations, *s.kernel, *cfg.relation_dump_dir / name);
  }

  auto anchors = aggregate(locals_of(s), s.kernel->Q);
  const std::size_t param_bytes = 8 * first.size();
  for (int i = 0; i < n; ++i) {
    s.clients[i].anchor = std::move(anchors[i]);
    s.last_bytes_up[i] = param_bytes + s.task_features[i].wire_bytes();
    s.last_bytes_down[i] = param_bytes + init.wire_bytes();
  }
  s.round = t;
}

void run_round_baseline(FederationState& s) {
  const auto& cfg = s.config;
  if (cfg.method == Method::kFedGKD) throw InputError("run_round_baseline called with method fedgkd");
  const int t = s.round + 1;
  const int n = static_cast<int>(s.clients.size());
  const double lambda = cfg.method == Method::kFedProx ? cfg.lambda : 0.0;

  for_each_client(n, cfg.workers, [&](int i) {
    auto& c = s.clients[i];
    try {
      c.local = local_train(*c.graph, c.adjacency, c.anchor, c.anchor, cfg.local_epochs, cfg.lr, lambda,
                            cfg.weight_decay);
    } catch (const std::exception& e) {
      throw NumericError(with_context(e, i, t));
    }
  });

  const auto& first = s.clients.front().local;
  std::size_t up = 0;
  std::vector<ModelParams> anchors;
  switch (cfg.method) {
    case Method::kLocal:
      anchors = locals_of(s);
      break;
    case Method::kFedAvg:
    case Method::kFedProx:
      anchors = aggregate(locals_of(s), uniform_q(n));
      up = 8 * first.size();
      break;
    case Method::kFedPer:
      anchors = aggregate(locals_of(s), uniform_q(n), AggregateScope::kGcnOnly);
      up = 8 * first.gcn_size();
      break;
    case Method::kFedGKD:
      break;
  }
  for (int i = 0; i < n; ++i) {
    s.clients[i].anchor = std::move(anchors[i]);
    s.last_bytes_up[i] = up;
    s.last_bytes_down[i] = up;
  }
  s.last_soft_density = 0.0;
  s.round = t;
}

void run_round(FederationState& s) {
  if (s.config.method == Method::kFedGKD) {
    run_round_fedgkd(s);
  } else {
    run_round_baseline(s);
  }
}

ClientMetrics evaluate_client(const ClientState& client, const ModelParams& params) {
  const Graph& g = *client.graph;
  const ForwardTrace trace = forward(params, client.adjacency, g.features());
  ClientMetrics m;
  m.num_nodes = g.num_nodes();
  const auto& masks = g.masks();
  auto loss_on = [&](const std::vector<bool>& mask) {
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) return 0.0;
    return loss_ce(trace.logits, g.labels(), mask).value;
  };
  m.train_acc = accuracy(trace.logits, g.labels(), masks.train);
  m.val_acc = accuracy(trace.logits, g.labels(), masks.val);
  m.test_acc = accuracy(trace.logits, g.labels(), masks.test);
  m.train_loss = loss_on(masks.train);
  m.val_loss = loss_on(masks.val);
  m.test_loss = loss_on(masks.test);
  return m;
}

RoundRecord record_round(const FederationState& s, double wall_ms) {
  RoundRecord r;
  r.round = s.round;
  r.wall_ms = wall_ms;
  r.mean_soft_density = s.last_soft_density;
  std::vector<double> val, test;
  double weighted = 0.0, nodes = 0.0;
  for (std::size_t i = 0; i < s.clients.size(); ++i) {
    ClientMetrics m = evaluate_client(s.clients[i], s.clients[i].local);
    m.bytes_up = s.last_bytes_up[i];
    m.bytes_down = s.last_bytes_down[i];
    val.push_back(m.val_acc);
    test.push_back(m.test_acc);
    weighted += m.test_acc * m.num_nodes;
    nodes += m.num_nodes;
    r.clients.push_back(m);
  }
  r.mean_val_acc = mean_of(val);
  r.mean_test_acc = mean_of(test);
  r.std_test_acc = sample_std(test);
  r.weighted_test_acc = nodes > 0 ? weighted / nodes : 0.0;
  return r;
}

FederationResult run_federation(const FedConfig& config, const FederatedSplit& split) {
  FederationState s = init_federation(config, split);
  FederationResult result;
  double best_val = -1.0;
  int since_best = 0;
  for (int t = 1; t <= config.rounds; ++t) {
    const auto start = std::chrono::steady_clock::now();
    run_round(s);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    RoundRecord rec = record_round(s, ms);
    if (rec.mean_val_acc > best_val) {
      best_val = rec.mean_val_acc;
      since_best = 0;
      result.best_round = rec.round;
      result.best_val_acc = rec.mean_val_acc;
      result.best_test_acc = rec.mean_test_acc;
      result.best_weighted_test_acc = rec.weighted_test_acc;
      result.best_params = locals_of(s);
    } else {
      ++since_best;
    }
    result.records.push_back(std::move(rec));
    if (since_best >= config.patience && t < config.rounds) {
      result.early_stopped = true;
      break;
    }
  }
  result.final_relations = s.relations;
  result.final_kernel = s.kernel;
  return result;
}

std::string config_hash(const FedConfig& c) {
  nlohmann::ordered_json j = {
      {"method", to_string(c.method)},
      {"rounds", c.rounds},
      {"local_epochs", c.local_epochs},
      {"distill_steps", c.distill_steps},
      {"lr", c.lr},
      {"lr_distill", c.lr_distill},
      {"lambda", c.lambda},
      {"gamma", c.gamma},
      {"tau_g", c.tau_g},
      {"tau", c.tau},
      {"tau_s", c.tau_s},
      {"distill_per_class", c.distill_per_class},
      {"hidden_dim", c.hidden_dim},
      {"weight_decay", c.weight_decay},
      {"patience", c.patience},
      {"seed", c.seed},
      {"feature_map", to_string(c.feature_map)},
      {"soft_final_adjacency", c.soft_final_adjacency},
      {"force_uniform_q", c.force_uniform_q},
  };
  const std::string text = j.dump();
  return hex64(fnv1a64(std::as_bytes(std::span<const char>(text.data(), text.size()))));
}

void write_round_csv_header(std::ostream& os) {
  os << "config_hash,seed,round,client,num_nodes,train_acc,val_acc,test_acc,train_loss,val_loss,test_loss,"
        "bytes_up,bytes_down,soft_density,wall_ms\n";
}

void write_round_csv(std::ostream& os, const RoundRecord& r, const std::string& hash, std::uint64_t seed) {
  char buf[512];
  for (std::size_t i = 0; i < r.clients.size(); ++i) {
    const auto& m = r.clients[i];
    std::snprintf(buf, sizeof buf, "%s,%llu,%d,%zu,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%zu,%zu,,%.3f\n",
                  hash.c_str(), static_cast<unsigned long long>(seed), r.round, i, m.num_nodes, m.train_acc,
                  m.val_acc, m.test_acc, m.train_loss, m.val_loss, m.test_loss, m.bytes_up, m.bytes_down, r.wall_ms);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%s,%llu,%d,mean,,,%.10g,%.10g,,,,,,%.10g,%.3f\n", hash.c_str(),
                static_cast<unsigned long long>(seed), r.round, r.mean_val_acc, r.mean_test_acc, r.mean_soft_density,
                r.wall_ms);
  os << buf;
  std::snprintf(buf, sizeof buf, "%s,%llu,%d,std,,,,%.10g,,,,,,,%.3f\n", hash.c_str(),
                static_cast<unsigned long long>(seed), r.round, r.std_test_acc, r.wall_ms);
  os << buf;
  std::snprintf(buf, sizeof buf, "%s,%llu,%d,weighted_mean,,,,%.10g,,,,,,,%.3f\n", hash.c_str(),
                static_cast<unsigned long long>(seed), r.round, r.weighted_test_acc, r.wall_ms);
  os << buf;
}

}  // namespace fedgkd
