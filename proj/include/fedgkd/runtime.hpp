#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fedgkd/distiller.hpp"
#include "fedgkd/graph.hpp"
#include "fedgkd/model.hpp"
#include "fedgkd/relator.hpp"

namespace fedgkd {

enum class Method { kFedGKD, kLocal, kFedAvg, kFedProx, kFedPer };

Method parse_method(const std::string& s);
std::string to_string(Method m);

struct FedConfig {
  Method method = Method::kFedGKD;
  int rounds = 100;        // T
  int local_epochs = 3;    // E_t
  int distill_steps = 10;  // E_d
  double lr = 0.01;
  double lr_distill = 0.01;
  double lambda = 1e-3;    // proximal weight for fedgkd and fedprox
  double gamma = 1.5;
  double tau_g = 1.0;
  double tau = 0.25;
  double tau_s = 5.0;
  int distill_per_class = 2;  // m
  int hidden_dim = 128;
  double weight_decay = 1e-6;
  int patience = 20;
  std::uint64_t seed = 0;
  FeatureMap feature_map = FeatureMap::kXH;
  bool soft_final_adjacency = false;
  // Replaces the kernel output with uniform weights (FedAvg reduction).
  bool force_uniform_q = false;
  // Client steps within a round may run on this many threads.
  int workers = 1;
  // When set, R/S/Q of every fedgkd round are written under this directory.
  std::optional<std::filesystem::path> relation_dump_dir;

  /// Throws InputError on a violated invariant.
  void validate() const;
};

struct ClientMetrics {
  double train_acc = 0, val_acc = 0, test_acc = 0;
  double train_loss = 0, val_loss = 0, test_loss = 0;
  std::size_t bytes_up = 0, bytes_down = 0;
  int num_nodes = 0;
};

struct RoundRecord {
  int round = 0;
  std::vector<ClientMetrics> clients;
  double mean_val_acc = 0, mean_test_acc = 0, std_test_acc = 0;
  double weighted_test_acc = 0;  // weighted by client node count
  double mean_soft_density = 0;  // fedgkd only
  double wall_ms = 0;
};

/// Per-client state held by the coordinator. A client only ever touches
/// the graph at `split_index`, which equals its own id.
struct ClientState {
  int id = 0;
  int split_index = 0;
  const Graph* graph = nullptr;
  NormalizedAdjacency adjacency;
  ModelParams local;   // W_i^t after local training
  ModelParams anchor;  // personalized model received from the server
};

struct FederationState {
  FedConfig config;
  int round = 0;  // completed rounds
  std::vector<ClientState> clients;
  std::optional<RelationMatrix> relations;
  std::optional<KernelState> kernel;
  std::vector<TaskFeature> task_features;
  double last_soft_density = 0.0;
  std::vector<std::size_t> last_bytes_up, last_bytes_down;
};

/// Builds the round-0 state: every client starts from one shared Glorot
/// init (seeded by config.seed).
FederationState init_federation(const FedConfig& config, const FederatedSplit& split);

/// E_t epochs of full-batch Adam (fresh state) on train-mask CE plus
/// lambda * ||W - anchor||^2. Throws NumericError on a non-finite loss.
ModelParams local_train(const Graph& g, const NormalizedAdjacency& adj, const ModelParams& start,
                        const ModelParams& anchor, int epochs, double lr, double lambda,
                        double weight_decay = 1e-6);

/// Per-epoch training losses, for descent checks.
ModelParams local_train(const Graph& g, const NormalizedAdjacency& adj, const ModelParams& start,
                        const ModelParams& anchor, int epochs, double lr, double lambda,
                        double weight_decay, std::vector<double>* losses);

/// One FedGKD round: local training from the received personalized models,
/// distillation against the fresh local weights, relation/kernel
/// computation, and personalized aggregation into the next anchors.
void run_round_fedgkd(FederationState& state);

/// One baseline round (local, fedavg, fedprox, fedper).
void run_round_baseline(FederationState& state);

void run_round(FederationState& state);

ClientMetrics evaluate_client(const ClientState& client, const ModelParams& params);

RoundRecord record_round(const FederationState& state, double wall_ms);

struct FederationResult {
  std::vector<RoundRecord> records;
  std::vector<ModelParams> best_params;  // per client, at the best-validation round
  int best_round = 0;
  double best_test_acc = 0;      // unweighted mean over clients
  double best_weighted_test_acc = 0;
  double best_val_acc = 0;
  bool early_stopped = false;
  std::optional<RelationMatrix> final_relations;
  std::optional<KernelState> final_kernel;
};

/// Runs up to config.rounds rounds, stopping once the mean validation
/// accuracy has not improved on its best for `patience` rounds.
FederationResult run_federation(const FedConfig& config, const FederatedSplit& split);

/// Stable hash of every field that affects results (excludes dump paths).
std::string config_hash(const FedConfig& config);

/// CSV of RoundRecords: one row per client per round plus mean/std/
/// weighted summary rows. Timing goes in the trailing wall_ms column.
void write_round_csv_header(std::ostream& os);
void write_round_csv(std::ostream& os, const RoundRecord& record, const std::string& config_hash,
                     std::uint64_t seed);

}  // namespace fedgkd
