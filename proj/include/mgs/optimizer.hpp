#pragma once

#include "mgs/data.hpp"
#include "mgs/metrics.hpp"
#include "mgs/model.hpp"
#include "mgs/topology.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mgs {

enum class LrKind { decaying, constant };

/// decaying: eta_t = c / (t + 1); constant: eta_t = 1 / beta.
struct LrSchedule {
  LrKind kind = LrKind::decaying;
  double value = 0.1;  // c for decaying, beta for constant

  static LrSchedule decaying(double c);
  static LrSchedule inverse_beta(double beta);

  double at(int t) const;
};

double lr_schedule(const LrSchedule& schedule, int t);

struct RunConfig {
  TopologySpec topology;
  Model model = Model::logistic(1);
  int T = 100;
  int Q = 1;
  LrSchedule lr;
  int batch = 1;
  std::uint64_t seed = 0;
  /// Metrics are recorded every `log_every` rounds and always after the last.
  int log_every = 1;
  /// 0 starts every agent at the zero vector; otherwise N(0, init_scale^2)
  /// drawn from init_seed.
  double init_scale = 0.0;
  std::uint64_t init_seed = 0;
  /// Threads for the local updates of one round. Results do not depend on it.
  int agent_threads = 1;
  bool record_test = true;
  bool record_gbar = true;
  /// Keep theta for every round (for tests and diagnostics).
  bool keep_params = false;
  /// Keep the sample indices drawn in every round.
  bool keep_draws = false;
};

/// Throws std::invalid_argument naming the offending field.
void validate(const RunConfig& config, const FederatedDataset& data);

struct LocalStep {
  Vector theta;
  std::vector<int> indices;
};

/// theta - eta * mean gradient over b indices drawn with replacement from the
/// (seed, agent, round) stream.
LocalStep local_update(const Model& model, const Vector& theta, const SamplePool& shard, double eta,
                       int batch, std::uint64_t seed, int agent, int round);

struct Trajectory {
  std::vector<RoundRecord> records;
  AgentParams final_params;
  /// params[t] after round t, params[0] the start (keep_params only).
  std::vector<AgentParams> params;
  /// draws[t][k] are agent k's indices in round t (keep_draws only).
  std::vector<std::vector<std::vector<int>>> draws;
  SpectralReport spectral;
};

/// Algorithm: T rounds of a local SGD step on every agent followed by Q gossip steps.
Trajectory dsgd_mgs_run(const RunConfig& config, const FederatedDataset& data);

/// Same as dsgd_mgs_run with a prebuilt mixing matrix.
Trajectory dsgd_mgs_run(const RunConfig& config, const FederatedDataset& data, const GossipMatrix& w);

struct CoupledTrajectory {
  Trajectory base;
  Trajectory twin;
  /// distances[t] = sum_k ||theta_k - theta~_k||^2 after round t, distances[0] = 0.
  std::vector<double> distances;
  /// First round with a positive distance, or -1.
  int onset = -1;
  int agent = 0;
  int position = 0;
};

/// Runs on S and S^(ij) in lockstep with identical index draws, which are
/// compared every round.
CoupledTrajectory coupled_stability_run(const RunConfig& config, const PerturbedPair& pair);

/// Single-node SGD on the pooled m*n samples with batches of m*b indices.
/// `agents` is m. Records carry consensus_error = 0.
Trajectory centralized_minibatch_sgd(const RunConfig& config, const SamplePool& pooled,
                                     const SamplePool& heldout, int agents);

/// theta - eta * mean gradient over `batch`.
Vector sgd_step(const Model& model, const Vector& theta, std::span<const Sample> batch, double eta);

/// Mean over agents.
Vector averaged_iterate(const AgentParams& params);

/// Calls fn(i) for i in [0, count) on up to `threads` threads.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace mgs
