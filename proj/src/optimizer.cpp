#include "mgs/optimizer.hpp"

#include "mgs/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <stdexcept>
#include <thread>

namespace mgs {

LrSchedule LrSchedule::decaying(double c) { return {LrKind::decaying, c}; }

LrSchedule LrSchedule::inverse_beta(double beta) { return {LrKind::constant, beta}; }

double LrSchedule::at(int t) const {
  if (!(value > 0.0)) {
    throw std::invalid_argument(fmt::format("learning-rate constant must be positive, got {}", value));
  }
  if (t < 0) {
    throw std::invalid_argument("learning-rate round must be nonnegative");
  }
  return kind == LrKind::decaying ? value / (t + 1.0) : 1.0 / value;
}

double lr_schedule(const LrSchedule& schedule, int t) { return schedule.at(t); }

void validate(const RunConfig& config, const FederatedDataset& data) {
  if (data.agents() < 1) throw std::invalid_argument("dataset has no agents");
  if (config.T < 1) throw std::invalid_argument(fmt::format("T must be >= 1, got {}", config.T));
  if (config.Q < 0) throw std::invalid_argument(fmt::format("Q must be >= 0, got {}", config.Q));
  if (config.batch < 1 || config.batch > data.per_agent()) {
    throw std::invalid_argument(
        fmt::format("batch must lie in [1, {}], got {}", data.per_agent(), config.batch));
  }
  if (!(config.lr.value > 0.0)) {
    throw std::invalid_argument(fmt::format("learning-rate constant must be positive, got {}", config.lr.value));
  }
  if (config.log_every < 1) throw std::invalid_argument("log_every must be >= 1");
  if (data.shard(0).front().features.size() != config.model.input_dim()) {
    throw std::invalid_argument(fmt::format("model expects {} features, data has {}", config.model.input_dim(),
                                            data.shard(0).front().features.size()));
  }
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::clamp(threads, 1, std::max(count, 1));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Vector sgd_step(const Model& model, const Vector& theta, std::span<const Sample> batch, double eta) {
  return theta - eta * batch_grad(model, theta, batch);
}

LocalStep local_update(const Model& model, const Vector& theta, const SamplePool& shard, double eta,
                       int batch, std::uint64_t seed, int agent, int round) {
  if (shard.empty()) throw std::invalid_argument("local_update: empty shard");
  if (batch < 1) throw std::invalid_argument("local_update: batch must be >= 1");
  LocalStep step;
  step.indices.resize(batch);
  Vector g = Vector::Zero(theta.size());
  for (int i = 0; i < batch; ++i) {
    step.indices[i] = static_cast<int>(draw_sample_index(seed, agent, round, i, shard.size()));
    accumulate_grad(model, theta, shard[step.indices[i]], 1.0, g);
  }
  step.theta = theta - (eta / batch) * g;
  return step;
}

Vector averaged_iterate(const AgentParams& params) { return params.colwise().mean().transpose(); }

namespace {

AgentParams initial_state(const RunConfig& config, int m) {
  const Vector theta0 = initial_params(config.model, config.init_scale, config.init_seed);
  AgentParams params(m, theta0.size());
  for (int k = 0; k < m; ++k) params.row(k) = theta0.transpose();
  return params;
}

struct MetricsSource {
  const Model& model;
  const SamplePool& train;
  const SamplePool& test;
  bool record_test;
  bool record_gbar;
};

RoundRecord measure(const MetricsSource& src, const AgentParams& params, int t, double eta) {
  RoundRecord r;
  r.t = t;
  r.eta = eta;
  r.consensus_error = consensus_error(params);
  const Vector mean = averaged_iterate(params);
  double loss_total = 0.0;
  double g_total = 0.0;
  for (const auto& s : src.train) {
    if (src.record_gbar) {
      Vector g = Vector::Zero(mean.size());
      loss_total += accumulate_grad(src.model, mean, s, 1.0, g);
      g_total += g.squaredNorm();
    } else {
      loss_total += loss(src.model, mean, s);
    }
  }
  r.train_loss = loss_total / static_cast<double>(src.train.size());
  r.gbar = g_total / static_cast<double>(src.train.size());
  if (src.record_test && !src.test.empty()) r.test_loss = empirical_risk(src.model, mean, src.test);
  return r;
}

bool should_log(const RunConfig& config, int t) { return t % config.log_every == 0 || t == config.T; }

// One round on every agent: local steps then gossip.
AgentParams advance(const RunConfig& config, const FederatedDataset& data, const GossipMatrix& w,
                    const AgentParams& params, int round, std::vector<std::vector<int>>& draws) {
  const int m = data.agents();
  const double eta = config.lr.at(round);
  AgentParams next(params.rows(), params.cols());
  draws.assign(m, {});
  parallel_for(m, config.agent_threads, [&](int k) {
    LocalStep step = local_update(config.model, params.row(k).transpose(), data.shard(k), eta, config.batch,
                                  config.seed, k, round);
    next.row(k) = step.theta.transpose();
    draws[k] = std::move(step.indices);
  });
  return multi_gossip(std::move(next), w, config.Q);
}

}  // namespace

Trajectory dsgd_mgs_run(const RunConfig& config, const FederatedDataset& data) {
  return dsgd_mgs_run(config, data, build_topology(config.topology, data.agents()));
}

Trajectory dsgd_mgs_run(const RunConfig& config, const FederatedDataset& data, const GossipMatrix& w) {
  validate(config, data);
  if (w.agents() != data.agents()) {
    throw std::invalid_argument(
        fmt::format("gossip matrix has {} agents, dataset has {}", w.agents(), data.agents()));
  }
  const SamplePool train = data.pooled();
  const MetricsSource src{config.model, train, data.held_out(), config.record_test, config.record_gbar};

  Trajectory traj;
  traj.spectral = w.spectral();
  AgentParams params = initial_state(config, data.agents());
  if (config.keep_params) traj.params.push_back(params);
  std::vector<std::vector<int>> draws;
  for (int t = 0; t < config.T; ++t) {
    params = advance(config, data, w, params, t, draws);
    if (config.keep_params) traj.params.push_back(params);
    if (config.keep_draws) traj.draws.push_back(draws);
    if (should_log(config, t + 1)) traj.records.push_back(measure(src, params, t + 1, config.lr.at(t)));
  }
  traj.final_params = std::move(params);
  return traj;
}

CoupledTrajectory coupled_stability_run(const RunConfig& config, const PerturbedPair& pair) {
  validate(config, pair.base);
  validate(config, pair.perturbed);
  const GossipMatrix w = build_topology(config.topology, pair.base.agents());
  const SamplePool train = pair.base.pooled();
  const SamplePool twin_train = pair.perturbed.pooled();
  const MetricsSource src{config.model, train, pair.base.held_out(), config.record_test, config.record_gbar};
  const MetricsSource twin_src{config.model, twin_train, pair.perturbed.held_out(), config.record_test,
                               config.record_gbar};

  CoupledTrajectory run;
  run.agent = pair.agent;
  run.position = pair.position;
  run.base.spectral = w.spectral();
  run.twin.spectral = w.spectral();
  AgentParams a = initial_state(config, pair.base.agents());
  AgentParams b = a;
  run.distances.push_back(0.0);
  if (config.keep_params) {
    run.base.params.push_back(a);
    run.twin.params.push_back(b);
  }
  std::vector<std::vector<int>> draws_a, draws_b;
  for (int t = 0; t < config.T; ++t) {
    a = advance(config, pair.base, w, a, t, draws_a);
    b = advance(config, pair.perturbed, w, b, t, draws_b);
    if (draws_a != draws_b) {
      throw std::logic_error(fmt::format("coupled runs drew different indices in round {}", t));
    }
    const double dist = weight_distance(a, b);
    run.distances.push_back(dist);
    if (run.onset < 0 && dist > 0.0) run.onset = t + 1;
    if (config.keep_params) {
      run.base.params.push_back(a);
      run.twin.params.push_back(b);
    }
    if (config.keep_draws) {
      run.base.draws.push_back(draws_a);
      run.twin.draws.push_back(draws_b);
    }
    if (should_log(config, t + 1)) {
      RoundRecord ra = measure(src, a, t + 1, config.lr.at(t));
      RoundRecord rb = measure(twin_src, b, t + 1, config.lr.at(t));
      ra.weight_distance = dist;
      rb.weight_distance = dist;
      run.base.records.push_back(ra);
      run.twin.records.push_back(rb);
    }
  }
  run.base.final_params = std::move(a);
  run.twin.final_params = std::move(b);
  return run;
}

Trajectory centralized_minibatch_sgd(const RunConfig& config, const SamplePool& pooled, const SamplePool& heldout,
                                     int agents) {
  if (pooled.empty()) throw std::invalid_argument("centralized_minibatch_sgd: empty pool");
  if (agents < 1) throw std::invalid_argument("centralized_minibatch_sgd: agents must be >= 1");
  if (config.T < 1) throw std::invalid_argument(fmt::format("T must be >= 1, got {}", config.T));
  if (config.batch < 1) throw std::invalid_argument("batch must be >= 1");
  if (config.log_every < 1) throw std::invalid_argument("log_every must be >= 1");

  const MetricsSource src{config.model, pooled, heldout, config.record_test, config.record_gbar};
  const int per_round = agents * config.batch;
  Trajectory traj;
  AgentParams params = initial_state(config, 1);
  if (config.keep_params) traj.params.push_back(params);
  std::vector<Sample> batch(per_round);
  for (int t = 0; t < config.T; ++t) {
    CounterRng rng(tagged_seed(config.seed, StreamTag::central_index), static_cast<std::uint64_t>(t));
    std::vector<int> idx(per_round);
    for (int i = 0; i < per_round; ++i) {
      idx[i] = static_cast<int>(rng.uniform_below(pooled.size()));
      batch[i] = pooled[idx[i]];
    }
    params.row(0) = sgd_step(config.model, params.row(0).transpose(), batch, config.lr.at(t)).transpose();
    if (config.keep_params) traj.params.push_back(params);
    if (config.keep_draws) traj.draws.push_back({idx});
    if (should_log(config, t + 1)) traj.records.push_back(measure(src, params, t + 1, config.lr.at(t)));
  }
  traj.final_params = std::move(params);
  return traj;
}

}  // namespace mgs
