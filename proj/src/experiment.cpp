#include "mgs/experiment.hpp"

#include "mgs/rng.hpp"

#include <fmt/format.h>

#include <cmath>

namespace mgs {

Model build_model(const ExperimentConfig& config, const SamplePool& train) {
  Model model = Model::logistic(config.dim);
  if (config.model == "quadratic") {
    Vector diag(config.dim);
    for (int i = 0; i < config.dim; ++i) diag(i) = config.curvature.size() == 1 ? config.curvature[0] : config.curvature[i];
    model = Model::quadratic_diagonal(diag);
  } else if (config.model == "mlp") {
    model = Model::mlp(config.dim, config.hidden, config.classes);
  }
  if (config.bounded) {
    model = model.bounded(calibrate_sup_loss(model, train, config.sup_radius, config.data_seed).value);
  }
  return model;
}

Prepared prepare(const ExperimentConfig& config) {
  const SamplePool pool =
      synth_classification(config.data_seed, config.pool_size(), config.dim, config.classes, config.separation);
  Prepared p;
  p.data = partition_dirichlet(pool, config.m, config.n, config.alpha, config.data_seed);
  const SamplePool train = p.data.pooled();
  p.model = build_model(config, train);
  p.constants = model_constants(p.model, train, config.sup_radius);
  return p;
}

RunConfig make_run_config(const ExperimentConfig& config, const Prepared& prepared, std::uint64_t seed) {
  RunConfig rc;
  auto kind = parse_topology_kind(config.topology);
  rc.topology = kind == TopologyKind::torus ? TopologySpec::torus(config.torus_rows, config.torus_cols)
                                            : TopologySpec{kind};
  rc.model = prepared.model;
  rc.T = config.T;
  rc.Q = config.Q;
  rc.lr = config.lr == "constant" ? LrSchedule::inverse_beta(prepared.constants.beta) : LrSchedule::decaying(config.c);
  rc.batch = config.batch;
  rc.seed = seed;
  rc.log_every = config.log_every;
  rc.init_scale = config.init;
  rc.init_seed = config.data_seed;
  return rc;
}

std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& config) {
  ExperimentConfig base = config;
  base.sweep_Q.clear();
  base.sweep_topology.clear();
  base.sweep_c.clear();
  base.sweep_m.clear();
  base.sweep_b.clear();

  const auto or_base = [](const auto& list, auto value) {
    using T = std::decay_t<decltype(value)>;
    return list.empty() ? std::vector<T>{value} : std::vector<T>(list.begin(), list.end());
  };
  std::vector<ExperimentConfig> grid;
  for (const auto& topo : or_base(config.sweep_topology, config.topology))
    for (int m : or_base(config.sweep_m, config.m))
      for (double c : or_base(config.sweep_c, config.c))
        for (int b : or_base(config.sweep_b, config.batch))
          for (int q : or_base(config.sweep_Q, config.Q)) {
            ExperimentConfig point = base;
            point.topology = topo;
            point.m = m;
            if (!config.sweep_m.empty() && config.fixed_total > 0) point.n = config.fixed_total / m;
            point.c = c;
            point.batch = b;
            point.Q = q;
            if (point.perturb_agent > point.m) point.perturb_agent = 0;
            if (point.perturb_index > point.n) point.perturb_index = 0;
            check_config(point);
            grid.push_back(point);
          }
  return grid;
}

Trajectory run_seed(const ExperimentConfig& config, const Prepared& prepared, std::uint64_t seed) {
  return dsgd_mgs_run(make_run_config(config, prepared, seed), prepared.data);
}

Trajectory run_centralized(const ExperimentConfig& config, const Prepared& prepared, std::uint64_t seed) {
  return centralized_minibatch_sgd(make_run_config(config, prepared, seed), prepared.data.pooled(),
                                   prepared.data.held_out(), prepared.data.agents());
}

std::pair<int, int> perturbation_site(const ExperimentConfig& config, std::uint64_t seed) {
  CounterRng rng(tagged_seed(seed, StreamTag::perturbation), 0x517e);
  const int agent = config.perturb_agent > 0 ? config.perturb_agent - 1 : static_cast<int>(rng.uniform_below(config.m));
  const int index = config.perturb_index > 0 ? config.perturb_index - 1 : static_cast<int>(rng.uniform_below(config.n));
  return {agent, index};
}

StabilityResult run_stability(const ExperimentConfig& config, const Prepared& prepared, std::uint64_t seed) {
  const auto [agent, index] = perturbation_site(config, seed);
  const PerturbedPair pair = config.identity_perturbation
                                 ? make_perturbed_with(prepared.data, index, agent, prepared.data.sample(agent, index))
                                 : make_perturbed(prepared.data, index, agent, seed);
  StabilityResult result;
  result.seed = seed;
  result.run = coupled_stability_run(make_run_config(config, prepared, seed), pair);
  std::vector<double> t(result.run.distances.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  try {
    result.fit = powerlaw_fit(t, result.run.distances);
  } catch (const FitError& e) {
    result.fit_error = e.what();
  }
  return result;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

AggregateRow aggregate(const ExperimentConfig& config, std::string label, std::span<const Trajectory> runs) {
  AggregateRow row;
  row.label = std::move(label);
  row.topology = config.topology;
  row.Q = config.Q;
  row.c = config.c;
  row.m = config.m;
  row.b = config.batch;
  row.seeds = runs.size();
  std::vector<double> train, test;
  for (const auto& r : runs) {
    train.push_back(r.records.back().train_loss);
    test.push_back(r.records.back().test_loss);
  }
  row.train = summarize(train);
  row.test = summarize(test);
  return row;
}

std::string format_aggregate_row(const AggregateRow& row) {
  return fmt::format("{},{},{},{},{},{},{},{:.17g},{:.17g},{:.17g},{:.17g}", row.label, row.topology,
                     row.Q ? std::to_string(*row.Q) : std::string(), row.c, row.m, row.b, row.seeds,
                     row.train.mean, row.train.sd, row.test.mean, row.test.sd);
}

}  // namespace mgs
