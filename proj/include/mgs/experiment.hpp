#pragma once

#include "mgs/config.hpp"
#include "mgs/data.hpp"
#include "mgs/metrics.hpp"
#include "mgs/model.hpp"
#include "mgs/optimizer.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mgs {

/// Dataset, model and constants for one grid point. Built from data_seed only,
/// so every run seed of the grid point sees the same data.
struct Prepared {
  FederatedDataset data;
  Model model = Model::logistic(1);
  ModelConstants constants;
};

Prepared prepare(const ExperimentConfig& config);

Model build_model(const ExperimentConfig& config, const SamplePool& train);

RunConfig make_run_config(const ExperimentConfig& config, const Prepared& prepared, std::uint64_t seed);

/// One config per grid point of the sweep lists, with the sweep keys cleared.
std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& config);

Trajectory run_seed(const ExperimentConfig& config, const Prepared& prepared, std::uint64_t seed);

Trajectory run_centralized(const ExperimentConfig& config, const Prepared& prepared, std::uint64_t seed);

struct StabilityResult {
  std::uint64_t seed = 0;
  CoupledTrajectory run;
  std::optional<PowerLawFit> fit;
  std::string fit_error;
};

/// 0-based (agent, position) picked for a seed; config entries of 0 mean random.
std::pair<int, int> perturbation_site(const ExperimentConfig& config, std::uint64_t seed);

StabilityResult run_stability(const ExperimentConfig& config, const Prepared& prepared, std::uint64_t seed);

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for one value
};

Summary summarize(std::span<const double> values);

struct AggregateRow {
  std::string label;
  std::string topology;
  std::optional<int> Q;  // empty for the centralized baseline
  double c = 0.0;
  int m = 0;
  int b = 0;
  std::size_t seeds = 0;
  Summary train;
  Summary test;
};

inline constexpr const char* kAggregateHeader =
    "label,topology,Q,c,m,b,seeds,train_loss_mean,train_loss_sd,test_loss_mean,test_loss_sd";

AggregateRow aggregate(const ExperimentConfig& config, std::string label, std::span<const Trajectory> runs);

std::string format_aggregate_row(const AggregateRow& row);

}  // namespace mgs
