#pragma once

#include "mgs/data.hpp"
#include "mgs/model.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace mgs {

struct CoupledTrajectory;

/// Metrics logged after a round. Losses and gbar are taken at the agent average.
struct RoundRecord {
  int t = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double consensus_error = 0.0;
  std::optional<double> weight_distance;  // coupled runs only
  double gbar = 0.0;
  double eta = 0.0;
};

inline constexpr const char* kRoundRecordHeader = "t,train_loss,test_loss,consensus_error,weight_distance,gbar,eta";

/// (1/m) sum_k ||theta_k - theta_bar||^2
double consensus_error(const AgentParams& params);

/// sum_k ||theta_k - other_k||^2
double weight_distance(const AgentParams& a, const AgentParams& b);

/// Distance logged for round t (0 <= t <= T). Throws std::out_of_range.
double weight_distance(const CoupledTrajectory& run, int t);

/// Held-out mean loss minus training mean loss at theta.
double loss_distance(const Model& model, const Vector& theta, std::span<const Sample> train,
                     std::span<const Sample> heldout);

/// Mean squared per-sample gradient norm at theta.
double empirical_gbar(const Model& model, const Vector& theta, std::span<const Sample> samples);
double empirical_gbar(const Model& model, const Vector& theta, const FederatedDataset& data);

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PowerLawFit {
  double exponent = 0.0;
  double log_intercept = 0.0;
  std::size_t onset = 0;  // first index with a positive value
  std::size_t points = 0;
};

/// Least-squares slope of log y against log t from the first positive y on.
/// Nonpositive points after the onset are skipped. Needs at least 10 points
/// with t > 0 and y > 0, otherwise throws FitError.
PowerLawFit powerlaw_fit(std::span<const double> t, std::span<const double> y);

void write_records_csv(std::ostream& out, std::span<const RoundRecord> records);

}  // namespace mgs
