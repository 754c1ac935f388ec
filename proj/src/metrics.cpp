#include "mgs/metrics.hpp"

#include "mgs/optimizer.hpp"

#include <fmt/format.h>

#include <cmath>
#include <ostream>

namespace mgs {

double consensus_error(const AgentParams& params) {
  const auto m = params.rows();
  if (m == 0) return 0.0;
  const Vector mean = params.colwise().mean().transpose();
  double total = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) total += (params.row(k).transpose() - mean).squaredNorm();
  return total / static_cast<double>(m);
}

double weight_distance(const AgentParams& a, const AgentParams& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(fmt::format("weight_distance: shapes {}x{} and {}x{} differ", a.rows(),
                                            a.cols(), b.rows(), b.cols()));
  }
  return (a - b).squaredNorm();
}

double weight_distance(const CoupledTrajectory& run, int t) {
  if (t < 0 || static_cast<std::size_t>(t) >= run.distances.size()) {
    throw std::out_of_range(
        fmt::format("weight_distance: round {} outside [0, {}]", t, static_cast<int>(run.distances.size()) - 1));
  }
  return run.distances[t];
}

double loss_distance(const Model& model, const Vector& theta, std::span<const Sample> train,
                     std::span<const Sample> heldout) {
  return empirical_risk(model, theta, heldout) - empirical_risk(model, theta, train);
}

double empirical_gbar(const Model& model, const Vector& theta, std::span<const Sample> samples) {
  if (samples.empty()) {
    throw std::invalid_argument("empirical_gbar: no samples");
  }
  double total = 0.0;
  for (const auto& s : samples) total += grad(model, theta, s).squaredNorm();
  return total / static_cast<double>(samples.size());
}

double empirical_gbar(const Model& model, const Vector& theta, const FederatedDataset& data) {
  double total = 0.0;
  for (int k = 0; k < data.agents(); ++k) total += empirical_gbar(model, theta, data.shard(k));
  return total / data.agents();
}

PowerLawFit powerlaw_fit(std::span<const double> t, std::span<const double> y) {
  if (t.size() != y.size()) {
    throw std::invalid_argument("powerlaw_fit: t and y differ in length");
  }
  PowerLawFit fit;
  fit.onset = y.size();
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > 0.0) {
      fit.onset = i;
      break;
    }
  }
  if (fit.onset == y.size()) {
    throw FitError("powerlaw_fit: series has no positive values");
  }

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t count = 0;
  for (std::size_t i = fit.onset; i < y.size(); ++i) {
    if (!(y[i] > 0.0) || !(t[i] > 0.0)) continue;
    const double lx = std::log(t[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++count;
  }
  if (count < 10) {
    throw FitError(fmt::format("powerlaw_fit: {} usable points, need at least 10", count));
  }
  const double nn = static_cast<double>(count);
  const double var = sxx - sx * sx / nn;
  if (!(var > 0.0)) {
    throw FitError("powerlaw_fit: all t values coincide");
  }
  fit.exponent = (sxy - sx * sy / nn) / var;
  fit.log_intercept = (sy - fit.exponent * sx) / nn;
  fit.points = count;
  return fit;
}

void write_records_csv(std::ostream& out, std::span<const RoundRecord> records) {
  out << kRoundRecordHeader << '\n';
  for (const auto& r : records) {
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},", r.t, r.train_loss, r.test_loss, r.consensus_error);
    if (r.weight_distance) out << fmt::format("{:.17g}", *r.weight_distance);
    out << fmt::format(",{:.17g},{:.17g}\n", r.gbar, r.eta);
  }
}

}  // namespace mgs
