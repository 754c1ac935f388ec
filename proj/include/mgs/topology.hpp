#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mgs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One row per agent, one column per model coordinate.
using AgentParams = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Thrown when a matrix or topology request breaks a gossip-matrix invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kStochasticTolerance = 1e-10;

struct SpectralReport {
  double rho = 0.0;    // |lambda_2(W)|
  double delta = 1.0;  // 1 - rho
  double lambda_max_I_minus_W = 0.0;
  std::vector<double> eigenvalues;  // ascending
};

struct InvariantCheck {
  std::string name;
  bool passed = false;
  double violation = 0.0;  // measured magnitude, 0 when passed cleanly
};

struct GossipDiagnostics {
  std::vector<InvariantCheck> checks;

  bool all_passed() const;
  /// Human-readable, one invariant per line.
  std::string to_string() const;
};

/// Lists every gossip-matrix invariant with its measured violation. Never throws.
GossipDiagnostics validate_gossip_matrix(const Matrix& weights);

/// Full symmetric eigen-decomposition of W.
/// Throws ValidationError for non-square or non-symmetric input.
SpectralReport spectral_quantities(const Matrix& weights);

/// Symmetric doubly stochastic mixing matrix. Construction validates the
/// invariants and computes the spectrum once; instances are immutable.
class GossipMatrix {
 public:
  /// Throws ValidationError naming the violated invariants.
  explicit GossipMatrix(Matrix weights);

  int agents() const { return static_cast<int>(weights_.rows()); }
  const Matrix& weights() const { return weights_; }
  const SpectralReport& spectral() const { return spectral_; }
  double rho() const { return spectral_.rho; }
  double delta() const { return spectral_.delta; }

  /// Nonzero entries of row k in ascending column order.
  const std::vector<std::pair<int, double>>& row(int k) const { return rows_[k]; }

 private:
  Matrix weights_;
  SpectralReport spectral_;
  std::vector<std::vector<std::pair<int, double>>> rows_;
};

enum class TopologyKind { ring, torus, fully_connected, exponential, custom };

struct TopologySpec {
  TopologyKind kind = TopologyKind::ring;
  int torus_rows = 0;
  int torus_cols = 0;
  Matrix custom;

  static TopologySpec ring() { return {TopologyKind::ring}; }
  static TopologySpec fully_connected() { return {TopologyKind::fully_connected}; }
  static TopologySpec exponential() { return {TopologyKind::exponential}; }
  static TopologySpec torus(int rows, int cols) { return {TopologyKind::torus, rows, cols, {}}; }
  static TopologySpec custom_matrix(Matrix w) { return {TopologyKind::custom, 0, 0, std::move(w)}; }
};

std::string to_string(TopologyKind kind);
/// Accepts ring, torus, fully_connected, exponential, custom.
TopologyKind parse_topology_kind(const std::string& name);

/// Undirected edge list (k < l) of the graph behind a builder.
std::vector<std::pair<int, int>> topology_edges(const TopologySpec& spec, int m);

/// Metropolis-Hastings weights on an undirected graph:
/// W_kl = 1 / (1 + max(deg_k, deg_l)) on edges, diagonal takes the remainder.
Matrix metropolis_hastings_weights(int m, const std::vector<std::pair<int, int>>& edges);

/// Builds W for the requested topology. fully_connected is the uniform J/m.
GossipMatrix build_topology(const TopologySpec& spec, int m);

/// One gossip step: row k of the result is sum_l W_kl * row l of params.
AgentParams gossip_round(const AgentParams& params, const GossipMatrix& w);

/// Q successive gossip rounds; Q = 0 returns params unchanged.
AgentParams multi_gossip(AgentParams params, const GossipMatrix& w, int q);

/// Row per line, comma-separated. Throws std::runtime_error naming the line.
Matrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& w);

}  // namespace mgs
