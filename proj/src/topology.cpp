#include "mgs/topology.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mgs {

bool GossipDiagnostics::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

std::string GossipDiagnostics::to_string() const {
  std::string out;
  for (const auto& c : checks) {
    out += fmt::format("{:<20} {:<4} violation={:.3e}\n", c.name, c.passed ? "pass" : "FAIL",
                       c.violation);
  }
  return out;
}

GossipDiagnostics validate_gossip_matrix(const Matrix& w) {
  GossipDiagnostics report;
  const bool square = w.rows() == w.cols() && w.rows() > 0;
  report.checks.push_back(
      {"square", square, square ? 0.0 : static_cast<double>(std::abs(w.rows() - w.cols()))});
  const bool finite = w.allFinite();
  report.checks.push_back({"finite", finite, finite ? 0.0 : 1.0});
  if (!square || !finite) {
    return report;
  }

  const double asym = (w - w.transpose()).cwiseAbs().maxCoeff();
  report.checks.push_back({"symmetric", asym <= kSymmetryTolerance, asym});

  const double row_dev = (w.rowwise().sum().array() - 1.0).abs().maxCoeff();
  report.checks.push_back({"row_stochastic", row_dev <= kStochasticTolerance, row_dev});

  const double col_dev = (w.colwise().sum().array() - 1.0).abs().maxCoeff();
  report.checks.push_back({"column_stochastic", col_dev <= kStochasticTolerance, col_dev});

  double range_dev = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double v = w.data()[i];
    range_dev = std::max({range_dev, -v, v - 1.0});
  }
  report.checks.push_back({"entries_in_unit", range_dev <= 0.0, std::max(range_dev, 0.0)});
  return report;
}

SpectralReport spectral_quantities(const Matrix& w) {
  if (w.rows() != w.cols() || w.rows() == 0) {
    throw ValidationError(
        fmt::format("spectral_quantities: matrix is {}x{}, expected square", w.rows(), w.cols()));
  }
  const double asym = (w - w.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= kSymmetryTolerance)) {
    throw ValidationError(fmt::format("spectral_quantities: not symmetric (max |W-W^T| = {:.3e})", asym));
  }

  SpectralReport report;
  if (w.rows() == 1) {
    report.eigenvalues = {w(0, 0)};
    report.rho = 0.0;
    report.delta = 1.0;
    report.lambda_max_I_minus_W = 1.0 - w(0, 0);
    return report;
  }

  Eigen::SelfAdjointEigenSolver<Matrix> solver(w, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw ValidationError("spectral_quantities: eigen-decomposition failed");
  }
  const Vector& ev = solver.eigenvalues();
  report.eigenvalues.assign(ev.data(), ev.data() + ev.size());

  std::vector<double> magnitudes(report.eigenvalues.size());
  std::transform(report.eigenvalues.begin(), report.eigenvalues.end(), magnitudes.begin(),
                 [](double v) { return std::abs(v); });
  std::sort(magnitudes.begin(), magnitudes.end(), std::greater<>());
  report.rho = magnitudes[1];
  report.delta = 1.0 - report.rho;
  report.lambda_max_I_minus_W = 1.0 - report.eigenvalues.front();
  return report;
}

GossipMatrix::GossipMatrix(Matrix weights) : weights_(std::move(weights)) {
  const auto diagnostics = validate_gossip_matrix(weights_);
  if (!diagnostics.all_passed()) {
    std::string failed;
    for (const auto& c : diagnostics.checks) {
      if (!c.passed) {
        failed += fmt::format("{}{} ({:.3e})", failed.empty() ? "" : ", ", c.name, c.violation);
      }
    }
    throw ValidationError("invalid gossip matrix: " + failed);
  }
  spectral_ = spectral_quantities(weights_);

  const int m = agents();
  rows_.resize(m);
  for (int k = 0; k < m; ++k) {
    for (int l = 0; l < m; ++l) {
      if (weights_(k, l) != 0.0) {
        rows_[k].emplace_back(l, weights_(k, l));
      }
    }
  }
}

std::string to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::ring:
      return "ring";
    case TopologyKind::torus:
      return "torus";
    case TopologyKind::fully_connected:
      return "fully_connected";
    case TopologyKind::exponential:
      return "exponential";
    case TopologyKind::custom:
      return "custom";
  }
  return "unknown";
}

TopologyKind parse_topology_kind(const std::string& name) {
  if (name == "ring") return TopologyKind::ring;
  if (name == "torus") return TopologyKind::torus;
  if (name == "fully_connected" || name == "full") return TopologyKind::fully_connected;
  if (name == "exponential" || name == "exponential_graph") return TopologyKind::exponential;
  if (name == "custom") return TopologyKind::custom;
  throw std::invalid_argument("unknown topology '" + name + "'");
}

std::vector<std::pair<int, int>> topology_edges(const TopologySpec& spec, int m) {
  if (m < 1) {
    throw ValidationError("topology needs at least one agent");
  }
  std::set<std::pair<int, int>> edges;
  auto add = [&](int a, int b) {
    if (a != b) {
      edges.emplace(std::min(a, b), std::max(a, b));
    }
  };

  switch (spec.kind) {
    case TopologyKind::ring:
      for (int k = 0; k < m; ++k) add(k, (k + 1) % m);
      break;
    case TopologyKind::torus: {
      if (spec.torus_rows < 1 || spec.torus_cols < 1 || spec.torus_rows * spec.torus_cols != m) {
        throw ValidationError(fmt::format("torus {}x{} does not match m={}", spec.torus_rows,
                                          spec.torus_cols, m));
      }
      const int rows = spec.torus_rows;
      const int cols = spec.torus_cols;
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          const int k = r * cols + c;
          add(k, r * cols + (c + 1) % cols);
          add(k, ((r + 1) % rows) * cols + c);
        }
      }
      break;
    }
    case TopologyKind::fully_connected:
      for (int k = 0; k < m; ++k)
        for (int l = k + 1; l < m; ++l) add(k, l);
      break;
    case TopologyKind::exponential:
      for (int k = 0; k < m; ++k)
        for (int hop = 1; hop < m; hop *= 2) add(k, (k + hop) % m);
      break;
    case TopologyKind::custom:
      throw ValidationError("custom topology has no builder edge list");
  }
  return {edges.begin(), edges.end()};
}

Matrix metropolis_hastings_weights(int m, const std::vector<std::pair<int, int>>& edges) {
  std::vector<int> degree(m, 0);
  for (const auto& [a, b] : edges) {
    ++degree[a];
    ++degree[b];
  }
  Matrix w = Matrix::Zero(m, m);
  for (const auto& [a, b] : edges) {
    const double weight = 1.0 / (1.0 + std::max(degree[a], degree[b]));
    w(a, b) = weight;
    w(b, a) = weight;
  }
  for (int k = 0; k < m; ++k) {
    double off = 0.0;
    for (int l = 0; l < m; ++l) {
      if (l != k) off += w(k, l);
    }
    w(k, k) = 1.0 - off;
  }
  return w;
}

GossipMatrix build_topology(const TopologySpec& spec, int m) {
  if (m < 1) {
    throw ValidationError("topology needs at least one agent");
  }
  switch (spec.kind) {
    case TopologyKind::custom:
      if (spec.custom.rows() != m || spec.custom.cols() != m) {
        throw ValidationError(fmt::format("custom matrix is {}x{}, expected {}x{}",
                                          spec.custom.rows(), spec.custom.cols(), m, m));
      }
      return GossipMatrix(spec.custom);
    case TopologyKind::fully_connected:
      return GossipMatrix(Matrix::Constant(m, m, 1.0 / m));
    default:
      return GossipMatrix(metropolis_hastings_weights(m, topology_edges(spec, m)));
  }
}

AgentParams gossip_round(const AgentParams& params, const GossipMatrix& w) {
  if (params.rows() != w.agents()) {
    throw std::invalid_argument(fmt::format("gossip_round: params have {} rows, W is {}x{}",
                                            params.rows(), w.agents(), w.agents()));
  }
  AgentParams out = AgentParams::Zero(params.rows(), params.cols());
  const Eigen::Index d = params.cols();
  for (int k = 0; k < w.agents(); ++k) {
    double* dst = out.row(k).data();
    for (const auto& [l, weight] : w.row(k)) {
      const double* src = params.row(l).data();
      for (Eigen::Index i = 0; i < d; ++i) {
        dst[i] += weight * src[i];
      }
    }
  }
  return out;
}

AgentParams multi_gossip(AgentParams params, const GossipMatrix& w, int q) {
  if (q < 0) {
    throw std::invalid_argument("multi_gossip: Q must be nonnegative");
  }
  if (params.rows() != w.agents()) {
    throw std::invalid_argument(fmt::format("multi_gossip: params have {} rows, W is {}x{}",
                                            params.rows(), w.agents(), w.agents()));
  }
  for (int step = 0; step < q; ++step) {
    params = gossip_round(params, w);
  }
  return params;
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open matrix file " + path.string());
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        throw std::runtime_error(
            fmt::format("{}:{}: cannot parse '{}' as a number", path.string(), line_no, cell));
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::runtime_error(fmt::format("{}:{}: expected {} columns, found {}", path.string(),
                                           line_no, rows.front().size(), row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw std::runtime_error(path.string() + ": no matrix rows");
  }
  Matrix w(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) w(r, c) = rows[r][c];
  return w;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& w) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write matrix file " + path.string());
  }
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      out << (c ? "," : "") << fmt::format("{:.17g}", w(r, c));
    }
    out << '\n';
  }
}

}  // namespace mgs
