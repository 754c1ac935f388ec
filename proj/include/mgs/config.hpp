#pragma once

#include "mgs/bounds.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mgs {

/// Malformed or unknown configuration entry. The message names the key and line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

/// Flat `key=value` lines with `#` comments. When the text holds a
/// `# resolved config` block (as written at the top of every output CSV), only
/// the `# key=value` lines of that block are read.
std::vector<ConfigEntry> parse_key_values(std::string_view text, const std::string& origin);

inline constexpr const char* kResolvedMarker = "# resolved config";

struct ExperimentConfig {
  // data
  std::uint64_t data_seed = 0;
  int total = 0;  // 0: m*n + 1000
  int dim = 10;
  int classes = 2;
  double separation = 2.0;
  double alpha = 0.3;
  int m = 8;
  int n = 50;

  // model
  std::string model = "logistic";
  std::vector<int> hidden{8};
  std::vector<double> curvature{1.0};
  bool bounded = false;
  double sup_radius = 10.0;

  // run
  std::string topology = "ring";
  int torus_rows = 0;
  int torus_cols = 0;
  int T = 100;
  int Q = 1;
  std::string lr = "decaying";
  double c = 0.1;
  int batch = 1;
  std::vector<std::uint64_t> seeds{0};
  int log_every = 1;
  double init = 0.0;  // 0: zero vector

  // stability; 1-based, 0 means "random"
  int perturb_agent = 1;
  int perturb_index = 1;
  bool identity_perturbation = false;

  // sweeps
  std::vector<int> sweep_Q;
  std::vector<std::string> sweep_topology;
  std::vector<double> sweep_c;
  std::vector<int> sweep_m;
  std::vector<int> sweep_b;
  int fixed_total = 0;  // with sweep_m: n = fixed_total / m
  bool include_centralized = true;

  int pool_size() const { return total > 0 ? total : m * n + 1000; }
};

/// Throws ConfigError on unknown keys, bad values or inconsistent settings.
ExperimentConfig parse_experiment_config(std::string_view text, const std::string& origin = "<config>");
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Canonical key=value lines; parse_experiment_config inverts it.
std::vector<std::pair<std::string, std::string>> to_key_values(const ExperimentConfig& config);

/// `# resolved config` followed by one `# key=value` line per entry.
std::string resolved_block(const ExperimentConfig& config);

/// Checks value ranges; throws ConfigError.
void check_config(const ExperimentConfig& config);

/// Bound inputs plus the measured quantities the table may use.
struct BoundsFile {
  BoundInputs inputs;
  std::optional<double> gbar;
  double rs_last = 0.0;
};

/// Every BoundInputs symbol except gamma, t0, RS_star and delta is required;
/// a missing one throws ConfigError naming it. delta defaults to 1 - rho.
BoundsFile parse_bounds_file(std::string_view text, const std::string& origin = "<bounds>");

std::vector<std::string> split_list(const std::string& value);

}  // namespace mgs
