#include "mgs/config.hpp"

#include "mgs/topology.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace mgs {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void fail(const std::string& origin, const ConfigEntry& e, const std::string& what) {
  throw ConfigError(fmt::format("{}:{}: key '{}': {}", origin, e.line, e.key, what));
}

template <typename T>
T parse_number(const std::string& origin, const ConfigEntry& e, const std::string& text) {
  T v{};
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    fail(origin, e, fmt::format("cannot parse '{}' as a number", text));
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) fail(origin, e, "value must be finite");
  }
  return v;
}

bool parse_bool(const std::string& origin, const ConfigEntry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  fail(origin, e, fmt::format("expected true or false, got '{}'", e.value));
}

template <typename T>
std::vector<T> parse_list(const std::string& origin, const ConfigEntry& e) {
  std::vector<T> out;
  for (const auto& item : split_list(e.value)) out.push_back(parse_number<T>(origin, e, item));
  return out;
}

std::string fmt_double(double v) { return fmt::format("{}", v); }

template <typename T>
std::string join(const std::vector<T>& values) {
  return fmt::format("{}", fmt::join(values, ","));
}

}  // namespace

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<ConfigEntry> parse_key_values(std::string_view text, const std::string& origin) {
  std::vector<std::string> lines;
  {
    std::string buf(text);
    std::stringstream ss(buf);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);
  }

  const auto marker = std::find_if(lines.begin(), lines.end(),
                                   [](const std::string& l) { return trim(l) == kResolvedMarker; });
  const bool resolved = marker != lines.end();

  std::vector<ConfigEntry> entries;
  const int start = resolved ? static_cast<int>(marker - lines.begin()) + 1 : 0;
  for (int i = start; i < static_cast<int>(lines.size()); ++i) {
    std::string line = trim(lines[i]);
    if (resolved) {
      if (line.empty() || line.front() != '#') break;
      line = trim(std::string_view(line).substr(1));
    } else {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = trim(std::string_view(line).substr(0, hash));
    }
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("{}:{}: expected key=value, got '{}'", origin, i + 1, line));
    }
    ConfigEntry e{trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)), i + 1};
    if (e.key.empty()) throw ConfigError(fmt::format("{}:{}: empty key", origin, i + 1));
    for (const auto& prev : entries) {
      if (prev.key == e.key) fail(origin, e, fmt::format("duplicate (first set on line {})", prev.line));
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

ExperimentConfig parse_experiment_config(std::string_view text, const std::string& origin) {
  ExperimentConfig c;
  using Setter = std::function<void(const ConfigEntry&)>;
  const auto integer = [&](int& field) {
    return Setter([&field, &origin](const ConfigEntry& e) { field = parse_number<int>(origin, e, e.value); });
  };
  const auto real = [&](double& field) {
    return Setter([&field, &origin](const ConfigEntry& e) { field = parse_number<double>(origin, e, e.value); });
  };
  const auto flag = [&](bool& field) {
    return Setter([&field, &origin](const ConfigEntry& e) { field = parse_bool(origin, e); });
  };
  const auto text_field = [&](std::string& field) { return Setter([&field](const ConfigEntry& e) { field = e.value; }); };
  const auto position = [&](int& field) {
    return Setter([&field, &origin](const ConfigEntry& e) {
      if (e.value == "random") {
        field = 0;
        return;
      }
      field = parse_number<int>(origin, e, e.value);
      if (field < 1) fail(origin, e, "expected a 1-based index or 'random'");
    });
  };

  const std::map<std::string, Setter> setters = {
      {"data_seed", [&](const ConfigEntry& e) { c.data_seed = parse_number<std::uint64_t>(origin, e, e.value); }},
      {"total", integer(c.total)},
      {"dim", integer(c.dim)},
      {"classes", integer(c.classes)},
      {"separation", real(c.separation)},
      {"alpha", real(c.alpha)},
      {"m", integer(c.m)},
      {"n", integer(c.n)},
      {"model", text_field(c.model)},
      {"hidden", [&](const ConfigEntry& e) { c.hidden = parse_list<int>(origin, e); }},
      {"curvature", [&](const ConfigEntry& e) { c.curvature = parse_list<double>(origin, e); }},
      {"bounded", flag(c.bounded)},
      {"sup_radius", real(c.sup_radius)},
      {"topology", text_field(c.topology)},
      {"torus_rows", integer(c.torus_rows)},
      {"torus_cols", integer(c.torus_cols)},
      {"T", integer(c.T)},
      {"Q", integer(c.Q)},
      {"lr", text_field(c.lr)},
      {"c", real(c.c)},
      {"batch", integer(c.batch)},
      {"seeds", [&](const ConfigEntry& e) { c.seeds = parse_list<std::uint64_t>(origin, e); }},
      {"log_every", integer(c.log_every)},
      {"init",
       [&](const ConfigEntry& e) { c.init = e.value == "zero" ? 0.0 : parse_number<double>(origin, e, e.value); }},
      {"perturb_agent", position(c.perturb_agent)},
      {"perturb_index", position(c.perturb_index)},
      {"identity_perturbation", flag(c.identity_perturbation)},
      {"sweep_Q", [&](const ConfigEntry& e) { c.sweep_Q = parse_list<int>(origin, e); }},
      {"sweep_topology", [&](const ConfigEntry& e) { c.sweep_topology = split_list(e.value); }},
      {"sweep_c", [&](const ConfigEntry& e) { c.sweep_c = parse_list<double>(origin, e); }},
      {"sweep_m", [&](const ConfigEntry& e) { c.sweep_m = parse_list<int>(origin, e); }},
      {"sweep_b", [&](const ConfigEntry& e) { c.sweep_b = parse_list<int>(origin, e); }},
      {"fixed_total", integer(c.fixed_total)},
      {"include_centralized", flag(c.include_centralized)},
  };

  for (const auto& e : parse_key_values(text, origin)) {
    const auto it = setters.find(e.key);
    if (it == setters.end()) fail(origin, e, "unknown key");
    it->second(e);
  }
  check_config(c);
  return c;
}

void check_config(const ExperimentConfig& c) {
  const auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  need(c.dim >= 1, "dim must be >= 1");
  need(c.classes >= 2, "classes must be >= 2");
  need(c.alpha > 0.0, "alpha must be positive");
  need(c.m >= 1, "m must be >= 1");
  need(c.n >= 1, "n must be >= 1");
  need(c.total == 0 || c.total >= c.m * c.n, "total must be at least m*n");
  need(c.model == "logistic" || c.model == "quadratic" || c.model == "mlp",
       "model must be logistic, quadratic or mlp");
  need(c.model != "logistic" || c.classes == 2, "logistic model needs classes=2");
  need(!c.hidden.empty() && std::all_of(c.hidden.begin(), c.hidden.end(), [](int h) { return h >= 1; }),
       "hidden sizes must be >= 1");
  need(!c.curvature.empty() && (c.curvature.size() == 1 || static_cast<int>(c.curvature.size()) == c.dim),
       "curvature needs 1 or dim entries");
  need(c.sup_radius > 0.0, "sup_radius must be positive");
  need(c.T >= 1, "T must be >= 1");
  need(c.Q >= 0, "Q must be >= 0");
  need(c.lr == "decaying" || c.lr == "constant", "lr must be decaying or constant");
  need(c.c > 0.0, "c must be positive");
  need(c.batch >= 1 && c.batch <= c.n, "batch must lie in [1, n]");
  need(!c.seeds.empty(), "seeds must be nonempty");
  need(c.log_every >= 1, "log_every must be >= 1");
  need(c.init >= 0.0, "init must be 'zero' or a nonnegative scale");
  need(c.perturb_agent <= c.m, "perturb_agent exceeds m");
  need(c.perturb_index <= c.n, "perturb_index exceeds n");
  try {
    const auto kind = parse_topology_kind(c.topology);
    need(kind != TopologyKind::custom, "custom topology is not available from a config file");
    for (const auto& t : c.sweep_topology) parse_topology_kind(t);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  for (int q : c.sweep_Q) need(q >= 0, "sweep_Q entries must be >= 0");
  for (double v : c.sweep_c) need(v > 0.0, "sweep_c entries must be positive");
  for (int v : c.sweep_m) need(v >= 1, "sweep_m entries must be >= 1");
  for (int v : c.sweep_b) need(v >= 1, "sweep_b entries must be >= 1");
  need(c.fixed_total >= 0, "fixed_total must be >= 0");
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str(), path.string());
}

std::vector<std::pair<std::string, std::string>> to_key_values(const ExperimentConfig& c) {
  const auto pos = [](int v) { return v == 0 ? std::string("random") : std::to_string(v); };
  std::vector<std::pair<std::string, std::string>> kv = {
      {"data_seed", std::to_string(c.data_seed)},
      {"total", std::to_string(c.total)},
      {"dim", std::to_string(c.dim)},
      {"classes", std::to_string(c.classes)},
      {"separation", fmt_double(c.separation)},
      {"alpha", fmt_double(c.alpha)},
      {"m", std::to_string(c.m)},
      {"n", std::to_string(c.n)},
      {"model", c.model},
      {"hidden", join(c.hidden)},
      {"curvature", join(c.curvature)},
      {"bounded", c.bounded ? "true" : "false"},
      {"sup_radius", fmt_double(c.sup_radius)},
      {"topology", c.topology},
      {"torus_rows", std::to_string(c.torus_rows)},
      {"torus_cols", std::to_string(c.torus_cols)},
      {"T", std::to_string(c.T)},
      {"Q", std::to_string(c.Q)},
      {"lr", c.lr},
      {"c", fmt_double(c.c)},
      {"batch", std::to_string(c.batch)},
      {"seeds", join(c.seeds)},
      {"log_every", std::to_string(c.log_every)},
      {"init", c.init == 0.0 ? std::string("zero") : fmt_double(c.init)},
      {"perturb_agent", pos(c.perturb_agent)},
      {"perturb_index", pos(c.perturb_index)},
      {"identity_perturbation", c.identity_perturbation ? "true" : "false"},
  };
  if (!c.sweep_Q.empty()) kv.emplace_back("sweep_Q", join(c.sweep_Q));
  if (!c.sweep_topology.empty()) kv.emplace_back("sweep_topology", join(c.sweep_topology));
  if (!c.sweep_c.empty()) kv.emplace_back("sweep_c", join(c.sweep_c));
  if (!c.sweep_m.empty()) kv.emplace_back("sweep_m", join(c.sweep_m));
  if (!c.sweep_b.empty()) kv.emplace_back("sweep_b", join(c.sweep_b));
  kv.emplace_back("fixed_total", std::to_string(c.fixed_total));
  kv.emplace_back("include_centralized", c.include_centralized ? "true" : "false");
  return kv;
}

std::string resolved_block(const ExperimentConfig& config) {
  std::string out = std::string(kResolvedMarker) + "\n";
  for (const auto& [k, v] : to_key_values(config)) out += fmt::format("# {}={}\n", k, v);
  return out;
}

BoundsFile parse_bounds_file(std::string_view text, const std::string& origin) {
  BoundsFile f;
  BoundInputs& in = f.inputs;
  std::map<std::string, double*> required = {
      {"c", &in.c},           {"beta", &in.beta},     {"n", &in.n},       {"m", &in.m},
      {"T", &in.T},           {"Q", &in.Q},           {"rho", &in.rho},   {"lambda_max", &in.lambda_max},
      {"sigma2", &in.sigma2}, {"xi2", &in.xi2},       {"mu", &in.mu},     {"Delta2", &in.Delta2},
      {"R0", &in.R0},         {"b", &in.b},           {"RS_last", &f.rs_last}};
  std::map<std::string, bool> seen;
  std::optional<double> delta;
  for (const auto& e : parse_key_values(text, origin)) {
    if (auto it = required.find(e.key); it != required.end()) {
      *it->second = parse_number<double>(origin, e, e.value);
      seen[e.key] = true;
    } else if (e.key == "delta") {
      delta = parse_number<double>(origin, e, e.value);
    } else if (e.key == "RS_star") {
      in.RS_star = parse_number<double>(origin, e, e.value);
    } else if (e.key == "gamma") {
      in.gamma = parse_number<double>(origin, e, e.value);
    } else if (e.key == "t0") {
      in.t0 = parse_number<double>(origin, e, e.value);
    } else if (e.key == "Gbar") {
      f.gbar = parse_number<double>(origin, e, e.value);
    } else if (e.key == "estimated") {
      for (const auto& s : split_list(e.value)) in.estimated.insert(s);
    } else {
      fail(origin, e, "unknown key");
    }
  }
  for (const auto& [key, ptr] : required) {
    if (!seen.count(key)) throw ConfigError(fmt::format("{}: missing symbol '{}'", origin, key));
  }
  in.delta = delta.value_or(1.0 - in.rho);
  try {
    check_inputs(in);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(fmt::format("{}: {}", origin, e.what()));
  }
  if (!(f.rs_last >= 0.0)) throw ConfigError(fmt::format("{}: RS_last must be nonnegative", origin));
  if (f.gbar && !(*f.gbar >= 0.0)) throw ConfigError(fmt::format("{}: Gbar must be nonnegative", origin));
  return f;
}

}  // namespace mgs
