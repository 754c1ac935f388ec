#include "mgs/cli.hpp"

#include "mgs/bounds.hpp"
#include "mgs/topology.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace mgs {

namespace {

std::string records_csv(const ExperimentConfig& config, std::span<const RoundRecord> records) {
  std::ostringstream os;
  os << resolved_block(config);
  write_records_csv(os, records);
  return os.str();
}

ExperimentConfig load_for(const CommandOptions& options) {
  ExperimentConfig config = load_experiment_config(options.config);
  if (!options.seeds.empty()) config.seeds = options.seeds;
  return config;
}

ExperimentConfig with_seed(ExperimentConfig config, std::uint64_t seed) {
  config.seeds = {seed};
  return config;
}

std::string point_tag(const ExperimentConfig& c) {
  return fmt::format("{}_m{}_Q{}_c{}_b{}", c.topology, c.m, c.Q, c.c, c.batch);
}

// Runs fn over every (point, seed) pair on `jobs` threads; results land in
// slots indexed by position so the output order never depends on scheduling.
template <typename Result, typename Fn>
std::vector<std::vector<Result>> run_grid(const std::vector<ExperimentConfig>& grid,
                                          const std::vector<Prepared>& prepared, int jobs, Fn fn) {
  std::vector<std::pair<int, int>> tasks;
  std::vector<std::vector<Result>> results(grid.size());
  for (std::size_t p = 0; p < grid.size(); ++p) {
    results[p].resize(grid[p].seeds.size());
    for (std::size_t s = 0; s < grid[p].seeds.size(); ++s) tasks.emplace_back(p, s);
  }
  parallel_for(static_cast<int>(tasks.size()), jobs, [&](int i) {
    const auto [p, s] = tasks[i];
    results[p][s] = fn(grid[p], prepared[p], grid[p].seeds[s]);
  });
  return results;
}

std::vector<Prepared> prepare_all(const std::vector<ExperimentConfig>& grid, int jobs) {
  std::vector<Prepared> prepared(grid.size());
  parallel_for(static_cast<int>(grid.size()), jobs, [&](int p) { prepared[p] = prepare(grid[p]); });
  return prepared;
}

void reject_sweeps(const ExperimentConfig& c, const char* command) {
  if (!c.sweep_Q.empty() || !c.sweep_topology.empty() || !c.sweep_c.empty() || !c.sweep_m.empty() ||
      !c.sweep_b.empty()) {
    throw ConfigError(fmt::format("sweep_* keys are not used by '{}'; use 'sweep' or 'stability'", command));
  }
}

std::string provenance_string(const BoundReport& r) {
  std::string out;
  for (const auto& [symbol, tag] : r.provenance) {
    out += fmt::format("{}{}:{}", out.empty() ? "" : ";", symbol, to_string(tag));
  }
  return out;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char ch : s) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return quoted + "\"";
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << contents;
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw std::runtime_error("write failed for " + tmp);
    }
  }
  std::filesystem::rename(tmp, path);
}

int cmd_run(const CommandOptions& options, std::ostream& out, std::ostream&) {
  const ExperimentConfig config = load_for(options);
  reject_sweeps(config, "run");
  const std::vector<ExperimentConfig> grid{config};
  const auto prepared = prepare_all(grid, options.jobs);
  const auto results = run_grid<Trajectory>(grid, prepared, options.jobs, run_seed);

  std::map<std::filesystem::path, std::string> files;
  for (std::size_t s = 0; s < config.seeds.size(); ++s) {
    const auto seed = config.seeds[s];
    files[options.out_dir / fmt::format("run_seed{}.csv", seed)] =
        records_csv(with_seed(config, seed), results[0][s].records);
  }
  files[options.out_dir / "aggregate.csv"] = resolved_block(config) + kAggregateHeader + "\n" +
                                             format_aggregate_row(aggregate(config, "dsgd_mgs", results[0])) + "\n";
  for (const auto& [path, text] : files) write_file_atomic(path, text);
  out << fmt::format("wrote {} files to {}\n", files.size(), options.out_dir.string());
  return kExitOk;
}

int cmd_stability(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  const ExperimentConfig config = load_for(options);
  const auto grid = expand_grid(config);
  const auto prepared = prepare_all(grid, options.jobs);
  const auto results = run_grid<StabilityResult>(grid, prepared, options.jobs, run_stability);

  std::map<std::filesystem::path, std::string> files;
  std::string summary = resolved_block(config) +
                        "point,topology,Q,c,m,n,b,seed,agent,index,onset,final_weight_distance,exponent,fit_points\n";
  std::string by_point = resolved_block(config) +
                         "point,topology,Q,c,m,n,b,seeds,final_wd_mean,final_wd_sd,exponent_mean,exponent_sd,q_trend\n";
  std::vector<Summary> finals(grid.size());
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const auto& g = grid[p];
    std::vector<double> final_wd, exponents;
    for (std::size_t s = 0; s < g.seeds.size(); ++s) {
      const auto& r = results[p][s];
      files[options.out_dir / fmt::format("stability_{}_seed{}.csv", point_tag(g), r.seed)] =
          records_csv(with_seed(g, r.seed), r.run.base.records);
      final_wd.push_back(r.run.distances.back());
      if (r.fit) exponents.push_back(r.fit->exponent);
      summary += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{:.17g},{},{}\n", p, g.topology, g.Q, g.c, g.m, g.n,
                             g.batch, r.seed, r.run.agent + 1, r.run.position + 1, r.run.onset, final_wd.back(),
                             r.fit ? fmt::format("{:.17g}", r.fit->exponent) : std::string(),
                             r.fit ? r.fit->points : 0);
    }
    finals[p] = summarize(final_wd);
    const Summary e = summarize(exponents);
    // Compare with the previous Q of the same (topology, m, c, b) group.
    std::string trend;
    for (std::size_t prev = p; prev-- > 0;) {
      const auto& o = grid[prev];
      if (o.topology == g.topology && o.m == g.m && o.c == g.c && o.batch == g.batch && o.Q < g.Q) {
        trend = finals[p].mean <= finals[prev].mean ? "ok" : "violated";
        if (trend == "violated") {
          err << fmt::format("warning: mean final weight distance rises from Q={} to Q={} ({})\n", o.Q, g.Q,
                             point_tag(g));
        }
        break;
      }
    }
    by_point += fmt::format("{},{},{},{},{},{},{},{},{:.17g},{:.17g},{},{},{}\n", p, g.topology, g.Q, g.c, g.m, g.n,
                            g.batch, g.seeds.size(), finals[p].mean, finals[p].sd,
                            exponents.empty() ? std::string() : fmt::format("{:.17g}", e.mean),
                            exponents.empty() ? std::string() : fmt::format("{:.17g}", e.sd), trend);
  }
  files[options.out_dir / "summary.csv"] = summary;
  files[options.out_dir / "summary_by_point.csv"] = by_point;
  for (const auto& [path, text] : files) write_file_atomic(path, text);
  out << fmt::format("wrote {} files to {}\n", files.size(), options.out_dir.string());
  return kExitOk;
}

int cmd_sweep(const CommandOptions& options, std::ostream& out, std::ostream&) {
  const ExperimentConfig config = load_for(options);
  const auto grid = expand_grid(config);
  const auto prepared = prepare_all(grid, options.jobs);
  const auto results = run_grid<Trajectory>(grid, prepared, options.jobs, run_seed);

  // One centralized baseline per distinct (m, n, c, b).
  std::vector<ExperimentConfig> central_grid;
  std::vector<Prepared> central_prepared;
  if (config.include_centralized) {
    for (std::size_t p = 0; p < grid.size(); ++p) {
      const auto& g = grid[p];
      const bool seen = std::any_of(central_grid.begin(), central_grid.end(), [&](const ExperimentConfig& o) {
        return o.m == g.m && o.n == g.n && o.c == g.c && o.batch == g.batch;
      });
      if (!seen) {
        central_grid.push_back(g);
        central_prepared.push_back(prepared[p]);
      }
    }
  }
  const auto central = run_grid<Trajectory>(central_grid, central_prepared, options.jobs, run_centralized);

  std::map<std::filesystem::path, std::string> files;
  std::string table = resolved_block(config) + kAggregateHeader + "\n";
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (std::size_t s = 0; s < grid[p].seeds.size(); ++s) {
      const auto seed = grid[p].seeds[s];
      files[options.out_dir / fmt::format("sweep_{}_seed{}.csv", point_tag(grid[p]), seed)] =
          records_csv(with_seed(grid[p], seed), results[p][s].records);
    }
    table += format_aggregate_row(aggregate(grid[p], "dsgd_mgs", results[p])) + "\n";
  }
  for (std::size_t p = 0; p < central_grid.size(); ++p) {
    AggregateRow row = aggregate(central_grid[p], "centralized", central[p]);
    row.topology = "centralized";
    row.Q.reset();
    table += format_aggregate_row(row) + "\n";
  }
  files[options.out_dir / "sweep.csv"] = table;
  for (const auto& [path, text] : files) write_file_atomic(path, text);
  out << fmt::format("wrote {} files to {}\n", files.size(), options.out_dir.string());
  return kExitOk;
}

std::vector<BoundRow> bounds_table(const BoundsFile& file) {
  const BoundInputs& in = file.inputs;
  std::vector<BoundRow> rows;
  const auto attempt = [&](const std::string& name, auto&& fn) {
    BoundRow row;
    row.bound = name;
    try {
      BoundReport r = fn();
      row.value = r.value;
      row.status = "ok";
      row.provenance = provenance_string(r);
      row.notes = r.notes;
    } catch (const PlViolationError&) {
      row.status = "PL fails";
    } catch (const std::exception& e) {
      row.status = std::string("undefined: ") + e.what();
    }
    rows.push_back(std::move(row));
  };

  const BoundReport gb = gbar_bound(in.sigma2, in.xi2, in.beta, file.rs_last);
  const double gbar = file.gbar.value_or(gb.value);
  const char* gbar_source = file.gbar ? "Gbar measured" : "Gbar from gbar bound";

  attempt("stability", [&] {
    BoundInputs local = in;
    std::string note;
    if (!local.t0) {
      const double gamma = in.gamma ? *in.gamma : optimal_gamma(in, gbar);
      local.t0 = std::clamp(optimal_t0(in, gamma), 1.0, in.T);
      note = fmt::format("t0={:.6g} closed form", *local.t0);
    }
    BoundReport r = stability_bound(local);
    r.notes = note;
    return r;
  });
  attempt("gbar", [&] { return gb; });
  attempt("optimization_proxy", [&] { return optimization_bound_proxy(in); });
  attempt("q0_threshold", [&] {
    const Q0Result q = q0_threshold(in);
    BoundReport r;
    r.value = q.q0;
    r.provenance = {{"delta", Provenance::exact}, {"lambda_max", Provenance::exact}, {"mu", Provenance::exact},
                    {"value", Provenance::exact}};
    for (auto& [symbol, tag] : r.provenance)
      if (in.estimated.count(symbol)) tag = Provenance::estimated;
    r.notes = fmt::format("gamma_tilde={:.17g}", q.gamma_tilde);
    return r;
  });
  attempt("generalization", [&] {
    BoundReport r = generalization_bound(in, gbar);
    r.notes = gbar_source;
    if (in.t0 && in.gamma) {
      r.notes += fmt::format("; lemma bound at t0={:.6g} gamma={:.6g}: {:.17g}", *in.t0, *in.gamma,
                             lemma_tradeoff_bound(in, gbar, *in.t0, *in.gamma));
    }
    return r;
  });
  attempt("minibatch_generalization", [&] {
    BoundReport r = minibatch_generalization_bound(in, gbar);
    r.notes = gbar_source;
    return r;
  });
  attempt("excess", [&] { return excess_bound(in, gbar); });
  attempt("centralized_reference", [&] { return centralized_reference_bound(in.c, in.beta, in.n, in.m, in.T); });
  return rows;
}

int cmd_bounds(const CommandOptions& options, std::ostream& out, std::ostream&) {
  std::ifstream in(options.config);
  if (!in) throw ConfigError("cannot open bound inputs " + options.config.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const BoundsFile file = parse_bounds_file(ss.str(), options.config.string());

  std::string table = std::string(kBoundsHeader) + "\n";
  for (const auto& row : bounds_table(file)) {
    table += fmt::format("{},{},{},{},{}\n", row.bound, row.value ? fmt::format("{:.17g}", *row.value) : "",
                         csv_cell(row.status), csv_cell(row.provenance), csv_cell(row.notes));
  }
  if (options.out_dir.empty() || options.out_dir == ".") {
    out << table;
  } else {
    write_file_atomic(options.out_dir / "bounds.csv", table);
    out << fmt::format("wrote {}\n", (options.out_dir / "bounds.csv").string());
  }
  return kExitOk;
}

int cmd_validate(const std::filesystem::path& matrix, std::ostream& out, std::ostream&) {
  Matrix w;
  try {
    w = read_matrix_csv(matrix);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  const GossipDiagnostics report = validate_gossip_matrix(w);
  out << report.to_string();
  if (report.all_passed()) {
    const SpectralReport s = spectral_quantities(w);
    out << fmt::format("rho={:.17g} delta={:.17g} lambda_max_I_minus_W={:.17g}\n", s.rho, s.delta,
                       s.lambda_max_I_minus_W);
  }
  return report.all_passed() ? kExitOk : kExitRuntime;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Decentralized SGD with multiple gossip steps: simulator and bound tables", "mgs"};
  app.require_subcommand(1);

  CommandOptions options;
  std::string seeds;
  std::string matrix_path;
  const auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", options.config, "configuration file");
    if (needs_config) opt->required();
    sub->add_option("--out", options.out_dir, "output directory");
    sub->add_option("--seeds", seeds, "comma-separated seed list overriding the config");
    sub->add_option("--jobs", options.jobs, "worker threads")->check(CLI::PositiveNumber);
  };
  auto* run = app.add_subcommand("run", "run DSGD-MGS for every seed");
  add_common(run, true);
  auto* stability = app.add_subcommand("stability", "coupled runs on S and a one-sample perturbation");
  add_common(stability, true);
  auto* sweep = app.add_subcommand("sweep", "grid over the sweep lists with a centralized baseline");
  add_common(sweep, true);
  auto* bounds = app.add_subcommand("bounds", "evaluate the bound table from a key=value inputs file");
  add_common(bounds, false);
  bounds->add_option("inputs", matrix_path, "bound inputs file");
  auto* validate = app.add_subcommand("validate", "check a gossip matrix CSV");
  validate->add_option("matrix", matrix_path, "matrix CSV")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (const auto& s : split_list(seeds)) {
      std::uint64_t v = 0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("--seeds: cannot parse '" + s + "'");
      options.seeds.push_back(v);
    }
    if (*run) return cmd_run(options, out, err);
    if (*stability) return cmd_stability(options, out, err);
    if (*sweep) return cmd_sweep(options, out, err);
    if (*bounds) {
      if (options.config.empty()) options.config = matrix_path;
      if (options.config.empty()) throw ConfigError("bounds: no inputs file given");
      return cmd_bounds(options, out, err);
    }
    return cmd_validate(matrix_path, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace mgs
