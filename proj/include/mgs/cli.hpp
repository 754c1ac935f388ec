#pragma once

#include "mgs/config.hpp"
#include "mgs/experiment.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mgs {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `mgs` tool. Subcommands: run, stability, sweep, bounds, validate.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct CommandOptions {
  std::filesystem::path config;
  std::filesystem::path out_dir = ".";
  std::vector<std::uint64_t> seeds;  // empty: use the config's list
  int jobs = 1;
};

int cmd_run(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_stability(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_bounds(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_validate(const std::filesystem::path& matrix, std::ostream& out, std::ostream& err);

struct BoundRow {
  std::string bound;
  std::optional<double> value;
  std::string status;  // "ok", "PL fails" or an error message
  std::string provenance;
  std::string notes;
};

inline constexpr const char* kBoundsHeader = "bound,value,status,provenance,notes";

/// The eight rows of the bounds table.
std::vector<BoundRow> bounds_table(const BoundsFile& file);

/// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace mgs
