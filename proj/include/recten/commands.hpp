#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "recten/ingest.hpp"
#include "recten/recten.hpp"
#include "recten/synthgen.hpp"

namespace recten {

/// Bad or missing command-line input; the CLI exits with status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Write to `path` + ".tmp" and rename over `path`, so readers never see a
/// partial file. Throws std::runtime_error.
void write_file_atomic(const std::string& path, const std::string& content);

struct DecomposeOptions {
  std::string input_events;
  std::string input_tensor;
  EventSchema schema;
  RecTenParams params;
  std::string output;
  std::string html;
  bool timestamps = true;
};

struct SynthOptions {
  std::string kind;  // flat | hier
  std::string out;
  std::string labels;
  std::string truth_tree;
  double noise = 0.0;
  std::uint64_t seed = 42;
  FlatParams flat;
  HierParams hier;
};

struct EvalOptions {
  std::string tree;
  std::string labels;
  std::string truth_tree;
  /// Subset of tp, ri, ted.
  std::vector<std::string> metrics{"tp", "ri", "ted"};
  std::string csv;
  /// Tensor whose unlabeled cells join the universe as their own class.
  std::string include_unlabeled_from;
};

struct SweepOptions {
  std::string param;  // epsilon | k | lambda | noise
  std::string grid;   // lo:hi:step
  int repeats = 5;
  std::string generator = "hier";  // hier | flat
  RecTenParams params;
  double noise = 0.0;
  std::string output;
  std::string medians;
};

/// Parsed "lo:hi:step" grid, endpoints included. Throws UsageError.
std::vector<double> parse_grid(const std::string& spec);

struct SweepRow {
  double value = 0.0;
  std::uint64_t seed = 0;
  double tp = 0.0;
  double ri = 0.0;
  std::size_t ted = 0;
  std::vector<std::size_t> level_counts;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepMedian {
  double value = 0.0;
  double tp = 0.0;
  double ri = 0.0;
  double ted = 0.0;
};

/// Runs every (grid value, repeat) pair. Repeat r uses the same generated
/// tensor at every grid value, so the grid points are paired.
std::vector<SweepRow> run_sweep(const SweepOptions& opts);
std::vector<SweepMedian> sweep_medians(const std::vector<SweepRow>& rows);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string medians_csv(const std::vector<SweepMedian>& medians);

/// Subcommands. Return an exit code; UsageError and runtime failures are
/// reported on `err` and mapped to kExitUsage / kExitRuntime.
int cmd_decompose(const DecomposeOptions& opts, std::ostream& out, std::ostream& err);
int cmd_synth(const SynthOptions& opts, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err);
int cmd_sweep(const SweepOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace recten
