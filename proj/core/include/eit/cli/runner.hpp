#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "eit/cli/config.hpp"

namespace eit::cli {

enum ExitCode : int {
  kSuccess = 0,
  kFailure = 1,
  kConfigError = 2,
  kNumericalError = 3,
  kCheckFailed = 4,
};

struct RunFlags {
  std::optional<std::vector<double>> theta;
  std::string out;
  std::string sensitivity;
  std::string dump_stiffness;
  std::string data;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;
  std::optional<int> iters;
  std::optional<int> burnin;
  std::optional<int> thin;
  std::optional<int> pairs;
  int jobs = 0;  // 0: EIT_JOBS or hardware concurrency
  bool check = false;
};

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"forward",  "simulate", "mcmc",      "bvm",  "coverage",
                                              "rate",     "stability", "delta",    "mesh"};
  return names;
}

int resolve_jobs(int requested);

// Executes one subcommand. Artifacts go to config.out_dir (or the paths in
// flags), reports to `out`; failures print one JSON line to `err` and map to
// the ExitCode values.
int run(const std::string& subcommand, const ExperimentConfig& config, const RunFlags& flags,
        std::ostream& out, std::ostream& err);

}  // namespace eit::cli
