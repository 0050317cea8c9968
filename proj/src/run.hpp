#ifndef HVF_RUN_HPP
#define HVF_RUN_HPP

#include "config.hpp"

#include <map>
#include <string>

namespace hvf {

struct RunResult {
  int exit_code = 0;  // 0 pass, 1 margin failure, 2 config error, 3 numerical failure
  std::map<std::string, std::string> artifacts;  // filename -> content
  std::string message;                           // diagnostics for nonzero exits
};

// Execute the requested stages. All artifacts are built in memory; nothing is
// written here, so failed runs leave no partial files behind.
RunResult run_experiment(const ExperimentConfig& cfg);

// Convenience wrapper: parse, run, and (when exit code is 0 or 1) write the
// artifacts under out_dir.
RunResult run_config_text(const std::string& config_json, const std::string& out_dir);

}  // namespace hvf

#endif
