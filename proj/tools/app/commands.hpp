#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace aspectkit::app {

// Each command reads its inputs from the config, writes its artifacts and a
// one-line summary to `log`, and reports failure by throwing.
void cmd_ingest(const RunConfig& cfg, std::ostream& log);
void cmd_vocab(const RunConfig& cfg, std::ostream& log);
void cmd_extract(const RunConfig& cfg, std::ostream& log);
void cmd_metrics(const RunConfig& cfg, std::ostream& log);
void cmd_rec_train(const RunConfig& cfg, std::ostream& log);
void cmd_rec_eval(const RunConfig& cfg, std::ostream& log);
void cmd_rec_stratified(const RunConfig& cfg, std::ostream& log);
void cmd_cer(const RunConfig& cfg, std::ostream& log);
void cmd_synth(const RunConfig& cfg, std::ostream& log);

void run_command(Command command, const RunConfig& cfg, std::ostream& log);

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitInput = 3,
  kExitBackend = 4,
  kExitMetric = 5,
  kExitCheckpoint = 6,
  kExitCheckMismatch = 7,
};

/// Parses `args` (without the program name), runs the selected command and
/// returns its exit code. Diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace aspectkit::app
