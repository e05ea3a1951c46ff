#pragma once

#include "levyfp/config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace levyfp {

/// One line of summary.csv.
struct SummaryRow {
    std::string stage;
    std::string item;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

struct RunOptions {
    std::optional<std::string> output_dir;  // overrides [output] dir
    std::vector<Stage> stages;              // overrides run = [...] when not empty
};

struct RunResult {
    std::vector<SummaryRow> summary;
    std::vector<std::string> files;   // written, relative to the output directory
    std::vector<std::string> errors;  // one message per failed stage
    bool all_pass() const;
};

/// Runs the requested stages (plus dependencies) in order and writes the
/// per-stage reports and summary.csv. Library errors inside a stage become a
/// failed summary row; stages depending on a failed stage are skipped.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// CLI entry: 0 all pass, 1 stage failure, 2 config error.
int run_command(const std::string& config_path, const RunOptions& options);

}  // namespace levyfp
