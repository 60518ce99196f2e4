#pragma once

#include <iosfwd>
#include <string>

#include "castflow/config.hpp"

namespace castflow::cli {

// Dataset snapshot written by ingest and consumed by every later stage.
struct DatasetSnapshot {
    static void write(const TimeSeries& series, const std::string& path);
    static TimeSeries read(const std::string& path);
};

// Command bodies shared by the CLI binary and the acceptance suite. Each
// writes its artifacts under config.output_dir and reports to `log`.
void cmd_ingest(const RunConfig& config, std::ostream& log);
void cmd_build_library(const RunConfig& config, std::ostream& log);
void cmd_build_memory(const RunConfig& config, std::ostream& log);

struct RunSummary {
    std::size_t windows = 0;
    std::size_t hard_errors = 0;
    double mse = 0;
    double mae = 0;
    double fallback_rate = 0;
};

RunSummary cmd_run(const RunConfig& config, std::ostream& log);

void cmd_export(const RunConfig& config, const std::string& kind, std::ostream& log);

// Computes (gamma, nu) from validation baseline losses and writes them back
// into the config file.
void cmd_calibrate(const RunConfig& config, const std::string& config_path, std::ostream& log);

}  // namespace castflow::cli
