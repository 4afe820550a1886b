#pragma once

#include <filesystem>

#include "cgsim/sim_engine.hpp"

namespace cgsim {

/// Writes metrics.csv (one row per UE per replication plus one aggregate row
/// per UE), summary.json, and latency_cdf.csv under `out_dir`. Column order
/// is fixed; identical inputs produce byte-identical files.
void export_report(const MetricsReport& report,
                   const std::filesystem::path& out_dir);

std::string render_metrics_csv(const MetricsReport& report);
std::string render_summary_json(const MetricsReport& report);
std::string render_latency_cdf_csv(const MetricsReport& report);

}  // namespace cgsim
