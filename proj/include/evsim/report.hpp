#pragma once

#include <string>
#include <vector>

namespace evsim {

struct ReportOptions {
    std::string in_dir;   // output tree of a `run`
    std::string out_dir;  // where the SVG figures go
    int overlay_exp = 9;  // experiment whose replication-0 trace feeds the overlay
    double kde_bandwidth_s = 0.0; // <= 0: Silverman-style default
};

/// Render the study figures from a run output tree: TTR distributions per
/// infrastructure type, per-configuration utilization bands, binned power
/// boxplots per fleet size, and the grid/PV/price overlay.
/// Returns the written file paths.
std::vector<std::string> emit_report(const ReportOptions& options);

} // namespace evsim
