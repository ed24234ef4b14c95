#pragma once

#include "evsim/protocol.hpp"

#include <optional>
#include <string>
#include <vector>

namespace evsim {

/// Fixed-increment reference simulator configuration.
struct StepConfig {
    double dt_s = 1.0;
    std::uint64_t max_steps = 0;   // 0 = derived from the scenario horizon
    bool require_alignment = false; // insist dt divides handshake and price interval
};

/// Brutally simple fixed-time-step simulation of the same scenario. Reuses
/// the selection and grant rules of the event-driven engine and differs only
/// in how time advances; energy is accrued in full watts*dt quanta, so
/// delivered energy may overshoot demand by up to one step.
SimResult simulate_timestep(const ScenarioConfig& config, const std::vector<EVSpec>& fleet,
                            const TimeSeries& prices, const StepConfig& step);

struct ComparisonRow {
    int ev = -1;
    double energy_event_ws = 0.0;
    double energy_step_ws = 0.0;
    double energy_delta_ws = 0.0;
    std::optional<double> ttr_event_s;
    std::optional<double> ttr_step_s;
    double ttr_delta_s = 0.0; // 0 when absent in both
    bool ttr_mismatch = false; // present in exactly one engine
};

struct ComparisonReport {
    double dt_s = 0.0;
    std::vector<ComparisonRow> rows;
    double max_energy_delta_ws = 0.0;
    double max_ttr_delta_s = 0.0;
    bool any_ttr_mismatch = false;
    double peak_event_w = 0.0;
    double peak_step_w = 0.0;
    double peak_delta_w = 0.0;
    double wall_event_s = 0.0; // filled by the caller that timed the runs
    double wall_step_s = 0.0;

    double wall_ratio() const { return wall_event_s > 0.0 ? wall_step_s / wall_event_s : 0.0; }
};

/// Per-vehicle and facility-level deltas between the two engines on the
/// same scenario and seed.
ComparisonReport compare_traces(const SimResult& event_driven, const SimResult& time_stepped,
                                double dt_s, double e_star_ws = 33'696'000.0);

std::string comparison_text(const ComparisonReport& report);

} // namespace evsim
