#pragma once

#include "evsim/kernel.hpp"

#include <limits>
#include <string>
#include <vector>

namespace evsim {

enum class ColumnKind { FCC, SCC };
enum class Strategy { FCFS, SHRD };

constexpr double kFccRatingWatts = 48'000.0;
constexpr double kSccRatingWatts = 11'000.0;

double rating_watts(ColumnKind kind);
const char* to_string(ColumnKind kind);
const char* to_string(Strategy strategy);
Strategy strategy_from_string(const std::string& s);

/// Unbounded waiting tolerance sentinel.
constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// Full scenario parameterization. Defaults reproduce the average-employee
/// workplace use case: morning arrivals, ~full-working-day parking, and a
/// commute-sized energy deficit.
struct ScenarioConfig {
    int ev_count = 30;
    int fcc_count = 30;
    int scc_count = 0;
    int ports_per_column = 4;
    Strategy strategy = Strategy::FCFS;
    double es_cap_watts = 1'000'000.0;

    SimTime arrival_window_start_s = 6.0 * 3600.0;
    SimTime arrival_window_end_s = 8.0 * 3600.0;
    double commute_km = 26.0; // informational provenance of the demand range
    double energy_demand_lo_ws = 9.0 * 3'600'000.0;
    double energy_demand_hi_ws = 10.0 * 3'600'000.0;
    double parking_lo_s = 8.0 * 3600.0;
    double parking_hi_s = 9.0 * 3600.0;
    double waiting_tolerance_s = kUnbounded;
    double handshake_s = 32.0;
    double price_interval_s = 900.0;
    double ev_max_accept_watts = 150'000.0;
    double horizon_s = 86'400.0;

    int column_count() const { return fcc_count + scc_count; }

    /// Throws ConfigError on any violated invariant.
    void validate() const;
};

/// One vehicle's sampled parameters.
struct EVSpec {
    int id = 0;
    SimTime entrance_delay_s = 0.0; // arrival time = start + entrance delay
    double waiting_tolerance_s = kUnbounded;
    double parking_duration_s = 0.0;
    double energy_required_ws = 0.0;
    double max_accept_watts = 0.0;

    SimTime arrival_s() const { return entrance_delay_s; }
};

struct ColumnSpec {
    int id = 0;
    ColumnKind kind = ColumnKind::FCC;
    double rating_watts = kFccRatingWatts;
    int ports = 4;
};

struct FacilityLayout {
    std::vector<ColumnSpec> columns;
    double es_cap_watts = 0.0;
};

/// Sample the fleet. Every stochastic quantity is drawn i.i.d. uniform over
/// its configured range from a per-EV stream, so the fleet is invariant to
/// the column layout and to any instrumentation added elsewhere.
std::vector<EVSpec> sample_fleet(const ScenarioConfig& config, std::uint64_t rng_root);

FacilityLayout build_facility(const ScenarioConfig& config);

/// JSON (de)serialization of the run-configuration file. Parsing accepts a
/// partial document and overrides only the fields present; unknown keys are
/// configuration errors.
ScenarioConfig scenario_from_json_text(const std::string& text, ScenarioConfig base = {});
ScenarioConfig scenario_from_json_file(const std::string& path, ScenarioConfig base = {});
std::string scenario_to_json_text(const ScenarioConfig& config);

} // namespace evsim
