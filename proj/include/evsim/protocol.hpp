#pragma once

#include "evsim/facility.hpp"
#include "evsim/kernel.hpp"
#include "evsim/scenario.hpp"
#include "evsim/signals.hpp"

#include <optional>
#include <string>
#include <vector>

namespace evsim {

enum class ColumnOpState { Idle, Handshake, Charging };
const char* to_string(ColumnOpState state);

struct StateLogEntry {
    SimTime time_s = 0.0;
    ColumnOpState state = ColumnOpState::Idle;
};

/// A connected vehicle as seen by the selection rules.
struct ConnectedEv {
    int ev = -1;
    SimTime t_connect = 0.0;
};

/// FCFS rule: earliest connection time wins, ties broken by vehicle id.
std::optional<int> select_fcfs(const std::vector<ConnectedEv>& candidates);

/// Round-robin cursor: the (t_connect, ev) key of the vehicle served last.
struct ShrdCursor {
    bool valid = false;
    SimTime t_connect = 0.0;
    int ev = -1;
};

/// SHRD rule: the next vehicle after the cursor in cyclic
/// (t_connect, ev) order. Satisfied or departed vehicles must already be
/// absent from `cycle`. Returns the selection and the advanced cursor.
std::pair<std::optional<int>, ShrdCursor> select_shrd(const std::vector<ConnectedEv>& cycle,
                                                      ShrdCursor cursor);

/// One vehicle's realized timeline.
struct EVTrace {
    int ev = -1;
    SimTime t_arr = 0.0;
    std::optional<SimTime> t_connect;
    std::optional<int> column;
    std::vector<PowerEpisode> episodes;
    double energy_delivered_ws = 0.0;
    SimTime t_leave = 0.0;
    bool served = false;    // received a port
    bool completed = false; // full energy demand delivered
    double cost = 0.0;
};

/// Settlement on leave: delivered energy and its cost under the price signal.
std::pair<double, double> settle(const EVTrace& trace, const TimeSeries& prices);

struct ColumnResult {
    int id = -1;
    ColumnKind kind = ColumnKind::FCC;
    double rating_watts = 0.0;
    std::vector<StateLogEntry> state_log; // starts (0, Idle)
};

struct EventLogEntry {
    SimTime time_s = 0.0;
    std::string entity;
    std::string kind;
    std::string detail;
};

/// Everything a single run produces, shared schema between the event-driven
/// engine and the time-stepped reference simulator.
struct SimResult {
    ScenarioConfig config;
    std::vector<EVSpec> fleet;
    std::vector<EVTrace> traces;          // by ev id
    std::vector<ColumnResult> columns;    // by column id
    std::vector<EsTracePoint> es_trace;
    std::vector<PowerRequest> request_log;
    std::vector<EventLogEntry> events;
};

/// Execute one scenario on the event calendar. Deterministic per
/// (config, fleet); the price series only enters settlement.
SimResult run_simulation(const ScenarioConfig& config, const std::vector<EVSpec>& fleet,
                         const TimeSeries& prices);

/// Convenience: sample the fleet from the seed, then run.
SimResult run_simulation(const ScenarioConfig& config, std::uint64_t seed,
                         const TimeSeries& prices);

} // namespace evsim
