#include "evsim/scenario.hpp"

#include "evsim/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace evsim {

namespace {

// Stream purposes for per-EV sampling.
enum : std::uint64_t { kPurposeEntrance = 1, kPurposeParking = 2, kPurposeEnergy = 3 };

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

} // namespace

double rating_watts(ColumnKind kind) {
    return kind == ColumnKind::FCC ? kFccRatingWatts : kSccRatingWatts;
}

const char* to_string(ColumnKind kind) {
    return kind == ColumnKind::FCC ? "FCC" : "SCC";
}

const char* to_string(Strategy strategy) {
    return strategy == Strategy::FCFS ? "FCFS" : "SHRD";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "FCFS" || s == "fcfs") return Strategy::FCFS;
    if (s == "SHRD" || s == "shrd") return Strategy::SHRD;
    throw ConfigError("unknown strategy '" + s + "' (expected FCFS or SHRD)");
}

void ScenarioConfig::validate() const {
    require(ev_count > 0, "ev_count must be positive");
    require(fcc_count >= 0 && scc_count >= 0, "column counts must be nonnegative");
    require(column_count() >= 1, "at least one charging column is required");
    require(ports_per_column >= 1, "ports_per_column must be >= 1");
    require(es_cap_watts > 0.0, "es_cap_watts must be positive");
    require(arrival_window_start_s <= arrival_window_end_s, "arrival window has start > end");
    require(arrival_window_start_s >= 0.0 && arrival_window_end_s <= horizon_s,
            "arrival window must lie within [0, horizon]");
    require(energy_demand_lo_ws <= energy_demand_hi_ws, "energy demand range has lo > hi");
    require(energy_demand_lo_ws > 0.0, "energy demand must be positive");
    require(parking_lo_s <= parking_hi_s, "parking range has lo > hi");
    require(parking_lo_s >= 0.0, "parking duration must be nonnegative");
    require(waiting_tolerance_s >= 0.0, "waiting tolerance must be nonnegative");
    require(handshake_s >= 0.0, "handshake duration must be nonnegative");
    require(price_interval_s > 0.0, "price interval must be positive");
    require(ev_max_accept_watts > 0.0, "ev_max_accept_watts must be positive");
    require(horizon_s > 0.0, "horizon must be positive");
}

std::vector<EVSpec> sample_fleet(const ScenarioConfig& config, std::uint64_t rng_root) {
    config.validate();
    std::vector<EVSpec> fleet;
    fleet.reserve(static_cast<std::size_t>(config.ev_count));
    for (int i = 0; i < config.ev_count; ++i) {
        const auto agent = static_cast<std::uint64_t>(i);
        EVSpec ev;
        ev.id = i;
        ev.entrance_delay_s = RngStream(rng_root, {0, 0, agent, kPurposeEntrance})
                                  .uniform(config.arrival_window_start_s, config.arrival_window_end_s);
        ev.parking_duration_s = RngStream(rng_root, {0, 0, agent, kPurposeParking})
                                    .uniform(config.parking_lo_s, config.parking_hi_s);
        ev.energy_required_ws = RngStream(rng_root, {0, 0, agent, kPurposeEnergy})
                                    .uniform(config.energy_demand_lo_ws, config.energy_demand_hi_ws);
        ev.waiting_tolerance_s = config.waiting_tolerance_s;
        ev.max_accept_watts = config.ev_max_accept_watts;
        fleet.push_back(ev);
    }
    return fleet;
}

FacilityLayout build_facility(const ScenarioConfig& config) {
    config.validate();
    FacilityLayout layout;
    layout.es_cap_watts = config.es_cap_watts;
    layout.columns.reserve(static_cast<std::size_t>(config.column_count()));
    for (int i = 0; i < config.column_count(); ++i) {
        ColumnSpec col;
        col.id = i;
        col.kind = i < config.fcc_count ? ColumnKind::FCC : ColumnKind::SCC;
        col.rating_watts = rating_watts(col.kind);
        col.ports = config.ports_per_column;
        layout.columns.push_back(col);
    }
    return layout;
}

namespace {

using nlohmann::json;

double waiting_from_json(const json& v) {
    if (v.is_null()) return kUnbounded;
    if (v.is_string() && (v == "unbounded" || v == "inf")) return kUnbounded;
    if (v.is_number()) return v.get<double>();
    throw ConfigError("waiting_tolerance_s must be a number, null, or \"unbounded\"");
}

} // namespace

ScenarioConfig scenario_from_json_text(const std::string& text, ScenarioConfig base) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config file must contain a JSON object");

    for (const auto& [key, value] : doc.items()) {
        if (key == "ev_count") base.ev_count = value.get<int>();
        else if (key == "fcc_count") base.fcc_count = value.get<int>();
        else if (key == "scc_count") base.scc_count = value.get<int>();
        else if (key == "ports_per_column") base.ports_per_column = value.get<int>();
        else if (key == "strategy") base.strategy = strategy_from_string(value.get<std::string>());
        else if (key == "es_cap_watts") base.es_cap_watts = value.get<double>();
        else if (key == "arrival_window_start_s") base.arrival_window_start_s = value.get<double>();
        else if (key == "arrival_window_end_s") base.arrival_window_end_s = value.get<double>();
        else if (key == "commute_km") base.commute_km = value.get<double>();
        else if (key == "energy_demand_lo_ws") base.energy_demand_lo_ws = value.get<double>();
        else if (key == "energy_demand_hi_ws") base.energy_demand_hi_ws = value.get<double>();
        else if (key == "parking_lo_s") base.parking_lo_s = value.get<double>();
        else if (key == "parking_hi_s") base.parking_hi_s = value.get<double>();
        else if (key == "waiting_tolerance_s") base.waiting_tolerance_s = waiting_from_json(value);
        else if (key == "handshake_s") base.handshake_s = value.get<double>();
        else if (key == "price_interval_s") base.price_interval_s = value.get<double>();
        else if (key == "ev_max_accept_watts") base.ev_max_accept_watts = value.get<double>();
        else if (key == "horizon_s") base.horizon_s = value.get<double>();
        else throw ConfigError("unknown config key '" + key + "'");
    }
    base.validate();
    return base;
}

ScenarioConfig scenario_from_json_file(const std::string& path, ScenarioConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return scenario_from_json_text(buf.str(), base);
}

std::string scenario_to_json_text(const ScenarioConfig& config) {
    json doc;
    doc["ev_count"] = config.ev_count;
    doc["fcc_count"] = config.fcc_count;
    doc["scc_count"] = config.scc_count;
    doc["ports_per_column"] = config.ports_per_column;
    doc["strategy"] = to_string(config.strategy);
    doc["es_cap_watts"] = config.es_cap_watts;
    doc["arrival_window_start_s"] = config.arrival_window_start_s;
    doc["arrival_window_end_s"] = config.arrival_window_end_s;
    doc["commute_km"] = config.commute_km;
    doc["energy_demand_lo_ws"] = config.energy_demand_lo_ws;
    doc["energy_demand_hi_ws"] = config.energy_demand_hi_ws;
    doc["parking_lo_s"] = config.parking_lo_s;
    doc["parking_hi_s"] = config.parking_hi_s;
    if (std::isinf(config.waiting_tolerance_s)) {
        doc["waiting_tolerance_s"] = nullptr;
    } else {
        doc["waiting_tolerance_s"] = config.waiting_tolerance_s;
    }
    doc["handshake_s"] = config.handshake_s;
    doc["price_interval_s"] = config.price_interval_s;
    doc["ev_max_accept_watts"] = config.ev_max_accept_watts;
    doc["horizon_s"] = config.horizon_s;
    return doc.dump(2) + "\n";
}

} // namespace evsim
