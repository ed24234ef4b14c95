#include "evsim/oracle.hpp"

#include "evsim/errors.hpp"
#include "evsim/metrics.hpp"
#include "evsim/strfmt.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace evsim {

namespace {

bool divides(double whole, double dt) {
    const double q = whole / dt;
    return std::abs(q - std::round(q)) < 1e-9;
}

struct StepEv {
    EVSpec spec;
    enum class Phase { NotArrived, Waiting, Connected, Gone } phase = Phase::NotArrived;
    int column = -1;
    SimTime t_connect = 0.0;
    SimTime t_dep = 0.0;
    double delivered_ws = 0.0;
    EVTrace trace;

    double remaining_ws() const { return std::max(0.0, spec.energy_required_ws - delivered_ws); }
};

struct StepColumn {
    ColumnSpec spec;
    std::vector<ConnectedEv> connected;
    ColumnOpState op = ColumnOpState::Idle;
    std::vector<StateLogEntry> state_log{{0.0, ColumnOpState::Idle}};
    ShrdCursor cursor;
    int active_ev = -1;
    int last_charged_ev = -1;
    std::optional<std::uint64_t> pending_request;
    int pending_ev = -1;
    double granted_watts = 0.0;
    SimTime episode_start = 0.0;
    SimTime handshake_end = 0.0;
};

class StepSim {
public:
    StepSim(const ScenarioConfig& config, std::vector<EVSpec> fleet, const TimeSeries& prices,
            const StepConfig& step)
        : config_(config),
          prices_(prices),
          step_(step),
          layout_(build_facility(config)),
          es_(layout_.es_cap_watts),
          ports_(static_cast<int>(layout_.columns.size()), config.ports_per_column) {
        if (step_.dt_s <= 0.0) throw ConfigError("simulate_timestep: dt must be positive");
        if (step_.require_alignment &&
            (!divides(config.handshake_s, step_.dt_s) || !divides(config.price_interval_s, step_.dt_s))) {
            throw ConfigError("simulate_timestep: dt must divide the handshake duration and the "
                              "price interval in exact-alignment mode");
        }
        for (auto& spec : fleet) {
            StepEv ev;
            ev.spec = spec;
            ev.trace.ev = spec.id;
            ev.trace.t_arr = spec.arrival_s();
            evs_.push_back(std::move(ev));
        }
        for (const auto& spec : layout_.columns) {
            StepColumn col;
            col.spec = spec;
            cols_.push_back(std::move(col));
        }
    }

    SimResult run() {
        const std::uint64_t max_steps =
            step_.max_steps > 0
                ? step_.max_steps
                : static_cast<std::uint64_t>(2.0 * (config_.horizon_s + config_.parking_hi_s) /
                                             step_.dt_s) + 16;

        now_ = 0.0;
        process_arrivals();
        process_reneges();
        select_all();

        std::uint64_t k = 0;
        while (!all_gone()) {
            if (++k > max_steps) {
                throw ConfigError("simulate_timestep: step budget exhausted before all vehicles "
                                  "departed (max_steps=" + std::to_string(max_steps) + ")");
            }
            now_ = static_cast<double>(k) * step_.dt_s;
            accrue_and_complete();
            rotate_at_boundary();
            finish_handshakes();
            process_departures();
            process_arrivals();
            process_reneges();
            select_all();
        }

        SimResult result;
        result.config = config_;
        for (auto& ev : evs_) {
            result.fleet.push_back(ev.spec);
            result.traces.push_back(std::move(ev.trace));
        }
        for (auto& col : cols_) {
            result.columns.push_back({col.spec.id, col.spec.kind, col.spec.rating_watts,
                                      std::move(col.state_log)});
        }
        result.es_trace = es_.trace();
        result.request_log = es_.request_log();
        return result;
    }

private:
    bool all_gone() const {
        for (const auto& ev : evs_) {
            if (ev.phase != StepEv::Phase::Gone) return false;
        }
        return true;
    }

    void set_op_state(StepColumn& col, ColumnOpState state) {
        if (col.op == state) return;
        col.op = state;
        col.state_log.push_back({now_, state});
    }

    void end_episode(StepColumn& col, StepEv& ev) {
        ev.trace.episodes.push_back({col.episode_start, now_, col.granted_watts});
        col.active_ev = -1;
        set_op_state(col, ColumnOpState::Idle);
        handle_grants(es_.release(col.spec.id, now_));
    }

    void accrue_and_complete() {
        for (auto& col : cols_) {
            if (col.op != ColumnOpState::Charging) continue;
            StepEv& ev = evs_[static_cast<std::size_t>(col.active_ev)];
            ev.delivered_ws += col.granted_watts * step_.dt_s; // full quantum; may overshoot
            if (ev.delivered_ws >= ev.spec.energy_required_ws) {
                end_episode(col, ev);
            }
        }
    }

    void rotate_at_boundary() {
        if (config_.strategy != Strategy::SHRD) return;
        for (auto& col : cols_) {
            if (col.op != ColumnOpState::Charging) continue;
            // Rotate at the first step on or past the interval boundary.
            if (interval_index(now_, config_.price_interval_s) >
                interval_index(col.episode_start, config_.price_interval_s)) {
                end_episode(col, evs_[static_cast<std::size_t>(col.active_ev)]);
            }
        }
    }

    void finish_handshakes() {
        for (auto& col : cols_) {
            if (col.op != ColumnOpState::Handshake) continue;
            if (col.handshake_end <= now_) start_charging(col);
        }
    }

    void start_charging(StepColumn& col) {
        set_op_state(col, ColumnOpState::Charging);
        col.episode_start = now_;
        col.last_charged_ev = col.active_ev;
    }

    void process_departures() {
        for (auto& ev : evs_) {
            if (ev.phase != StepEv::Phase::Connected || ev.t_dep > now_) continue;
            StepColumn& col = cols_[static_cast<std::size_t>(ev.column)];
            if (col.active_ev == ev.spec.id) {
                if (col.op == ColumnOpState::Charging) {
                    end_episode(col, ev);
                } else {
                    col.active_ev = -1;
                    set_op_state(col, ColumnOpState::Idle);
                    handle_grants(es_.release(col.spec.id, now_));
                }
            } else if (col.pending_request && col.pending_ev == ev.spec.id) {
                auto result = es_.cancel(*col.pending_request, now_);
                col.pending_request.reset();
                col.pending_ev = -1;
                handle_grants(result.unblocked);
            }
            col.connected.erase(std::find_if(col.connected.begin(), col.connected.end(),
                                             [&](const ConnectedEv& c) { return c.ev == ev.spec.id; }));
            finalize(ev, /*served=*/true);
            for (const auto& a : ports_.release(ev.column, ev.spec.id, now_)) {
                connect(evs_[static_cast<std::size_t>(a.ev)], a.column);
            }
        }
    }

    void process_arrivals() {
        for (auto& ev : evs_) {
            if (ev.phase != StepEv::Phase::NotArrived || ev.spec.arrival_s() > now_) continue;
            if (auto col = ports_.try_assign(ev.spec.id, now_)) {
                connect(ev, *col);
            } else {
                ev.phase = StepEv::Phase::Waiting;
                ports_.enqueue_waiter(ev.spec.id);
            }
        }
    }

    void process_reneges() {
        for (auto& ev : evs_) {
            if (ev.phase != StepEv::Phase::Waiting) continue;
            if (!std::isfinite(ev.spec.waiting_tolerance_s)) continue;
            if (now_ >= ev.spec.arrival_s() + ev.spec.waiting_tolerance_s) {
                ports_.remove_waiter(ev.spec.id);
                finalize(ev, /*served=*/false);
            }
        }
    }

    void connect(StepEv& ev, int col_id) {
        StepColumn& col = cols_[static_cast<std::size_t>(col_id)];
        ev.phase = StepEv::Phase::Connected;
        ev.column = col_id;
        ev.t_connect = now_;
        ev.t_dep = now_ + ev.spec.parking_duration_s;
        ev.trace.t_connect = now_;
        ev.trace.column = col_id;
        ConnectedEv entry{ev.spec.id, now_};
        auto pos = std::upper_bound(col.connected.begin(), col.connected.end(), entry,
                                    [](const ConnectedEv& a, const ConnectedEv& b) {
                                        if (a.t_connect != b.t_connect) return a.t_connect < b.t_connect;
                                        return a.ev < b.ev;
                                    });
        col.connected.insert(pos, entry);
    }

    void finalize(StepEv& ev, bool served) {
        ev.phase = StepEv::Phase::Gone;
        ev.trace.served = served;
        ev.trace.t_leave = now_;
        ev.trace.completed = served && ev.delivered_ws >= ev.spec.energy_required_ws;
        ev.trace.energy_delivered_ws = ev.delivered_ws;
        ev.trace.cost = settle(ev.trace, prices_).second;
    }

    void handle_grants(const std::vector<PowerRequest>& grants) {
        for (const auto& req : grants) {
            StepColumn& col = cols_[static_cast<std::size_t>(req.column)];
            col.pending_request.reset();
            col.pending_ev = -1;
            begin_service(col, req.ev, req.watts);
        }
    }

    void begin_service(StepColumn& col, int ev_id, double watts) {
        col.active_ev = ev_id;
        col.granted_watts = watts;
        if (ev_id != col.last_charged_ev) {
            set_op_state(col, ColumnOpState::Handshake);
            col.handshake_end = now_ + config_.handshake_s;
        } else {
            start_charging(col);
        }
    }

    void select_all() {
        for (auto& col : cols_) {
            if (col.op != ColumnOpState::Idle || col.pending_request) continue;
            std::vector<ConnectedEv> cands;
            for (const auto& c : col.connected) {
                if (evs_[static_cast<std::size_t>(c.ev)].remaining_ws() > 0.0) cands.push_back(c);
            }
            std::optional<int> pick;
            if (config_.strategy == Strategy::FCFS) {
                pick = select_fcfs(cands);
            } else {
                auto [sel, cursor] = select_shrd(cands, col.cursor);
                pick = sel;
                if (sel) col.cursor = cursor;
            }
            if (!pick) continue;
            const StepEv& ev = evs_[static_cast<std::size_t>(*pick)];
            const double watts = requested_power(col.spec.rating_watts, ev.spec.max_accept_watts);
            auto outcome = es_.request(col.spec.id, *pick, watts, now_);
            if (outcome.granted) {
                begin_service(col, *pick, watts);
            } else {
                col.pending_request = outcome.request_id;
                col.pending_ev = *pick;
            }
        }
    }

    ScenarioConfig config_;
    const TimeSeries& prices_;
    StepConfig step_;
    FacilityLayout layout_;
    EnergySandbox es_;
    PortLedger ports_;
    std::vector<StepEv> evs_;
    std::vector<StepColumn> cols_;
    SimTime now_ = 0.0;
};

double peak_alloc(const SimResult& r) {
    double peak = 0.0;
    for (const auto& p : r.es_trace) peak = std::max(peak, p.alloc_watts);
    return peak;
}

} // namespace

SimResult simulate_timestep(const ScenarioConfig& config, const std::vector<EVSpec>& fleet,
                            const TimeSeries& prices, const StepConfig& step) {
    config.validate();
    StepSim sim(config, fleet, prices, step);
    return sim.run();
}

ComparisonReport compare_traces(const SimResult& event_driven, const SimResult& time_stepped,
                                double dt_s, double e_star_ws) {
    if (event_driven.traces.size() != time_stepped.traces.size() ||
        event_driven.columns.size() != time_stepped.columns.size()) {
        throw ConfigError("compare_traces: results come from different scenarios");
    }
    for (std::size_t i = 0; i < event_driven.fleet.size(); ++i) {
        if (event_driven.fleet[i].id != time_stepped.fleet[i].id ||
            event_driven.fleet[i].energy_required_ws != time_stepped.fleet[i].energy_required_ws) {
            throw ConfigError("compare_traces: fleets differ; use the same scenario and seed");
        }
    }

    ComparisonReport rep;
    rep.dt_s = dt_s;
    for (std::size_t i = 0; i < event_driven.traces.size(); ++i) {
        const EVTrace& a = event_driven.traces[i];
        const EVTrace& b = time_stepped.traces[i];
        ComparisonRow row;
        row.ev = a.ev;
        row.energy_event_ws = a.energy_delivered_ws;
        row.energy_step_ws = b.energy_delivered_ws;
        row.energy_delta_ws = std::abs(a.energy_delivered_ws - b.energy_delivered_ws);
        row.ttr_event_s = ttr(a, e_star_ws);
        row.ttr_step_s = ttr(b, e_star_ws);
        if (row.ttr_event_s && row.ttr_step_s) {
            row.ttr_delta_s = std::abs(*row.ttr_event_s - *row.ttr_step_s);
        } else if (row.ttr_event_s.has_value() != row.ttr_step_s.has_value()) {
            row.ttr_mismatch = true;
        }
        rep.max_energy_delta_ws = std::max(rep.max_energy_delta_ws, row.energy_delta_ws);
        rep.max_ttr_delta_s = std::max(rep.max_ttr_delta_s, row.ttr_delta_s);
        rep.any_ttr_mismatch = rep.any_ttr_mismatch || row.ttr_mismatch;
        rep.rows.push_back(row);
    }
    rep.peak_event_w = peak_alloc(event_driven);
    rep.peak_step_w = peak_alloc(time_stepped);
    rep.peak_delta_w = std::abs(rep.peak_event_w - rep.peak_step_w);
    return rep;
}

std::string comparison_text(const ComparisonReport& report) {
    std::ostringstream out;
    out << "event-driven vs time-stepped (dt=" << num_str(report.dt_s) << " s)\n";
    out << "  vehicles compared:      " << report.rows.size() << "\n";
    out << "  max |energy delta|:     " << num_str(report.max_energy_delta_ws) << " Ws\n";
    out << "  max |TTR delta|:        " << num_str(report.max_ttr_delta_s) << " s\n";
    out << "  TTR present mismatch:   " << (report.any_ttr_mismatch ? "yes" : "no") << "\n";
    out << "  peak alloc (event):     " << num_str(report.peak_event_w) << " W\n";
    out << "  peak alloc (stepped):   " << num_str(report.peak_step_w) << " W\n";
    out << "  peak delta:             " << num_str(report.peak_delta_w) << " W\n";
    if (report.wall_step_s > 0.0 && report.wall_event_s > 0.0) {
        out << "  wall clock event/step:  " << num_str(report.wall_event_s) << " s / "
            << num_str(report.wall_step_s) << " s (speedup "
            << num_str(report.wall_ratio()) << "x)\n";
    }
    return out.str();
}

} // namespace evsim
