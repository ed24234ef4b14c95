#include "evsim/protocol.hpp"

#include "evsim/errors.hpp"
#include "evsim/strfmt.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace evsim {

const char* to_string(ColumnOpState state) {
    switch (state) {
        case ColumnOpState::Idle: return "idle";
        case ColumnOpState::Handshake: return "handshake";
        case ColumnOpState::Charging: return "charge";
    }
    return "?";
}

std::optional<int> select_fcfs(const std::vector<ConnectedEv>& candidates) {
    const ConnectedEv* best = nullptr;
    for (const auto& c : candidates) {
        if (!best || c.t_connect < best->t_connect ||
            (c.t_connect == best->t_connect && c.ev < best->ev)) {
            best = &c;
        }
    }
    if (!best) return std::nullopt;
    return best->ev;
}

std::pair<std::optional<int>, ShrdCursor> select_shrd(const std::vector<ConnectedEv>& cycle,
                                                      ShrdCursor cursor) {
    if (cycle.empty()) return {std::nullopt, cursor};
    // `cycle` is ordered by (t_connect, ev); pick the first entry strictly
    // after the cursor key, wrapping to the front.
    const ConnectedEv* pick = nullptr;
    if (cursor.valid) {
        for (const auto& c : cycle) {
            if (c.t_connect > cursor.t_connect ||
                (c.t_connect == cursor.t_connect && c.ev > cursor.ev)) {
                pick = &c;
                break;
            }
        }
    }
    if (!pick) pick = &cycle.front();
    return {pick->ev, ShrdCursor{true, pick->t_connect, pick->ev}};
}

std::pair<double, double> settle(const EVTrace& trace, const TimeSeries& prices) {
    double energy = 0.0;
    for (const auto& ep : trace.episodes) energy += ep.watts * (ep.end_s - ep.start_s);
    return {energy, energy_cost(trace.episodes, prices)};
}

namespace {

struct EvRuntime {
    enum class Phase { NotArrived, Waiting, Connected, Gone };

    EVSpec spec;
    Phase phase = Phase::NotArrived;
    int column = -1;
    SimTime t_connect = 0.0;
    double delivered_ws = 0.0;
    double remaining_ws = 0.0;
    std::optional<EventId> renege_event;
    EVTrace trace;
};

struct ColumnRuntime {
    ColumnSpec spec;
    std::vector<ConnectedEv> connected; // sorted by (t_connect, ev)
    ColumnOpState op = ColumnOpState::Idle;
    std::vector<StateLogEntry> state_log{{0.0, ColumnOpState::Idle}};
    ShrdCursor cursor;
    int active_ev = -1;      // valid in Handshake/Charging
    int last_charged_ev = -1;
    std::optional<std::uint64_t> pending_request;
    int pending_ev = -1;
    double granted_watts = 0.0;
    SimTime episode_start = 0.0;
    std::optional<EventId> end_event; // handshake end or charge end
};

class Engine {
public:
    Engine(const ScenarioConfig& config, std::vector<EVSpec> fleet, const TimeSeries& prices)
        : config_(config),
          prices_(prices),
          layout_(build_facility(config)),
          es_(layout_.es_cap_watts),
          ports_(static_cast<int>(layout_.columns.size()), config.ports_per_column) {
        evs_.reserve(fleet.size());
        for (auto& spec : fleet) {
            EvRuntime ev;
            ev.spec = spec;
            ev.remaining_ws = spec.energy_required_ws;
            ev.trace.ev = spec.id;
            ev.trace.t_arr = spec.arrival_s();
            evs_.push_back(std::move(ev));
        }
        cols_.reserve(layout_.columns.size());
        for (const auto& spec : layout_.columns) {
            ColumnRuntime col;
            col.spec = spec;
            cols_.push_back(std::move(col));
        }
    }

    SimResult run() {
        for (const auto& ev : evs_) {
            const int id = ev.spec.id;
            cal_.schedule(ev.spec.arrival_s(), [this, id] { on_arrival(id); });
        }
        while (auto fired = cal_.advance()) {
            fired->payload();
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
        result.events = std::move(events_);
        return result;
    }

private:
    SimTime now() const { return cal_.now(); }

    void log(const std::string& entity, const std::string& kind, std::string detail = {}) {
        events_.push_back({now(), entity, kind, std::move(detail)});
    }
    static std::string ev_tag(int ev) { return "ev:" + std::to_string(ev); }
    static std::string cc_tag(int col) { return "cc:" + std::to_string(col); }

    void set_op_state(ColumnRuntime& col, ColumnOpState state) {
        if (col.op == state) return;
        col.op = state;
        col.state_log.push_back({now(), state});
    }

    // ---- EV lifecycle -----------------------------------------------------

    void on_arrival(int ev_id) {
        EvRuntime& ev = evs_[static_cast<std::size_t>(ev_id)];
        log(ev_tag(ev_id), "arrival");
        if (auto col = ports_.try_assign(ev_id, now())) {
            do_connect(ev_id, *col);
            return;
        }
        ev.phase = EvRuntime::Phase::Waiting;
        ports_.enqueue_waiter(ev_id);
        if (std::isfinite(ev.spec.waiting_tolerance_s)) {
            ev.renege_event = cal_.schedule(now() + ev.spec.waiting_tolerance_s,
                                            [this, ev_id] { on_renege(ev_id); });
        }
    }

    void do_connect(int ev_id, int col_id) {
        EvRuntime& ev = evs_[static_cast<std::size_t>(ev_id)];
        ColumnRuntime& col = cols_[static_cast<std::size_t>(col_id)];
        ev.phase = EvRuntime::Phase::Connected;
        ev.column = col_id;
        ev.t_connect = now();
        ev.trace.t_connect = now();
        ev.trace.column = col_id;
        log(ev_tag(ev_id), "connect", "column=" + std::to_string(col_id));

        ConnectedEv entry{ev_id, now()};
        auto pos = std::upper_bound(col.connected.begin(), col.connected.end(), entry,
                                    [](const ConnectedEv& a, const ConnectedEv& b) {
                                        if (a.t_connect != b.t_connect) return a.t_connect < b.t_connect;
                                        return a.ev < b.ev;
                                    });
        col.connected.insert(pos, entry);

        cal_.schedule(now() + ev.spec.parking_duration_s, [this, ev_id] { on_leave(ev_id); });
        column_select(col_id);
    }

    void on_renege(int ev_id) {
        EvRuntime& ev = evs_[static_cast<std::size_t>(ev_id)];
        if (ev.phase != EvRuntime::Phase::Waiting) return;
        ports_.remove_waiter(ev_id);
        log(ev_tag(ev_id), "renege");
        finalize_ev(ev, /*served=*/false);
    }

    void on_leave(int ev_id) {
        EvRuntime& ev = evs_[static_cast<std::size_t>(ev_id)];
        if (ev.phase == EvRuntime::Phase::Waiting) {
            // Early leave while still queued for a port.
            ports_.remove_waiter(ev_id);
            if (ev.renege_event) cal_.cancel(*ev.renege_event);
            finalize_ev(ev, /*served=*/false);
            return;
        }
        if (ev.phase != EvRuntime::Phase::Connected) return;

        const int col_id = ev.column;
        ColumnRuntime& col = cols_[static_cast<std::size_t>(col_id)];

        if (col.active_ev == ev_id) {
            if (col.op == ColumnOpState::Charging) {
                close_episode(col, ev, /*completed=*/false, "leave");
            } else {
                log(cc_tag(col_id), "handshake_abort", "ev=" + std::to_string(ev_id));
            }
            if (col.end_event) cal_.cancel(*col.end_event);
            col.end_event.reset();
            col.active_ev = -1;
            set_op_state(col, ColumnOpState::Idle);
            handle_grants(es_.release(col_id, now()));
        } else if (col.pending_request && col.pending_ev == ev_id) {
            // Leave before the grant: the charging attempt is unsuccessful
            // and the pending ES request is withdrawn.
            auto result = es_.cancel(*col.pending_request, now());
            log("es", "cancel", "id=" + std::to_string(*col.pending_request));
            col.pending_request.reset();
            col.pending_ev = -1;
            handle_grants(result.unblocked);
        }

        col.connected.erase(std::find_if(col.connected.begin(), col.connected.end(),
                                         [&](const ConnectedEv& c) { return c.ev == ev_id; }));

        finalize_ev(ev, /*served=*/true);

        for (const auto& assignment : ports_.release(col_id, ev_id, now())) {
            EvRuntime& waiter = evs_[static_cast<std::size_t>(assignment.ev)];
            if (waiter.renege_event) cal_.cancel(*waiter.renege_event);
            waiter.renege_event.reset();
            do_connect(assignment.ev, assignment.column);
        }

        column_select(col_id);
    }

    void finalize_ev(EvRuntime& ev, bool served) {
        ev.phase = EvRuntime::Phase::Gone;
        ev.trace.served = served;
        ev.trace.t_leave = now();
        ev.trace.completed = served && ev.remaining_ws <= 0.0;
        ev.trace.energy_delivered_ws = ev.delivered_ws;
        const auto [energy, cost] = settle(ev.trace, prices_);
        (void)energy;
        ev.trace.cost = cost;
        log(ev_tag(ev.spec.id), "leave", "served=" + std::string(served ? "1" : "0"));
        log(ev_tag(ev.spec.id), "settle",
            "energy_ws=" + num_str(ev.trace.energy_delivered_ws) + " cost=" + num_str(cost));
    }

    // ---- Column operation loop ---------------------------------------------

    std::vector<ConnectedEv> candidates(const ColumnRuntime& col) const {
        std::vector<ConnectedEv> out;
        for (const auto& c : col.connected) {
            if (evs_[static_cast<std::size_t>(c.ev)].remaining_ws > 0.0) out.push_back(c);
        }
        return out;
    }

    void column_select(int col_id) {
        ColumnRuntime& col = cols_[static_cast<std::size_t>(col_id)];
        if (col.op != ColumnOpState::Idle || col.pending_request) return;

        const auto cands = candidates(col);
        std::optional<int> pick;
        if (config_.strategy == Strategy::FCFS) {
            pick = select_fcfs(cands);
        } else {
            auto [sel, cursor] = select_shrd(cands, col.cursor);
            pick = sel;
            if (sel) col.cursor = cursor;
        }
        if (!pick) return;

        const EvRuntime& ev = evs_[static_cast<std::size_t>(*pick)];
        const double watts = requested_power(col.spec.rating_watts, ev.spec.max_accept_watts);
        auto outcome = es_.request(col_id, *pick, watts, now());
        log(cc_tag(col_id), "request",
            "ev=" + std::to_string(*pick) + " watts=" + num_str(watts) +
                " id=" + std::to_string(outcome.request_id));
        if (outcome.granted) {
            begin_service(col, *pick, watts, outcome.request_id);
        } else {
            log("es", "queue", "id=" + std::to_string(outcome.request_id));
            col.pending_request = outcome.request_id;
            col.pending_ev = *pick;
        }
    }

    void handle_grants(const std::vector<PowerRequest>& grants) {
        for (const auto& req : grants) {
            ColumnRuntime& col = cols_[static_cast<std::size_t>(req.column)];
            if (!col.pending_request || *col.pending_request != req.id) {
                throw ContractViolation("grant delivered to a column that was not waiting");
            }
            col.pending_request.reset();
            col.pending_ev = -1;
            begin_service(col, req.ev, req.watts, req.id);
        }
    }

    void begin_service(ColumnRuntime& col, int ev_id, double watts, std::uint64_t request_id) {
        log("es", "grant",
            "id=" + std::to_string(request_id) + " column=" + std::to_string(col.spec.id) +
                " ev=" + std::to_string(ev_id) + " watts=" + num_str(watts));
        col.active_ev = ev_id;
        col.granted_watts = watts;
        if (ev_id != col.last_charged_ev) {
            set_op_state(col, ColumnOpState::Handshake);
            log(cc_tag(col.spec.id), "handshake_start", "ev=" + std::to_string(ev_id));
            const int col_id = col.spec.id;
            col.end_event = cal_.schedule(now() + config_.handshake_s,
                                          [this, col_id] { on_handshake_end(col_id); });
        } else {
            start_charging(col);
        }
    }

    void on_handshake_end(int col_id) {
        ColumnRuntime& col = cols_[static_cast<std::size_t>(col_id)];
        col.end_event.reset();
        log(cc_tag(col_id), "handshake_end", "ev=" + std::to_string(col.active_ev));
        start_charging(col);
    }

    void start_charging(ColumnRuntime& col) {
        EvRuntime& ev = evs_[static_cast<std::size_t>(col.active_ev)];
        set_op_state(col, ColumnOpState::Charging);
        col.episode_start = now();
        col.last_charged_ev = col.active_ev;
        log(cc_tag(col.spec.id), "charge_start",
            "ev=" + std::to_string(col.active_ev) + " watts=" + num_str(col.granted_watts));

        const SimTime t_complete = now() + ev.remaining_ws / col.granted_watts;
        SimTime end = t_complete;
        bool completes = true;
        if (config_.strategy == Strategy::SHRD) {
            const SimTime boundary = next_interval_boundary(now(), config_.price_interval_s);
            if (boundary < t_complete) {
                end = boundary;
                completes = false;
            }
        }
        const int col_id = col.spec.id;
        col.end_event =
            cal_.schedule(end, [this, col_id, completes] { on_charge_end(col_id, completes); });
    }

    void close_episode(ColumnRuntime& col, EvRuntime& ev, bool completed, const char* reason) {
        const SimTime dur = now() - col.episode_start;
        if (completed) {
            ev.delivered_ws = ev.spec.energy_required_ws;
            ev.remaining_ws = 0.0;
        } else {
            ev.delivered_ws += col.granted_watts * dur;
            ev.remaining_ws = std::max(0.0, ev.spec.energy_required_ws - ev.delivered_ws);
        }
        ev.trace.episodes.push_back({col.episode_start, now(), col.granted_watts});
        log(cc_tag(col.spec.id), "charge_end",
            "ev=" + std::to_string(ev.spec.id) + " reason=" + reason +
                " delivered_ws=" + num_str(ev.delivered_ws));
        if (completed) log(ev_tag(ev.spec.id), "satisfied");
    }

    void on_charge_end(int col_id, bool completes) {
        ColumnRuntime& col = cols_[static_cast<std::size_t>(col_id)];
        col.end_event.reset();
        EvRuntime& ev = evs_[static_cast<std::size_t>(col.active_ev)];
        close_episode(col, ev, completes, completes ? "satisfied" : "interval");
        col.active_ev = -1;
        set_op_state(col, ColumnOpState::Idle);
        handle_grants(es_.release(col_id, now()));
        // Demand met mid-slot or slot expired: reselect immediately.
        column_select(col_id);
    }

    ScenarioConfig config_;
    const TimeSeries& prices_;
    FacilityLayout layout_;
    EventCalendar<std::function<void()>> cal_;
    EnergySandbox es_;
    PortLedger ports_;
    std::vector<EvRuntime> evs_;
    std::vector<ColumnRuntime> cols_;
    std::vector<EventLogEntry> events_;
};

} // namespace

SimResult run_simulation(const ScenarioConfig& config, const std::vector<EVSpec>& fleet,
                         const TimeSeries& prices) {
    config.validate();
    Engine engine(config, fleet, prices);
    return engine.run();
}

SimResult run_simulation(const ScenarioConfig& config, std::uint64_t seed,
                         const TimeSeries& prices) {
    return run_simulation(config, sample_fleet(config, seed), prices);
}

} // namespace evsim
