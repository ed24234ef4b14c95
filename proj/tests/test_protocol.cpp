#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evsim/metrics.hpp"
#include "evsim/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <map>

using namespace evsim;

namespace {

const TimeSeries kFlatPrice = TimeSeries::constant(0.30);

ScenarioConfig controlled_config(int evs, int fcc, int scc) {
    ScenarioConfig cfg;
    cfg.ev_count = evs;
    cfg.fcc_count = fcc;
    cfg.scc_count = scc;
    cfg.arrival_window_start_s = cfg.arrival_window_end_s = 21'600.0;
    cfg.energy_demand_lo_ws = cfg.energy_demand_hi_ws = 33'696'000.0;
    cfg.parking_lo_s = cfg.parking_hi_s = 28'800.0;
    return cfg;
}

EVSpec make_ev(int id, double arrival, double parking, double energy,
               double waiting = kUnbounded) {
    EVSpec ev;
    ev.id = id;
    ev.entrance_delay_s = arrival;
    ev.parking_duration_s = parking;
    ev.energy_required_ws = energy;
    ev.waiting_tolerance_s = waiting;
    ev.max_accept_watts = 150'000.0;
    return ev;
}

// Charging episodes per column, in time order, with their vehicle ids.
struct ColumnEpisode {
    int ev;
    PowerEpisode episode;
};
std::map<int, std::vector<ColumnEpisode>> episodes_by_column(const SimResult& result) {
    std::map<int, std::vector<ColumnEpisode>> out;
    for (const auto& trace : result.traces) {
        if (!trace.column) continue;
        for (const auto& ep : trace.episodes) out[*trace.column].push_back({trace.ev, ep});
    }
    for (auto& [col, eps] : out) {
        std::sort(eps.begin(), eps.end(), [](const ColumnEpisode& a, const ColumnEpisode& b) {
            return a.episode.start_s < b.episode.start_s;
        });
    }
    return out;
}

} // namespace

TEST_CASE("select_fcfs: earliest connection, then id") {
    CHECK(*select_fcfs({{1, 100.0}, {2, 50.0}}) == 2);
    CHECK(*select_fcfs({{1, 50.0}, {2, 50.0}}) == 1);
    CHECK_FALSE(select_fcfs({}).has_value());
}

TEST_CASE("select_shrd walks the cycle round-robin") {
    const std::vector<ConnectedEv> cycle{{10, 0.0}, {11, 1.0}, {12, 2.0}};
    ShrdCursor cursor{true, 0.0, 10}; // cursor at A
    auto [first, c1] = select_shrd(cycle, cursor);
    CHECK(*first == 11);
    auto [second, c2] = select_shrd(cycle, c1);
    CHECK(*second == 12);
    auto [third, c3] = select_shrd(cycle, c2);
    CHECK(*third == 10); // wraps
    auto [none, c4] = select_shrd({}, c3);
    CHECK_FALSE(none.has_value());
    (void)c4;
}

TEST_CASE("select_shrd survives removal of the cursor vehicle") {
    const std::vector<ConnectedEv> cycle{{10, 0.0}, {12, 2.0}};
    ShrdCursor cursor{true, 1.0, 11}; // 11 left the cycle
    auto [pick, next] = select_shrd(cycle, cursor);
    CHECK(*pick == 12);
    (void)next;
}

TEST_CASE("one vehicle on a fast column: handshake plus 702 seconds") {
    const auto cfg = controlled_config(1, 1, 0);
    const auto result = run_simulation(cfg, 7, kFlatPrice);
    const auto& trace = result.traces[0];
    REQUIRE(trace.episodes.size() == 1);
    CHECK(trace.episodes[0].start_s == doctest::Approx(21'632.0));
    CHECK(trace.episodes[0].end_s == doctest::Approx(22'334.0)); // 21600 + 32 + 702
    CHECK(trace.episodes[0].watts == 48'000.0);
    CHECK(trace.energy_delivered_ws == 33'696'000.0);
    CHECK(trace.completed);
    CHECK(trace.served);
    CHECK(trace.t_leave == doctest::Approx(50'400.0));
    CHECK(trace.cost == doctest::Approx(9.36 * 0.30).epsilon(1e-9));

    const auto& log = result.columns[0].state_log;
    REQUIRE(log.size() == 4);
    CHECK(log[0].state == ColumnOpState::Idle);
    CHECK(log[1].state == ColumnOpState::Handshake);
    CHECK(log[1].time_s == doctest::Approx(21'600.0));
    CHECK(log[2].state == ColumnOpState::Charging);
    CHECK(log[2].time_s == doctest::Approx(21'632.0));
    CHECK(log[3].state == ColumnOpState::Idle);
    CHECK(log[3].time_s == doctest::Approx(22'334.0));
}

TEST_CASE("two vehicles share one slow column sequentially under FCFS") {
    const auto cfg = controlled_config(2, 0, 1);
    const auto result = run_simulation(cfg, 7, kFlatPrice);
    const double charge_s = 33'696'000.0 / 11'000.0; // 3063.27...
    const auto& first = result.traces[0];
    const auto& second = result.traces[1];
    REQUIRE(first.episodes.size() == 1);
    REQUIRE(second.episodes.size() == 1);
    CHECK(first.episodes[0].end_s == doctest::Approx(21'600.0 + 32.0 + charge_s));
    CHECK(second.episodes[0].start_s == doctest::Approx(21'600.0 + 2 * 32.0 + charge_s));
    CHECK(second.episodes[0].end_s == doctest::Approx(21'600.0 + 2 * (32.0 + charge_s)));
    CHECK(first.completed);
    CHECK(second.completed);
}

TEST_CASE("SHRD alternates price-interval slots with a handshake per switch") {
    auto cfg = controlled_config(2, 0, 1);
    cfg.strategy = Strategy::SHRD;
    const auto result = run_simulation(cfg, 7, kFlatPrice);
    const auto cols = episodes_by_column(result);
    const auto& eps = cols.at(0);
    // connects at 21600 (a slot boundary): slots of 868 s effective delivery
    REQUIRE(eps.size() >= 4);
    CHECK(eps[0].ev == 0);
    CHECK(eps[0].episode.start_s == doctest::Approx(21'632.0));
    CHECK(eps[0].episode.end_s == doctest::Approx(22'500.0)); // 868 s delivered
    CHECK(eps[1].ev == 1);
    CHECK(eps[1].episode.start_s == doctest::Approx(22'532.0));
    CHECK(eps[1].episode.end_s == doctest::Approx(23'400.0));
    CHECK(eps[2].ev == 0);
    CHECK(eps[2].episode.start_s == doctest::Approx(23'432.0));
    CHECK(eps[2].episode.end_s == doctest::Approx(24'300.0));
    CHECK(eps[3].ev == 1);
    CHECK(eps[3].episode.start_s == doctest::Approx(24'332.0));
    CHECK(result.traces[0].completed);
    CHECK(result.traces[1].completed);
}

TEST_CASE("a sole SHRD vehicle keeps charging without repeated handshakes") {
    auto cfg = controlled_config(1, 0, 1);
    cfg.strategy = Strategy::SHRD;
    const auto result = run_simulation(cfg, 7, kFlatPrice);
    int handshakes = 0;
    for (const auto& entry : result.columns[0].state_log) {
        if (entry.state == ColumnOpState::Handshake) ++handshakes;
    }
    CHECK(handshakes == 1);
    // slot re-requests keep delivery contiguous: same TTR as FCFS
    const auto t = ttr(result.traces[0], 33'696'000.0);
    REQUIRE(t.has_value());
    CHECK(*t == doctest::Approx(32.0 + 33'696'000.0 / 11'000.0).epsilon(1e-9));
    CHECK(result.traces[0].completed);
}

TEST_CASE("departure mid-charge truncates the episode") {
    const auto cfg = controlled_config(1, 1, 0);
    std::vector<EVSpec> fleet{make_ev(0, 21'600.0, 1'000.0, 1e9)};
    const auto result = run_simulation(cfg, fleet, kFlatPrice);
    const auto& trace = result.traces[0];
    REQUIRE(trace.episodes.size() == 1);
    CHECK(trace.episodes[0].end_s == doctest::Approx(22'600.0)); // t_connect + 1000
    CHECK(trace.energy_delivered_ws == doctest::Approx(968.0 * 48'000.0));
    CHECK_FALSE(trace.completed);
    CHECK(trace.served);
}

TEST_CASE("departure during the handshake aborts it; no energy flows") {
    const auto cfg = controlled_config(1, 1, 0);
    std::vector<EVSpec> fleet{make_ev(0, 21'600.0, 10.0, 1e7)};
    const auto result = run_simulation(cfg, fleet, kFlatPrice);
    const auto& trace = result.traces[0];
    CHECK(trace.episodes.empty());
    CHECK(trace.energy_delivered_ws == 0.0);
    CHECK(trace.served);
    for (const auto& entry : result.columns[0].state_log) {
        CHECK(entry.state != ColumnOpState::Charging);
    }
    // allocation was held during the aborted handshake and then released
    CHECK(result.es_trace.back().alloc_watts == 0.0);
}

TEST_CASE("renege: no port within the waiting tolerance") {
    auto cfg = controlled_config(2, 1, 0);
    cfg.ports_per_column = 1;
    std::vector<EVSpec> fleet{make_ev(0, 21'600.0, 28'800.0, 33'696'000.0),
                              make_ev(1, 21'600.0, 28'800.0, 33'696'000.0, /*waiting=*/0.0)};
    const auto result = run_simulation(cfg, fleet, kFlatPrice);
    const auto& lost = result.traces[1];
    CHECK_FALSE(lost.served);
    CHECK_FALSE(lost.t_connect.has_value());
    CHECK(lost.energy_delivered_ws == 0.0);
    CHECK(lost.cost == 0.0);
    CHECK(lost.t_leave == doctest::Approx(21'600.0));
    CHECK(result.traces[0].completed);
}

TEST_CASE("a freed port is handed to the waiting vehicle") {
    auto cfg = controlled_config(2, 1, 0);
    cfg.ports_per_column = 1;
    std::vector<EVSpec> fleet{make_ev(0, 21'600.0, 1'000.0, 33'696'000.0),
                              make_ev(1, 21'700.0, 10'000.0, 33'696'000.0, /*waiting=*/5'000.0)};
    const auto result = run_simulation(cfg, fleet, kFlatPrice);
    const auto& waiter = result.traces[1];
    REQUIRE(waiter.t_connect.has_value());
    CHECK(*waiter.t_connect == doctest::Approx(22'600.0)); // when EV0 departs
    CHECK(waiter.served);
    CHECK(waiter.completed);
}

TEST_CASE("leave before the grant cancels the pending request") {
    auto cfg = controlled_config(2, 2, 0);
    cfg.es_cap_watts = 48'000.0; // room for exactly one fast charge
    std::vector<EVSpec> fleet{make_ev(0, 21'600.0, 28'800.0, 33'696'000.0),
                              make_ev(1, 21'600.0, 500.0, 33'696'000.0)};
    const auto result = run_simulation(cfg, fleet, kFlatPrice);
    const auto& lost = result.traces[1];
    CHECK(lost.served);
    CHECK(lost.energy_delivered_ws == 0.0);
    CHECK_FALSE(lost.completed);
    bool saw_cancelled = false;
    for (const auto& req : result.request_log) {
        if (req.state == PowerRequest::State::Cancelled) {
            CHECK(req.ev == 1);
            CHECK(req.t_resolved == doctest::Approx(22'100.0));
            saw_cancelled = true;
        }
    }
    CHECK(saw_cancelled);
    CHECK(result.traces[0].completed);
}

TEST_CASE("settle: empty, exact, and price-step-crossing episodes") {
    EVTrace trace;
    trace.t_arr = 0.0;
    CHECK(settle(trace, kFlatPrice).first == 0.0);
    CHECK(settle(trace, kFlatPrice).second == 0.0);

    trace.episodes.push_back({100.0, 802.0, 48'000.0}); // 702 s at 48 kW = 9.36 kWh
    auto [energy, cost] = settle(trace, kFlatPrice);
    CHECK(energy == doctest::Approx(33'696'000.0));
    CHECK(cost == doctest::Approx(2.808).epsilon(1e-12));

    const TimeSeries stepped({0.0, 451.0}, {0.30, 0.20});
    const double split_cost = settle(trace, stepped).second;
    EVTrace parts = trace;
    parts.episodes = {{100.0, 451.0, 48'000.0}, {451.0, 802.0, 48'000.0}};
    CHECK(split_cost == doctest::Approx(settle(parts, stepped).second).epsilon(1e-12));
}

TEST_CASE("SHRD fairness: delivered energy spread stays within one slot") {
    auto cfg = controlled_config(3, 0, 1);
    cfg.strategy = Strategy::SHRD;
    std::vector<EVSpec> fleet{make_ev(0, 21'600.0, 9'000.0, 1e12),
                              make_ev(1, 21'600.0, 9'000.0, 1e12),
                              make_ev(2, 21'600.0, 9'000.0, 1e12)};
    const auto result = run_simulation(cfg, fleet, kFlatPrice);
    double lo = 1e18, hi = 0.0;
    for (const auto& trace : result.traces) {
        lo = std::min(lo, trace.energy_delivered_ws);
        hi = std::max(hi, trace.energy_delivered_ws);
    }
    CHECK(hi - lo <= (900.0 - 32.0) * 11'000.0 + 1e-6);
    CHECK(hi > 0.0);
}

// ---- randomized invariants --------------------------------------------------

namespace {

ScenarioConfig random_config(RngStream& rng) {
    ScenarioConfig cfg;
    cfg.ev_count = 1 + static_cast<int>(rng.uniform_int(8));
    const bool fcc = rng.uniform01() < 0.5;
    const int columns = 1 + static_cast<int>(rng.uniform_int(3));
    cfg.fcc_count = fcc ? columns : 0;
    cfg.scc_count = fcc ? 0 : columns;
    cfg.ports_per_column = 1 + static_cast<int>(rng.uniform_int(4));
    cfg.strategy = rng.uniform01() < 0.5 ? Strategy::FCFS : Strategy::SHRD;
    const double caps[] = {20'000.0, 59'000.0, 1'000'000.0};
    cfg.es_cap_watts = caps[rng.uniform_int(3)];
    cfg.arrival_window_start_s = 21'600.0;
    cfg.arrival_window_end_s = 23'400.0;
    cfg.energy_demand_lo_ws = 5e6;
    cfg.energy_demand_hi_ws = 4e7;
    cfg.parking_lo_s = 1'800.0;
    cfg.parking_hi_s = 20'000.0;
    const double tolerances[] = {kUnbounded, 0.0, 300.0};
    cfg.waiting_tolerance_s = tolerances[rng.uniform_int(3)];
    return cfg;
}

void verify_invariants(const SimResult& result, const ScenarioConfig& cfg) {
    // cap safety
    for (const auto& p : result.es_trace) {
        REQUIRE(p.alloc_watts >= 0.0);
        REQUIRE(p.alloc_watts <= cfg.es_cap_watts);
    }

    // per-vehicle bookkeeping
    for (const auto& trace : result.traces) {
        double sum = 0.0;
        for (std::size_t i = 0; i < trace.episodes.size(); ++i) {
            const auto& ep = trace.episodes[i];
            REQUIRE(ep.end_s >= ep.start_s);
            REQUIRE(trace.t_connect.has_value());
            REQUIRE(ep.start_s >= *trace.t_connect - 1e-9);
            REQUIRE(ep.end_s <= trace.t_leave + 1e-9);
            if (i > 0) REQUIRE(ep.start_s >= trace.episodes[i - 1].end_s - 1e-9);
            sum += ep.watts * (ep.end_s - ep.start_s);
        }
        REQUIRE(trace.energy_delivered_ws == doctest::Approx(sum).epsilon(1e-9));
        const double e_req =
            result.fleet[static_cast<std::size_t>(trace.ev)].energy_required_ws;
        REQUIRE(trace.energy_delivered_ws <= e_req + 1e-6);
        if (!trace.served) {
            REQUIRE(trace.episodes.empty());
            REQUIRE(trace.cost == 0.0);
        }
    }

    // single active charge per column + handshake necessity
    const auto cols = episodes_by_column(result);
    for (const auto& [col_id, eps] : cols) {
        const auto& log = result.columns[static_cast<std::size_t>(col_id)].state_log;
        int prev_ev = -1;
        for (std::size_t i = 0; i < eps.size(); ++i) {
            if (i > 0) REQUIRE(eps[i].episode.start_s >= eps[i - 1].episode.end_s - 1e-9);
            // a switch of vehicle requires a full handshake ending at the start
            bool handshake_before = false;
            for (std::size_t k = 0; k + 1 < log.size(); ++k) {
                if (log[k].state == ColumnOpState::Handshake &&
                    std::abs(log[k + 1].time_s - eps[i].episode.start_s) < 1e-9 &&
                    std::abs((log[k + 1].time_s - log[k].time_s) - cfg.handshake_s) < 1e-9) {
                    handshake_before = true;
                }
            }
            if (eps[i].ev != prev_ev) {
                REQUIRE(handshake_before);
            } else {
                REQUIRE_FALSE(handshake_before);
            }
            prev_ev = eps[i].ev;
        }
    }

    // FCFS completion order per column
    if (cfg.strategy == Strategy::FCFS) {
        for (const auto& [col_id, eps] : cols) {
            (void)eps;
            std::vector<const EVTrace*> completed;
            for (const auto& trace : result.traces) {
                if (trace.column && *trace.column == col_id && trace.completed) {
                    completed.push_back(&trace);
                }
            }
            std::sort(completed.begin(), completed.end(), [](const EVTrace* a, const EVTrace* b) {
                if (*a->t_connect != *b->t_connect) return *a->t_connect < *b->t_connect;
                return a->ev < b->ev;
            });
            double last_end = 0.0;
            for (const EVTrace* trace : completed) {
                REQUIRE(trace->episodes.back().end_s >= last_end - 1e-9);
                last_end = trace->episodes.back().end_s;
            }
        }
    }

    // state partition: fractions of the horizon sum to one
    for (const auto& col : result.columns) {
        const auto u = utilization(col.state_log, cfg.horizon_s);
        REQUIRE(u.charge_frac + u.handshake_frac + u.idle_frac == doctest::Approx(1.0).epsilon(1e-9));
    }

    // FCFS grant ordering among never-cancelled requests
    std::vector<const PowerRequest*> granted;
    for (const auto& req : result.request_log) {
        if (req.state == PowerRequest::State::Granted) granted.push_back(&req);
    }
    std::sort(granted.begin(), granted.end(),
              [](auto* a, auto* b) { return a->grant_seq < b->grant_seq; });
    for (std::size_t i = 1; i < granted.size(); ++i) {
        REQUIRE(granted[i]->t_req >= granted[i - 1]->t_req);
    }
}

} // namespace

TEST_CASE("random small scenarios uphold the protocol invariants") {
    RngStream rng(404, {0, 0, 0, 50});
    for (int trial = 0; trial < 60; ++trial) {
        const ScenarioConfig cfg = random_config(rng);
        const std::uint64_t seed = rng.next_u64();
        const auto result = run_simulation(cfg, seed, kFlatPrice);
        verify_invariants(result, cfg);

        // replay determinism: bit-identical event logs
        const auto replay = run_simulation(cfg, seed, kFlatPrice);
        REQUIRE(replay.events.size() == result.events.size());
        for (std::size_t i = 0; i < replay.events.size(); ++i) {
            REQUIRE(replay.events[i].time_s == result.events[i].time_s);
            REQUIRE(replay.events[i].entity == result.events[i].entity);
            REQUIRE(replay.events[i].kind == result.events[i].kind);
            REQUIRE(replay.events[i].detail == result.events[i].detail);
        }
    }
}
