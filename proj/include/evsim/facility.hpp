#pragma once

#include "evsim/kernel.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

namespace evsim {

/// Requested power for a column/vehicle pair: the binding side of the
/// infrastructure and vehicle power limits.
double requested_power(double column_rating_watts, double ev_accept_watts);

struct PowerRequest {
    enum class State { Pending, Granted, Cancelled };

    std::uint64_t id = 0;
    int column = -1;
    int ev = -1;
    double watts = 0.0;
    SimTime t_req = 0.0;
    State state = State::Pending;
    SimTime t_resolved = 0.0;   // grant or cancel time
    std::int64_t grant_seq = -1; // position in the grant sequence, -1 if never granted
};

struct EsTracePoint {
    SimTime time_s = 0.0;
    double alloc_watts = 0.0;
};

/// The shared facility power cap. Requests are all-or-nothing and served in
/// strict FCFS order: a younger fitting request never overtakes an older
/// non-fitting one. The allocation trace is append-only and cap-checked on
/// every change.
class EnergySandbox {
public:
    explicit EnergySandbox(double cap_watts);

    struct Outcome {
        bool granted = false;
        std::uint64_t request_id = 0;
    };

    /// Issue a power request at time t. A column may hold at most one live
    /// allocation and at most one pending request.
    Outcome request(int column, int ev, double watts, SimTime t);

    /// Release the column's live allocation, then drain the pending queue
    /// head-first. Returns the requests granted by the drain, in grant order.
    std::vector<PowerRequest> release(int column, SimTime t);

    struct CancelResult {
        bool cancelled = false;
        std::vector<PowerRequest> unblocked; // grants enabled by the removal
    };

    /// Remove a pending request. Granted or unknown ids return false.
    CancelResult cancel(std::uint64_t request_id, SimTime t);

    double cap_watts() const { return cap_; }
    double total_allocated() const;
    std::optional<double> allocation_of(int column) const;
    std::size_t pending_count() const { return pending_.size(); }
    const PowerRequest* head_request() const; // oldest pending, nullptr if none

    const std::vector<EsTracePoint>& trace() const { return trace_; }
    const std::vector<PowerRequest>& request_log() const { return log_; }

private:
    void drain(SimTime t, std::vector<PowerRequest>& granted);
    void grant_locked(PowerRequest& req, SimTime t);
    void append_trace(SimTime t);

    double cap_;
    std::vector<double> alloc_;          // column -> live watts (0 = none), grown on demand
    std::vector<bool> has_alloc_;
    std::deque<std::uint64_t> pending_;  // FCFS by request time
    std::vector<PowerRequest> log_;      // indexed by request id
    std::vector<EsTracePoint> trace_;
    std::int64_t next_grant_seq_ = 0;
};

/// Port occupancy bookkeeping plus the facility-wide FCFS waitlist.
/// Placement picks the least-occupied column, tie-broken by lowest index.
class PortLedger {
public:
    PortLedger(int column_count, int ports_per_column);

    /// Assign a port if one is free; otherwise the caller is expected to
    /// enqueue the vehicle as a waiter.
    std::optional<int> try_assign(int ev, SimTime t);

    void enqueue_waiter(int ev);
    bool remove_waiter(int ev);

    struct Assignment {
        int ev = -1;
        int column = -1;
    };

    /// Free the vehicle's port and hand freed capacity to waiting vehicles
    /// (FCFS). Returns the resulting assignments in order.
    std::vector<Assignment> release(int column, int ev, SimTime t);

    int occupancy(int column) const;
    std::optional<SimTime> connect_time(int ev) const;
    std::size_t waiting_count() const { return waitlist_.size(); }

private:
    std::optional<int> pick_column() const;

    int ports_;
    std::vector<std::vector<int>> connected_; // per column, ev ids
    std::vector<SimTime> connect_time_;       // per ev (grown on demand), -1 = never
    std::deque<int> waitlist_;
};

} // namespace evsim
