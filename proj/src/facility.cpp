#include "evsim/facility.hpp"

#include "evsim/errors.hpp"

#include <algorithm>
#include <string>

namespace evsim {

double requested_power(double column_rating_watts, double ev_accept_watts) {
    if (column_rating_watts <= 0.0 || ev_accept_watts <= 0.0) {
        throw ContractViolation("requested_power: both limits must be positive");
    }
    return std::min(column_rating_watts, ev_accept_watts);
}

EnergySandbox::EnergySandbox(double cap_watts) : cap_(cap_watts) {
    if (cap_ <= 0.0) throw ConfigError("EnergySandbox: cap must be positive");
    trace_.push_back({0.0, 0.0});
}

double EnergySandbox::total_allocated() const {
    double total = 0.0;
    for (std::size_t c = 0; c < alloc_.size(); ++c) {
        if (has_alloc_[c]) total += alloc_[c];
    }
    return total;
}

std::optional<double> EnergySandbox::allocation_of(int column) const {
    const auto c = static_cast<std::size_t>(column);
    if (c < alloc_.size() && has_alloc_[c]) return alloc_[c];
    return std::nullopt;
}

const PowerRequest* EnergySandbox::head_request() const {
    if (pending_.empty()) return nullptr;
    return &log_[pending_.front()];
}

void EnergySandbox::append_trace(SimTime t) {
    const double total = total_allocated();
    if (total < 0.0 || total > cap_) {
        throw ContractViolation("EnergySandbox: allocation " + std::to_string(total) +
                                " outside [0, " + std::to_string(cap_) + "]");
    }
    if (!trace_.empty() && t < trace_.back().time_s) {
        throw ContractViolation("EnergySandbox: trace time moved backwards");
    }
    trace_.push_back({t, total});
}

void EnergySandbox::grant_locked(PowerRequest& req, SimTime t) {
    const auto c = static_cast<std::size_t>(req.column);
    if (c >= alloc_.size()) {
        alloc_.resize(c + 1, 0.0);
        has_alloc_.resize(c + 1, false);
    }
    if (has_alloc_[c]) {
        throw ContractViolation("EnergySandbox: column " + std::to_string(req.column) +
                                " already holds an allocation");
    }
    alloc_[c] = req.watts;
    has_alloc_[c] = true;
    req.state = PowerRequest::State::Granted;
    req.t_resolved = t;
    req.grant_seq = next_grant_seq_++;
    append_trace(t);
}

EnergySandbox::Outcome EnergySandbox::request(int column, int ev, double watts, SimTime t) {
    if (watts <= 0.0) throw ContractViolation("EnergySandbox: request watts must be positive");
    if (allocation_of(column)) {
        throw ContractViolation("EnergySandbox: column " + std::to_string(column) +
                                " requested power while holding an allocation");
    }
    for (auto id : pending_) {
        if (log_[id].column == column) {
            throw ContractViolation("EnergySandbox: column " + std::to_string(column) +
                                    " already has a pending request");
        }
    }

    PowerRequest req;
    req.id = log_.size();
    req.column = column;
    req.ev = ev;
    req.watts = watts;
    req.t_req = t;
    log_.push_back(req);

    // Strict head-of-line FCFS: grant immediately only when nothing older
    // is waiting and the request fits under the cap.
    if (pending_.empty() && total_allocated() + watts <= cap_) {
        grant_locked(log_.back(), t);
        return {true, req.id};
    }
    pending_.push_back(req.id);
    return {false, req.id};
}

void EnergySandbox::drain(SimTime t, std::vector<PowerRequest>& granted) {
    while (!pending_.empty()) {
        PowerRequest& head = log_[pending_.front()];
        if (total_allocated() + head.watts > cap_) break;
        grant_locked(head, t);
        granted.push_back(head);
        pending_.pop_front();
    }
}

std::vector<PowerRequest> EnergySandbox::release(int column, SimTime t) {
    const auto c = static_cast<std::size_t>(column);
    if (c >= alloc_.size() || !has_alloc_[c]) {
        throw ContractViolation("EnergySandbox: release without a live allocation (column " +
                                std::to_string(column) + ")");
    }
    alloc_[c] = 0.0;
    has_alloc_[c] = false;
    append_trace(t);
    std::vector<PowerRequest> granted;
    drain(t, granted);
    return granted;
}

EnergySandbox::CancelResult EnergySandbox::cancel(std::uint64_t request_id, SimTime t) {
    auto it = std::find(pending_.begin(), pending_.end(), request_id);
    if (it == pending_.end()) return {};
    pending_.erase(it);
    PowerRequest& req = log_[request_id];
    req.state = PowerRequest::State::Cancelled;
    req.t_resolved = t;
    CancelResult result;
    result.cancelled = true;
    drain(t, result.unblocked); // removal may unblock younger requests
    return result;
}

PortLedger::PortLedger(int column_count, int ports_per_column) : ports_(ports_per_column) {
    if (column_count < 1) throw ConfigError("PortLedger: need at least one column");
    if (ports_per_column < 1) throw ConfigError("PortLedger: need at least one port per column");
    connected_.resize(static_cast<std::size_t>(column_count));
}

std::optional<int> PortLedger::pick_column() const {
    int best = -1;
    std::size_t best_occ = 0;
    for (std::size_t c = 0; c < connected_.size(); ++c) {
        if (connected_[c].size() >= static_cast<std::size_t>(ports_)) continue;
        if (best < 0 || connected_[c].size() < best_occ) {
            best = static_cast<int>(c);
            best_occ = connected_[c].size();
        }
    }
    if (best < 0) return std::nullopt;
    return best;
}

std::optional<int> PortLedger::try_assign(int ev, SimTime t) {
    if (connect_time(ev)) {
        throw ContractViolation("PortLedger: EV " + std::to_string(ev) + " is already connected");
    }
    auto col = pick_column();
    if (!col) return std::nullopt;
    connected_[static_cast<std::size_t>(*col)].push_back(ev);
    const auto e = static_cast<std::size_t>(ev);
    if (e >= connect_time_.size()) connect_time_.resize(e + 1, -1.0);
    connect_time_[e] = t;
    return col;
}

void PortLedger::enqueue_waiter(int ev) { waitlist_.push_back(ev); }

bool PortLedger::remove_waiter(int ev) {
    auto it = std::find(waitlist_.begin(), waitlist_.end(), ev);
    if (it == waitlist_.end()) return false;
    waitlist_.erase(it);
    return true;
}

std::vector<PortLedger::Assignment> PortLedger::release(int column, int ev, SimTime t) {
    auto& evs = connected_[static_cast<std::size_t>(column)];
    auto it = std::find(evs.begin(), evs.end(), ev);
    if (it == evs.end()) {
        throw ContractViolation("PortLedger: EV " + std::to_string(ev) +
                                " is not connected to column " + std::to_string(column));
    }
    evs.erase(it);
    connect_time_[static_cast<std::size_t>(ev)] = -1.0;

    std::vector<Assignment> assigned;
    while (!waitlist_.empty()) {
        auto col = pick_column();
        if (!col) break;
        const int waiter = waitlist_.front();
        waitlist_.pop_front();
        connected_[static_cast<std::size_t>(*col)].push_back(waiter);
        const auto w = static_cast<std::size_t>(waiter);
        if (w >= connect_time_.size()) connect_time_.resize(w + 1, -1.0);
        connect_time_[w] = t;
        assigned.push_back({waiter, *col});
    }
    return assigned;
}

int PortLedger::occupancy(int column) const {
    return static_cast<int>(connected_[static_cast<std::size_t>(column)].size());
}

std::optional<SimTime> PortLedger::connect_time(int ev) const {
    const auto e = static_cast<std::size_t>(ev);
    if (e < connect_time_.size() && connect_time_[e] >= 0.0) return connect_time_[e];
    return std::nullopt;
}

} // namespace evsim
