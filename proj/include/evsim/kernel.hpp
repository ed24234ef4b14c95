#pragma once

#include "evsim/errors.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

namespace evsim {

/// Simulation time in seconds since simulation start (00:00).
using SimTime = double;

using EventId = std::uint64_t;

/// Deterministic event calendar: events are delivered in strict
/// (fire_time, insertion sequence) order, so simultaneous events always
/// replay identically. Cancellation is lazy; tombstones are skipped on pop.
template <typename Payload>
class EventCalendar {
public:
    struct Fired {
        SimTime time;
        EventId id;
        Payload payload;
    };

    /// Enqueue an event. Scheduling in the past is a contract violation.
    EventId schedule(SimTime at, Payload payload) {
        if (!std::isfinite(at) || at < now_) {
            throw ContractViolation("schedule: fire time " + std::to_string(at) +
                                    " is before current clock " + std::to_string(now_));
        }
        const EventId id = next_id_++;
        heap_.push(HeapEntry{at, id});
        live_.emplace(id, std::move(payload));
        return id;
    }

    /// Returns true if the event was live and is now inert; false if it
    /// already fired or was already cancelled.
    bool cancel(EventId id) { return live_.erase(id) > 0; }

    /// Pop the next live event, advancing the clock to its fire time.
    /// Returns std::nullopt when the calendar is exhausted.
    std::optional<Fired> advance() {
        while (!heap_.empty()) {
            HeapEntry top = heap_.top();
            heap_.pop();
            auto it = live_.find(top.id);
            if (it == live_.end()) {
                continue; // cancelled
            }
            Fired fired{top.at, top.id, std::move(it->second)};
            live_.erase(it);
            now_ = top.at;
            return fired;
        }
        return std::nullopt;
    }

    SimTime now() const { return now_; }
    std::size_t live_count() const { return live_.size(); }

private:
    struct HeapEntry {
        SimTime at;
        EventId id;
    };
    struct Later {
        bool operator()(const HeapEntry& a, const HeapEntry& b) const {
            if (a.at != b.at) return a.at > b.at;
            return a.id > b.id;
        }
    };

    std::priority_queue<HeapEntry, std::vector<HeapEntry>, Later> heap_;
    std::unordered_map<EventId, Payload> live_;
    EventId next_id_ = 0;
    SimTime now_ = 0.0;
};

/// Structured stream label. Streams with distinct labels are statistically
/// independent; agent-level randomness never depends on event interleaving.
struct StreamId {
    std::uint64_t experiment = 0;
    std::uint64_t replication = 0;
    std::uint64_t agent = 0;
    std::uint64_t purpose = 0;
};

namespace detail {
// SplitMix64 finalizer (Steele/Lea/Flood; Vigna's fixed-increment variant).
constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
} // namespace detail

/// Splittable counter-based uniform generator. The state is derived by
/// hashing (root_seed, stream_id); the sample sequence is a SplitMix64 walk.
class RngStream {
public:
    RngStream(std::uint64_t root_seed, StreamId id) {
        state_ = detail::mix64(root_seed + detail::kGoldenGamma);
        absorb(id.experiment, 0xD1342543DE82EF95ULL);
        absorb(id.replication, 0xAF251AF3B0F025B5ULL);
        absorb(id.agent, 0xB564EF22EC7AECE5ULL);
        absorb(id.purpose, 0xF7C2EBC08F67F2B5ULL);
    }

    std::uint64_t next_u64() {
        state_ += detail::kGoldenGamma;
        return detail::mix64(state_);
    }

    /// Uniform real in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform real in [lo, hi). Degenerate lo == hi yields lo.
    double uniform(double lo, double hi) {
        double v = lo + uniform01() * (hi - lo);
        if (v >= hi && hi > lo) v = std::nextafter(hi, lo);
        return v;
    }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        // Rejection-free multiply-shift; bias is negligible for n << 2^64.
        return static_cast<std::uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

private:
    void absorb(std::uint64_t component, std::uint64_t salt) {
        state_ = detail::mix64(state_ ^ (component * salt + detail::kGoldenGamma));
    }

    std::uint64_t state_;
};

/// Deterministic per-run seed for an (experiment, replication) pair.
inline std::uint64_t derive_run_seed(std::uint64_t root_seed, std::uint64_t experiment,
                                     std::uint64_t replication) {
    std::uint64_t z = detail::mix64(root_seed + detail::kGoldenGamma);
    z = detail::mix64(z ^ (experiment * 0xD1342543DE82EF95ULL + detail::kGoldenGamma));
    z = detail::mix64(z ^ (replication * 0xAF251AF3B0F025B5ULL + detail::kGoldenGamma));
    return z;
}

} // namespace evsim
