#pragma once

#include "evsim/protocol.hpp"

#include <optional>
#include <vector>

namespace evsim {

/// Reference energy for the time-to-receive KPI: 9.36 kWh. Scenario
/// dependent; override via MetricsConfig / the CLI.
constexpr double kDefaultEStarWs = 33'696'000.0;

struct MetricsConfig {
    double e_star_ws = kDefaultEStarWs;
    double bin_width_s = 900.0;
    double horizon_s = 86'400.0;
};

/// Smallest time after arrival at which the cumulative delivered energy
/// reaches e_star_ws, interpolated exactly within the crossing episode.
/// std::nullopt if the threshold is never reached.
std::optional<double> ttr(const EVTrace& trace, double e_star_ws);

/// Right-continuous empirical CDF.
class Ecdf {
public:
    explicit Ecdf(std::vector<double> samples);
    double operator()(double t) const;
    double quantile(double q) const;
    const std::vector<double>& sorted() const { return sorted_; }

private:
    std::vector<double> sorted_;
};

/// Gaussian-kernel density estimate on a regular grid. bandwidth <= 0
/// selects a Silverman-style rule.
std::vector<std::pair<double, double>> pdf_estimate(const std::vector<double>& samples,
                                                    double bandwidth = 0.0,
                                                    int grid_points = 256);

struct Utilization {
    double charge_frac = 0.0;
    double handshake_frac = 0.0;
    double idle_frac = 1.0;
};

/// Exact time share of each operational state over [0, horizon].
Utilization utilization(const std::vector<StateLogEntry>& state_log, double horizon_s);

struct PowerBin {
    SimTime start_s = 0.0;
    double mean_w = 0.0;
    double max_w = 0.0;
};

/// Per-bin time-weighted mean and max of the allocation step function.
std::vector<PowerBin> bin_power(const std::vector<EsTracePoint>& trace, double bin_width_s,
                                double horizon_s);

struct FiveNum {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

/// Quantile by linear interpolation of order statistics (R type 7).
double quantile_sorted(const std::vector<double>& sorted, double q);
FiveNum five_number(std::vector<double> values);

/// Two-sample Kolmogorov-Smirnov distance sup_t |F_a(t) - F_b(t)|.
double ks_distance(std::vector<double> a, std::vector<double> b);

struct EvMetrics {
    int ev = -1;
    bool served = false;
    bool completed = false;
    std::optional<double> ttr_s;
    int column = -1;
    bool sole_occupant = false; // no other vehicle ever connected to its column
    double column_rating_watts = 0.0;
};

/// Per-run metric bundle.
struct RunArtifacts {
    int exp_id = 0;
    int replication = 0;
    std::vector<EvMetrics> evs;
    std::vector<Utilization> per_column;
    std::vector<PowerBin> bins;
    int served_count = 0;
    int completion_count = 0;
    double es_trace_min_w = 0.0;
    double es_trace_max_w = 0.0;
    bool grant_order_ok = true; // grants (never-cancelled) sorted by request time
};

RunArtifacts compute_artifacts(const SimResult& result, const MetricsConfig& config, int exp_id,
                               int replication);

struct AggregateSummary {
    int exp_id = 0;
    std::vector<SimTime> bin_starts;
    std::vector<FiveNum> bin_mean_w; // distribution over runs of each bin's mean
    std::vector<double> pooled_ttr_s; // sorted
};

/// Boxplot-ready per-bin five-number summaries plus pooled TTR samples.
/// All runs must share the experiment id and bin layout.
AggregateSummary aggregate_runs(const std::vector<RunArtifacts>& runs);

} // namespace evsim
