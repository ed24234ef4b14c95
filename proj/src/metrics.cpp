#include "evsim/metrics.hpp"

#include "evsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace evsim {

std::optional<double> ttr(const EVTrace& trace, double e_star_ws) {
    if (e_star_ws <= 0.0) throw ConfigError("ttr: reference energy must be positive");
    double cum = 0.0;
    for (const auto& ep : trace.episodes) {
        const double energy = ep.watts * (ep.end_s - ep.start_s);
        if (cum + energy >= e_star_ws && ep.watts > 0.0) {
            const SimTime t_cross = ep.start_s + (e_star_ws - cum) / ep.watts;
            return t_cross - trace.t_arr;
        }
        cum += energy;
    }
    return std::nullopt;
}

Ecdf::Ecdf(std::vector<double> samples) : sorted_(std::move(samples)) {
    if (sorted_.empty()) throw ConfigError("Ecdf: at least one sample is required");
    std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double t) const {
    auto it = std::upper_bound(sorted_.begin(), sorted_.end(), t);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double Ecdf::quantile(double q) const { return quantile_sorted(sorted_, q); }

std::vector<std::pair<double, double>> pdf_estimate(const std::vector<double>& samples,
                                                    double bandwidth, int grid_points) {
    if (samples.empty() || grid_points < 2) return {};
    std::vector<double> v = samples;
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());

    double h = bandwidth;
    if (h <= 0.0) {
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        const double sd = std::sqrt(var / std::max(1.0, n - 1.0));
        const double iqr = quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
        double spread = sd;
        if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
        if (spread <= 0.0) spread = std::max(1.0, std::abs(v.front()) * 1e-3);
        h = 0.9 * spread * std::pow(n, -0.2);
    }

    const double lo = v.front() - 3.0 * h;
    const double hi = v.back() + 3.0 * h;
    const double step = (hi - lo) / (grid_points - 1);
    const double norm = 1.0 / (n * h * std::sqrt(2.0 * M_PI));

    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(grid_points));
    for (int i = 0; i < grid_points; ++i) {
        const double x = lo + step * i;
        double density = 0.0;
        for (double xi : v) {
            const double z = (x - xi) / h;
            density += std::exp(-0.5 * z * z);
        }
        out.emplace_back(x, density * norm);
    }
    return out;
}

Utilization utilization(const std::vector<StateLogEntry>& state_log, double horizon_s) {
    if (state_log.empty() || state_log.front().time_s > 0.0) {
        throw ContractViolation("utilization: state log must start at t=0");
    }
    if (horizon_s <= 0.0) throw ConfigError("utilization: horizon must be positive");

    double acc[3] = {0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < state_log.size(); ++i) {
        const SimTime seg_start = state_log[i].time_s;
        const SimTime seg_end = (i + 1 < state_log.size()) ? state_log[i + 1].time_s : horizon_s;
        if (seg_end < seg_start) throw ContractViolation("utilization: state log not time-ordered");
        const SimTime lo = std::max<SimTime>(seg_start, 0.0);
        const SimTime hi = std::min<SimTime>(seg_end, horizon_s);
        if (hi > lo) acc[static_cast<int>(state_log[i].state)] += hi - lo;
    }
    Utilization u;
    u.idle_frac = acc[static_cast<int>(ColumnOpState::Idle)] / horizon_s;
    u.handshake_frac = acc[static_cast<int>(ColumnOpState::Handshake)] / horizon_s;
    u.charge_frac = acc[static_cast<int>(ColumnOpState::Charging)] / horizon_s;
    return u;
}

std::vector<PowerBin> bin_power(const std::vector<EsTracePoint>& trace, double bin_width_s,
                                double horizon_s) {
    if (bin_width_s <= 0.0 || horizon_s <= 0.0) {
        throw ConfigError("bin_power: bin width and horizon must be positive");
    }
    const auto bin_count = static_cast<std::size_t>(std::ceil(horizon_s / bin_width_s));
    std::vector<PowerBin> bins(bin_count);
    std::vector<double> integral(bin_count, 0.0);
    for (std::size_t b = 0; b < bin_count; ++b) bins[b].start_s = bin_width_s * static_cast<double>(b);

    auto add_segment = [&](SimTime a, SimTime b, double value) {
        a = std::max<SimTime>(a, 0.0);
        b = std::min<SimTime>(b, horizon_s);
        if (b <= a) return; // zero-width transients are never observed
        auto first = static_cast<std::size_t>(a / bin_width_s);
        for (std::size_t k = first; k < bin_count; ++k) {
            const SimTime bs = bins[k].start_s;
            const SimTime be = std::min<SimTime>(bs + bin_width_s, horizon_s);
            const SimTime lo = std::max(a, bs);
            const SimTime hi = std::min(b, be);
            if (hi <= lo) break;
            integral[k] += value * (hi - lo);
            bins[k].max_w = std::max(bins[k].max_w, value);
        }
    };

    if (trace.empty()) return bins;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const SimTime seg_start = trace[i].time_s;
        const SimTime seg_end = (i + 1 < trace.size()) ? trace[i + 1].time_s : horizon_s;
        add_segment(seg_start, seg_end, trace[i].alloc_watts);
    }
    for (std::size_t k = 0; k < bin_count; ++k) {
        const SimTime be = std::min<SimTime>(bins[k].start_s + bin_width_s, horizon_s);
        const double width = be - bins[k].start_s;
        bins[k].mean_w = width > 0.0 ? integral[k] / width : 0.0;
    }
    return bins;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw ConfigError("quantile: empty sample");
    if (q <= 0.0) return sorted.front();
    if (q >= 1.0) return sorted.back();
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(h);
    if (i + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(i);
    return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

FiveNum five_number(std::vector<double> values) {
    if (values.empty()) throw ConfigError("five_number: empty sample");
    std::sort(values.begin(), values.end());
    return {values.front(), quantile_sorted(values, 0.25), quantile_sorted(values, 0.5),
            quantile_sorted(values, 0.75), values.back()};
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ConfigError("ks_distance: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

RunArtifacts compute_artifacts(const SimResult& result, const MetricsConfig& config, int exp_id,
                               int replication) {
    RunArtifacts art;
    art.exp_id = exp_id;
    art.replication = replication;

    std::vector<int> occupants(result.columns.size(), 0);
    for (const auto& trace : result.traces) {
        if (trace.column) ++occupants[static_cast<std::size_t>(*trace.column)];
    }

    for (const auto& trace : result.traces) {
        EvMetrics m;
        m.ev = trace.ev;
        m.served = trace.served;
        m.completed = trace.completed;
        m.ttr_s = ttr(trace, config.e_star_ws);
        if (trace.column) {
            m.column = *trace.column;
            m.sole_occupant = occupants[static_cast<std::size_t>(*trace.column)] == 1;
            m.column_rating_watts = result.columns[static_cast<std::size_t>(*trace.column)].rating_watts;
        }
        art.served_count += trace.served ? 1 : 0;
        art.completion_count += trace.completed ? 1 : 0;
        art.evs.push_back(m);
    }

    art.per_column.reserve(result.columns.size());
    for (const auto& col : result.columns) {
        art.per_column.push_back(utilization(col.state_log, config.horizon_s));
    }

    art.bins = bin_power(result.es_trace, config.bin_width_s, config.horizon_s);

    art.es_trace_min_w = 0.0;
    art.es_trace_max_w = 0.0;
    for (const auto& p : result.es_trace) {
        art.es_trace_min_w = std::min(art.es_trace_min_w, p.alloc_watts);
        art.es_trace_max_w = std::max(art.es_trace_max_w, p.alloc_watts);
    }

    std::vector<const PowerRequest*> granted;
    for (const auto& req : result.request_log) {
        if (req.state == PowerRequest::State::Granted) granted.push_back(&req);
    }
    std::sort(granted.begin(), granted.end(),
              [](const PowerRequest* a, const PowerRequest* b) { return a->grant_seq < b->grant_seq; });
    for (std::size_t i = 1; i < granted.size(); ++i) {
        if (granted[i]->t_req < granted[i - 1]->t_req) {
            art.grant_order_ok = false;
            break;
        }
    }
    return art;
}

AggregateSummary aggregate_runs(const std::vector<RunArtifacts>& runs) {
    if (runs.empty()) throw ConfigError("aggregate_runs: no runs");
    AggregateSummary agg;
    agg.exp_id = runs.front().exp_id;
    const std::size_t bin_count = runs.front().bins.size();
    for (const auto& run : runs) {
        if (run.exp_id != agg.exp_id) throw ConfigError("aggregate_runs: mixed experiment ids");
        if (run.bins.size() != bin_count) throw ConfigError("aggregate_runs: mixed bin layouts");
    }
    agg.bin_starts.reserve(bin_count);
    agg.bin_mean_w.reserve(bin_count);
    for (std::size_t k = 0; k < bin_count; ++k) {
        agg.bin_starts.push_back(runs.front().bins[k].start_s);
        std::vector<double> values;
        values.reserve(runs.size());
        for (const auto& run : runs) values.push_back(run.bins[k].mean_w);
        agg.bin_mean_w.push_back(five_number(std::move(values)));
    }
    for (const auto& run : runs) {
        for (const auto& ev : run.evs) {
            if (ev.ttr_s) agg.pooled_ttr_s.push_back(*ev.ttr_s);
        }
    }
    std::sort(agg.pooled_ttr_s.begin(), agg.pooled_ttr_s.end());
    return agg;
}

} // namespace evsim
