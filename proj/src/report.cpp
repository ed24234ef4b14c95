#include "evsim/report.hpp"

#include "evsim/csvio.hpp"
#include "evsim/errors.hpp"
#include "evsim/metrics.hpp"
#include "evsim/signals.hpp"
#include "evsim/strfmt.hpp"
#include "evsim/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>

namespace evsim {

namespace fs = std::filesystem;

namespace {

struct ExpMeta {
    int exp_id = 0;
    int evs = 0;
    int fcc = 0;
    int scc = 0;
    std::string strategy;
    double charge_mean = 0.0;
    double handshake_mean = 0.0;
    double idle_mean = 0.0;

    bool is_fcc() const { return fcc > 0; }
};

std::string exp_dir_name(int exp_id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "exp_%02d", exp_id);
    return buf;
}

std::vector<ExpMeta> load_summary(const fs::path& in_dir) {
    const CsvTable t = read_csv((in_dir / "summary.csv").string());
    std::vector<ExpMeta> out;
    const auto c_exp = t.column("exp");
    const auto c_evs = t.column("evs");
    const auto c_fcc = t.column("fcc");
    const auto c_scc = t.column("scc");
    const auto c_strategy = t.column("strategy");
    const auto c_charge = t.column("charge_frac_mean");
    const auto c_handshake = t.column("handshake_frac_mean");
    const auto c_idle = t.column("idle_frac_mean");
    for (const auto& row : t.rows) {
        ExpMeta m;
        m.exp_id = std::stoi(row.at(c_exp));
        m.evs = std::stoi(row.at(c_evs));
        m.fcc = std::stoi(row.at(c_fcc));
        m.scc = std::stoi(row.at(c_scc));
        m.strategy = row.at(c_strategy);
        m.charge_mean = std::stod(row.at(c_charge));
        m.handshake_mean = std::stod(row.at(c_handshake));
        m.idle_mean = std::stod(row.at(c_idle));
        out.push_back(m);
    }
    return out;
}

std::vector<double> load_ttr_samples(const fs::path& in_dir, int exp_id) {
    const CsvTable t = read_csv((in_dir / exp_dir_name(exp_id) / "ttr.csv").string());
    const auto c_ttr = t.column("ttr_s");
    std::vector<double> out;
    for (const auto& row : t.rows) {
        const std::string& cell = row.at(c_ttr);
        if (cell != "NA") out.push_back(std::stod(cell));
    }
    std::sort(out.begin(), out.end());
    return out;
}

// bin start -> per-seed mean watts
std::map<double, std::vector<double>> load_bins(const fs::path& in_dir, int exp_id) {
    const CsvTable t = read_csv((in_dir / exp_dir_name(exp_id) / "es_power_bins.csv").string());
    const auto c_start = t.column("bin_start_s");
    const auto c_mean = t.column("mean_w");
    std::map<double, std::vector<double>> out;
    for (const auto& row : t.rows) {
        out[std::stod(row.at(c_start))].push_back(std::stod(row.at(c_mean)));
    }
    return out;
}

const char* ev_color(int evs) {
    switch (evs) {
        case 30: return "#1b9e77";
        case 60: return "#7570b3";
        default: return "#d95f02";
    }
}

std::string strategy_dash(const std::string& strategy) {
    return strategy == "SHRD" ? "6,4" : "";
}

struct Frame {
    AxisScale x, y;
    double left, right, top, bottom;
};

Frame draw_frame(SvgCanvas& svg, double x_lo, double x_hi, double y_lo, double y_hi,
                 const std::string& title, const std::string& x_label,
                 const std::string& y_label) {
    Frame f;
    f.left = 70.0;
    f.right = svg.width() - 20.0;
    f.top = 40.0;
    f.bottom = svg.height() - 55.0;
    f.x = {x_lo, x_hi, f.left, f.right};
    f.y = {y_lo, y_hi, f.bottom, f.top};

    svg.rect(f.left, f.top, f.right - f.left, f.bottom - f.top, "none", "#333333");
    for (double t : nice_ticks(x_lo, x_hi)) {
        const double px = f.x(t);
        svg.line(px, f.bottom, px, f.bottom + 5, "#333333");
        svg.line(px, f.top, px, f.bottom, "#eeeeee");
        svg.text(px, f.bottom + 18, tick_label(t), 11, "middle");
    }
    for (double t : nice_ticks(y_lo, y_hi)) {
        const double py = f.y(t);
        svg.line(f.left - 5, py, f.left, py, "#333333");
        svg.line(f.left, py, f.right, py, "#eeeeee");
        svg.text(f.left - 8, py + 4, tick_label(t), 11, "end");
    }
    svg.text((f.left + f.right) / 2, 22, title, 14, "middle");
    svg.text((f.left + f.right) / 2, svg.height() - 12, x_label, 12, "middle");
    svg.text(18, (f.top + f.bottom) / 2, y_label, 12, "middle", "#000000", -90.0);
    return f;
}

void legend_entry(SvgCanvas& svg, double x, double y, const std::string& color,
                  const std::string& dash, const std::string& label) {
    svg.line(x, y - 4, x + 26, y - 4, color, 2.0, dash);
    svg.text(x + 32, y, label, 11);
}

void draw_ttr_distribution(const fs::path& in_dir, const fs::path& out_path,
                           const std::vector<ExpMeta>& metas, bool fcc, bool cumulative,
                           double bandwidth, std::vector<std::string>& written) {
    std::vector<std::pair<ExpMeta, std::vector<double>>> series;
    double x_hi = 0.0, y_hi = cumulative ? 1.0 : 0.0;
    for (const auto& m : metas) {
        if (m.is_fcc() != fcc) continue;
        auto samples = load_ttr_samples(in_dir, m.exp_id);
        if (samples.empty()) {
            std::fprintf(stderr, "report: no TTR samples for experiment %d, curve skipped\n",
                         m.exp_id);
            continue;
        }
        x_hi = std::max(x_hi, samples.back());
        series.emplace_back(m, std::move(samples));
    }
    if (series.empty()) {
        std::fprintf(stderr, "report: %s skipped (no samples)\n", out_path.string().c_str());
        return;
    }

    std::vector<std::pair<ExpMeta, std::vector<std::pair<double, double>>>> curves;
    for (const auto& [m, samples] : series) {
        std::vector<std::pair<double, double>> pts;
        if (cumulative) {
            const double n = static_cast<double>(samples.size());
            pts.emplace_back(samples.front(), 0.0);
            for (std::size_t i = 0; i < samples.size(); ++i) {
                pts.emplace_back(samples[i], static_cast<double>(i) / n);
                pts.emplace_back(samples[i], static_cast<double>(i + 1) / n);
            }
            pts.emplace_back(x_hi * 1.02, 1.0);
        } else {
            for (const auto& [x, d] : pdf_estimate(samples, bandwidth)) {
                pts.emplace_back(x, d);
                y_hi = std::max(y_hi, d);
            }
        }
        curves.emplace_back(m, std::move(pts));
    }

    SvgCanvas svg(760, 480);
    const std::string infra = fcc ? "FCC" : "SCC";
    Frame f = draw_frame(svg, 0.0, x_hi * 1.05, 0.0, y_hi * (cumulative ? 1.0 : 1.08),
                         (cumulative ? "TTR cumulative distribution, " : "TTR density, ") + infra +
                             " configurations",
                         "TTR (s)", cumulative ? "F(t)" : "density");
    for (const auto& [m, pts] : curves) {
        std::vector<std::pair<double, double>> px;
        px.reserve(pts.size());
        for (const auto& [x, y] : pts) px.emplace_back(f.x(x), f.y(y));
        svg.polyline(px, ev_color(m.evs), 1.8, strategy_dash(m.strategy));
    }
    double ly = f.top + 16;
    for (const auto& [m, pts] : curves) {
        (void)pts;
        legend_entry(svg, f.right - 170, ly, ev_color(m.evs), strategy_dash(m.strategy),
                     std::to_string(m.evs) + " EVs, " + m.strategy);
        ly += 16;
    }
    svg.save(out_path.string());
    written.push_back(out_path.string());
}

void draw_utilization(const fs::path& out_path, const std::vector<ExpMeta>& metas,
                      std::vector<std::string>& written) {
    SvgCanvas svg(760, 70.0 + 26.0 * static_cast<double>(metas.size()));
    const double left = 170, right = svg.width() - 30, top = 50;
    svg.text((left + right) / 2, 24, "Charging column utilization profiles", 14, "middle");
    for (double pct : {0.0, 25.0, 50.0, 75.0, 100.0}) {
        const double x = left + (right - left) * pct / 100.0;
        svg.text(x, top - 8, num_str(pct) + "%", 10, "middle");
        svg.line(x, top - 4, x, top + 26.0 * static_cast<double>(metas.size()), "#cccccc");
    }
    double y = top;
    for (const auto& m : metas) {
        const double w = right - left;
        const double w_charge = w * m.charge_mean;
        const double w_handshake = w * m.handshake_mean;
        const double w_idle = w * m.idle_mean;
        svg.rect(left, y, w_charge, 18, "#2c7fb8");
        svg.rect(left + w_charge, y, w_handshake, 18, "#fdae61");
        svg.rect(left + w_charge + w_handshake, y, w_idle, 18, "#d9d9d9");
        svg.text(left - 8, y + 13,
                 "Exp " + std::to_string(m.exp_id) + " (" + std::to_string(m.evs) + " EV, " +
                     (m.is_fcc() ? "FCC" : "SCC") + ", " + m.strategy + ")",
                 10, "end");
        y += 26;
    }
    legend_entry(svg, left, y + 16, "#2c7fb8", "", "charge");
    legend_entry(svg, left + 110, y + 16, "#fdae61", "", "handshake");
    legend_entry(svg, left + 250, y + 16, "#d9d9d9", "", "idle");
    svg.save(out_path.string());
    written.push_back(out_path.string());
}

void draw_power_boxes(const fs::path& in_dir, const fs::path& out_path,
                      const std::vector<ExpMeta>& metas, int evs,
                      std::vector<std::string>& written) {
    struct Series {
        ExpMeta meta;
        std::map<double, std::vector<double>> bins;
    };
    std::vector<Series> series;
    double x_lo = 1e18, x_hi = 0.0, y_hi = 0.0, bin_w = 900.0;
    for (const auto& m : metas) {
        if (m.evs != evs) continue;
        Series s{m, load_bins(in_dir, m.exp_id)};
        std::vector<double> starts;
        for (const auto& [start, values] : s.bins) starts.push_back(start);
        for (std::size_t i = 1; i < starts.size(); ++i) bin_w = starts[i] - starts[i - 1];
        for (const auto& [start, values] : s.bins) {
            const double vmax = *std::max_element(values.begin(), values.end());
            if (vmax > 0.0) {
                x_lo = std::min(x_lo, start);
                x_hi = std::max(x_hi, start + bin_w);
                y_hi = std::max(y_hi, vmax);
            }
        }
        series.push_back(std::move(s));
    }
    if (series.empty() || x_hi <= x_lo) return;
    x_lo = std::max(0.0, x_lo - bin_w);
    x_hi += bin_w;

    SvgCanvas svg(980, 480);
    Frame f = draw_frame(svg, x_lo, x_hi, 0.0, y_hi * 1.1,
                         "Energy Sandbox power, 15-min bins, " + std::to_string(evs) + " EVs",
                         "time (s)", "allocated power (W)");
    const double slot = (f.x(x_lo + bin_w) - f.x(x_lo)) / static_cast<double>(series.size() + 1);
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const std::string fill = s.meta.is_fcc() ? "#fdc086" : "#a6d9a6";
        const std::string stroke = s.meta.strategy == "SHRD" ? "#4d4d4d" : "#000000";
        const std::string dash = strategy_dash(s.meta.strategy);
        for (const auto& [start, values] : s.bins) {
            if (start + bin_w <= x_lo || start >= x_hi) continue;
            FiveNum fn = five_number(values);
            if (fn.max <= 0.0) continue;
            const double cx = f.x(start) + slot * (static_cast<double>(si) + 1.0);
            const double bw = slot * 0.7;
            svg.line(cx, f.y(fn.min), cx, f.y(fn.q1), stroke, 1.0, dash);
            svg.line(cx, f.y(fn.q3), cx, f.y(fn.max), stroke, 1.0, dash);
            svg.rect(cx - bw / 2, f.y(fn.q3), bw, f.y(fn.q1) - f.y(fn.q3), fill, stroke, 1.0);
            svg.line(cx - bw / 2, f.y(fn.median), cx + bw / 2, f.y(fn.median), stroke, 1.6);
        }
    }
    double ly = f.top + 16;
    for (const auto& s : series) {
        legend_entry(svg, f.right - 170, ly, s.meta.is_fcc() ? "#fdc086" : "#a6d9a6",
                     strategy_dash(s.meta.strategy),
                     std::string(s.meta.is_fcc() ? "FCC" : "SCC") + ", " + s.meta.strategy);
        ly += 16;
    }
    svg.save(out_path.string());
    written.push_back(out_path.string());
}

void draw_overlay(const fs::path& in_dir, const fs::path& out_path, int overlay_exp,
                  std::vector<std::string>& written) {
    const fs::path prices_path = in_dir / "prices.csv";
    const fs::path pv_path = in_dir / "pv.csv";
    const fs::path trace_path = in_dir / exp_dir_name(overlay_exp) / "rep_000" / "es_trace.csv";
    for (const fs::path& p : {prices_path, pv_path, trace_path}) {
        if (!fs::exists(p)) {
            throw IoError("overlay input missing: " + p.string() +
                          (p == pv_path ? " (run with --pv to record a PV series)" : ""));
        }
    }
    const TimeSeries prices = load_series_file(prices_path.string());
    const TimeSeries pv = load_series_file(pv_path.string());
    const CsvTable trace = read_csv(trace_path.string());
    const auto c_t = trace.column("time_s");
    const auto c_w = trace.column("alloc_watts");

    std::vector<std::pair<double, double>> grid;
    double w_hi = 0.0;
    for (const auto& row : trace.rows) {
        grid.emplace_back(std::stod(row.at(c_t)), std::stod(row.at(c_w)));
        w_hi = std::max(w_hi, grid.back().second);
    }
    const double x_hi = 86'400.0;
    for (std::size_t i = 0; i < pv.size(); ++i) w_hi = std::max(w_hi, pv.values()[i]);
    double p_hi = 0.0;
    for (std::size_t i = 0; i < prices.size(); ++i) p_hi = std::max(p_hi, prices.values()[i]);

    SvgCanvas svg(980, 480);
    Frame f = draw_frame(svg, 0.0, x_hi, 0.0, w_hi * 1.1,
                         "Grid usage vs PV availability and energy price (experiment " +
                             std::to_string(overlay_exp) + ", replication 0)",
                         "time (s)", "power (W)");
    AxisScale price_scale{0.0, p_hi * 1.1, f.bottom, f.top};

    auto staircase = [&](const std::vector<double>& ts, const std::vector<double>& vs,
                         const AxisScale& ys) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const double x0 = std::max(0.0, ts[i]);
            const double x1 = (i + 1 < ts.size()) ? ts[i + 1] : x_hi;
            if (x1 < 0.0) continue;
            pts.emplace_back(f.x(x0), ys(vs[i]));
            pts.emplace_back(f.x(std::min(x1, x_hi)), ys(vs[i]));
        }
        return pts;
    };

    std::vector<double> gt, gw;
    for (const auto& [t, w] : grid) {
        gt.push_back(t);
        gw.push_back(w);
    }
    svg.polyline(staircase(gt, gw, f.y), "#2c7fb8", 1.6);
    svg.polyline(staircase(pv.breakpoints(), pv.values(), f.y), "#ff8c00", 1.6);
    svg.polyline(staircase(prices.breakpoints(), prices.values(), price_scale), "#555555", 1.4,
                 "5,4");
    for (double t : nice_ticks(0.0, p_hi * 1.1, 4)) {
        svg.text(f.right + 4, price_scale(t) + 4, num_str(t), 10, "start", "#555555");
    }
    legend_entry(svg, f.left + 16, f.top + 16, "#2c7fb8", "", "ES allocation (W)");
    legend_entry(svg, f.left + 16, f.top + 32, "#ff8c00", "", "PV available (W)");
    legend_entry(svg, f.left + 16, f.top + 48, "#555555", "5,4", "price (currency/kWh, right axis)");
    svg.save(out_path.string());
    written.push_back(out_path.string());
}

} // namespace

std::vector<std::string> emit_report(const ReportOptions& options) {
    const fs::path in_dir(options.in_dir);
    const fs::path out_dir(options.out_dir);
    if (!fs::exists(in_dir / "summary.csv")) {
        throw IoError("not a run output tree (missing " + (in_dir / "summary.csv").string() + ")");
    }
    fs::create_directories(out_dir);
    const auto metas = load_summary(in_dir);

    std::vector<std::string> written;
    for (bool fcc : {true, false}) {
        const std::string infra = fcc ? "fcc" : "scc";
        draw_ttr_distribution(in_dir, out_dir / ("ttr_cdf_" + infra + ".svg"), metas, fcc, true,
                              options.kde_bandwidth_s, written);
        draw_ttr_distribution(in_dir, out_dir / ("ttr_density_" + infra + ".svg"), metas, fcc,
                              false, options.kde_bandwidth_s, written);
    }
    draw_utilization(out_dir / "utilization.svg", metas, written);
    std::vector<int> ev_counts;
    for (const auto& m : metas) {
        if (std::find(ev_counts.begin(), ev_counts.end(), m.evs) == ev_counts.end()) {
            ev_counts.push_back(m.evs);
        }
    }
    for (int evs : ev_counts) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "es_power_bins_%03d.svg", evs);
        draw_power_boxes(in_dir, out_dir / buf, metas, evs, written);
    }
    draw_overlay(in_dir, out_dir / "overlay.svg", options.overlay_exp, written);
    return written;
}

} // namespace evsim
