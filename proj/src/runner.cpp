#include "evsim/runner.hpp"

#include "evsim/csvio.hpp"
#include "evsim/errors.hpp"
#include "evsim/strfmt.hpp"

#include <json.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace evsim {

namespace fs = std::filesystem;

void ExperimentMatrix::validate() const {
    if (rows.empty()) throw ConfigError("experiment matrix has no rows");
    if (replications < 1) throw ConfigError("replications must be >= 1");
    std::vector<int> ids;
    for (const auto& row : rows) {
        if (row.ev_count < 1) throw ConfigError("matrix row " + std::to_string(row.exp_id) +
                                                ": ev_count must be positive");
        if (row.fcc_count < 0 || row.scc_count < 0 || row.fcc_count + row.scc_count < 1) {
            throw ConfigError("matrix row " + std::to_string(row.exp_id) +
                              ": needs at least one column");
        }
        ids.push_back(row.exp_id);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw ConfigError("experiment ids must be unique");
    }
}

ExperimentMatrix builtin_matrix() {
    ExperimentMatrix m;
    m.replications = 30;
    int id = 1;
    for (int evs : {30, 60, 120}) {
        for (int fcc : {30, 0}) {
            const int scc = fcc == 0 ? 30 : 0;
            for (Strategy strategy : {Strategy::FCFS, Strategy::SHRD}) {
                m.rows.push_back({id++, evs, fcc, scc, strategy});
            }
        }
    }
    m.validate();
    return m;
}

ExperimentMatrix matrix_from_csv_file(const std::string& path, int replications) {
    const CsvTable table = read_csv(path);
    const auto c_id = table.column("exp_id");
    const auto c_ev = table.column("ev_count");
    const auto c_fcc = table.column("fcc_count");
    const auto c_scc = table.column("scc_count");
    const auto c_strategy = table.column("strategy");
    ExperimentMatrix m;
    m.replications = replications;
    for (const auto& row : table.rows) {
        ExperimentRow r;
        r.exp_id = std::stoi(row.at(c_id));
        r.ev_count = std::stoi(row.at(c_ev));
        r.fcc_count = std::stoi(row.at(c_fcc));
        r.scc_count = std::stoi(row.at(c_scc));
        r.strategy = strategy_from_string(row.at(c_strategy));
        m.rows.push_back(r);
    }
    m.validate();
    return m;
}

ScenarioConfig scenario_for_row(const ExperimentRow& row, const ScenarioConfig& base) {
    ScenarioConfig cfg = base;
    cfg.ev_count = row.ev_count;
    cfg.fcc_count = row.fcc_count;
    cfg.scc_count = row.scc_count;
    cfg.strategy = row.strategy;
    cfg.validate();
    return cfg;
}

namespace {

void check_horizon(const SimResult& result, double horizon_s) {
    std::string undeparted;
    for (const auto& trace : result.traces) {
        if (trace.t_leave > horizon_s) {
            if (!undeparted.empty()) undeparted += ", ";
            undeparted += std::to_string(trace.ev);
        }
    }
    if (!undeparted.empty()) {
        throw ConfigError("horizon too short: vehicles still present at the end of the horizon: " +
                          undeparted);
    }
}

} // namespace

SimResult run_experiment_full(const ExperimentRow& row, const ScenarioConfig& base,
                              const TimeSeries& prices, std::uint64_t root_seed, int replication) {
    const ScenarioConfig cfg = scenario_for_row(row, base);
    const std::uint64_t seed = derive_run_seed(root_seed, static_cast<std::uint64_t>(row.exp_id),
                                               static_cast<std::uint64_t>(replication));
    return run_simulation(cfg, seed, prices);
}

RunArtifacts run_experiment(const ExperimentRow& row, const ScenarioConfig& base,
                            const MetricsConfig& metrics, const TimeSeries& prices,
                            std::uint64_t root_seed, int replication) {
    const SimResult result = run_experiment_full(row, base, prices, root_seed, replication);
    check_horizon(result, metrics.horizon_s);
    return compute_artifacts(result, metrics, row.exp_id, replication);
}

MatrixResults run_matrix(const ExperimentMatrix& matrix, const ScenarioConfig& base,
                         const MetricsConfig& metrics, const TimeSeries& prices,
                         std::uint64_t root_seed, int jobs) {
    matrix.validate();
    MatrixResults results;
    results.matrix = matrix;
    results.root_seed = root_seed;
    results.experiments.resize(matrix.rows.size());
    for (std::size_t e = 0; e < matrix.rows.size(); ++e) {
        results.experiments[e].row = matrix.rows[e];
        results.experiments[e].runs.resize(static_cast<std::size_t>(matrix.replications));
    }

    const int total = static_cast<int>(matrix.rows.size()) * matrix.replications;
    std::exception_ptr failure;

#ifdef _OPENMP
    const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#else
    (void)jobs;
#endif
    for (int i = 0; i < total; ++i) {
        const int e = i / matrix.replications;
        const int rep = i % matrix.replications;
        try {
            results.experiments[static_cast<std::size_t>(e)]
                .runs[static_cast<std::size_t>(rep)] =
                run_experiment(matrix.rows[static_cast<std::size_t>(e)], base, metrics, prices,
                               root_seed, rep);
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            {
                if (!failure) failure = std::current_exception();
            }
        }
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

// --- CSV serialization ------------------------------------------------------

void write_ttr_csv(std::ostream& out, const ExperimentResults& exp) {
    out << "exp,seed,ev,ttr_s\n";
    for (const auto& run : exp.runs) {
        for (const auto& ev : run.evs) {
            out << exp.row.exp_id << ',' << run.replication << ',' << ev.ev << ','
                << (ev.ttr_s ? num_str(*ev.ttr_s) : std::string("NA")) << '\n';
        }
    }
}

void write_utilization_csv(std::ostream& out, const ExperimentResults& exp) {
    out << "exp,seed,column,charge,handshake,idle\n";
    for (const auto& run : exp.runs) {
        for (std::size_t c = 0; c < run.per_column.size(); ++c) {
            const auto& u = run.per_column[c];
            out << exp.row.exp_id << ',' << run.replication << ',' << c << ','
                << num_str(u.charge_frac) << ',' << num_str(u.handshake_frac) << ','
                << num_str(u.idle_frac) << '\n';
        }
    }
}

void write_es_bins_csv(std::ostream& out, const ExperimentResults& exp) {
    out << "exp,seed,bin_start_s,mean_w,max_w\n";
    for (const auto& run : exp.runs) {
        for (const auto& bin : run.bins) {
            out << exp.row.exp_id << ',' << run.replication << ',' << num_str(bin.start_s) << ','
                << num_str(bin.mean_w) << ',' << num_str(bin.max_w) << '\n';
        }
    }
}

void write_summary_csv(std::ostream& out, const MatrixResults& results) {
    out << "exp,evs,fcc,scc,strategy,replications,ttr_samples,ttr_mean_s,ttr_p50_s,ttr_p90_s,"
           "served_frac,completed_frac,charge_frac_mean,handshake_frac_mean,idle_frac_mean,"
           "peak_w_median,peak_w_max\n";
    for (const auto& exp : results.experiments) {
        const auto agg = aggregate_runs(exp.runs);
        double ttr_mean = 0.0, ttr_p50 = 0.0, ttr_p90 = 0.0;
        if (!agg.pooled_ttr_s.empty()) {
            for (double v : agg.pooled_ttr_s) ttr_mean += v;
            ttr_mean /= static_cast<double>(agg.pooled_ttr_s.size());
            ttr_p50 = quantile_sorted(agg.pooled_ttr_s, 0.5);
            ttr_p90 = quantile_sorted(agg.pooled_ttr_s, 0.9);
        }
        double served = 0.0, completed = 0.0, charge = 0.0, handshake = 0.0, idle = 0.0;
        std::vector<double> peaks;
        for (const auto& run : exp.runs) {
            served += static_cast<double>(run.served_count);
            completed += static_cast<double>(run.completion_count);
            double c = 0.0, h = 0.0, i = 0.0;
            for (const auto& u : run.per_column) {
                c += u.charge_frac;
                h += u.handshake_frac;
                i += u.idle_frac;
            }
            const auto n_cols = static_cast<double>(run.per_column.size());
            charge += c / n_cols;
            handshake += h / n_cols;
            idle += i / n_cols;
            peaks.push_back(run.es_trace_max_w);
        }
        const auto n_runs = static_cast<double>(exp.runs.size());
        const double n_evs = static_cast<double>(exp.row.ev_count) * n_runs;
        std::sort(peaks.begin(), peaks.end());
        out << exp.row.exp_id << ',' << exp.row.ev_count << ',' << exp.row.fcc_count << ','
            << exp.row.scc_count << ',' << to_string(exp.row.strategy) << ','
            << exp.runs.size() << ',' << agg.pooled_ttr_s.size() << ',' << num_str(ttr_mean)
            << ',' << num_str(ttr_p50) << ',' << num_str(ttr_p90) << ','
            << num_str(served / n_evs) << ',' << num_str(completed / n_evs) << ','
            << num_str(charge / n_runs) << ',' << num_str(handshake / n_runs) << ','
            << num_str(idle / n_runs) << ',' << num_str(quantile_sorted(peaks, 0.5)) << ','
            << num_str(peaks.back()) << '\n';
    }
}

void write_es_trace_csv(std::ostream& out, const SimResult& result) {
    out << "time_s,alloc_watts\n";
    for (const auto& p : result.es_trace) {
        out << num_str(p.time_s) << ',' << num_str(p.alloc_watts) << '\n';
    }
}

void write_grants_csv(std::ostream& out, const SimResult& result) {
    out << "request_id,column,ev,watts,t_req,t_grant_or_cancel,state\n";
    for (const auto& req : result.request_log) {
        const char* state = req.state == PowerRequest::State::Granted    ? "granted"
                            : req.state == PowerRequest::State::Cancelled ? "cancelled"
                                                                          : "pending";
        out << req.id << ',' << req.column << ',' << req.ev << ',' << num_str(req.watts) << ','
            << num_str(req.t_req) << ','
            << (req.state == PowerRequest::State::Pending ? std::string("NA")
                                                          : num_str(req.t_resolved))
            << ',' << state << '\n';
    }
}

void write_events_csv(std::ostream& out, const SimResult& result) {
    out << "time_s,entity,kind,detail\n";
    for (const auto& e : result.events) {
        out << num_str(e.time_s) << ',' << e.entity << ',' << e.kind << ',' << e.detail << '\n';
    }
}

namespace {

std::string exp_dir_name(int exp_id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "exp_%02d", exp_id);
    return buf;
}

std::string rep_dir_name(int replication) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "rep_%03d", replication);
    return buf;
}

template <typename WriteFn>
void write_file(const fs::path& path, WriteFn&& fn) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file: " + path.string());
    fn(out);
}

} // namespace

void write_outputs(const MatrixResults& results, const ScenarioConfig& base,
                   const MetricsConfig& metrics, const TimeSeries& prices,
                   const OutputOptions& options) {
    const fs::path root(options.out_dir);
    fs::create_directories(root);

    nlohmann::json run_config;
    run_config["scenario"] = nlohmann::json::parse(scenario_to_json_text(base));
    run_config["metrics"] = {{"e_star_ws", metrics.e_star_ws},
                             {"bin_width_s", metrics.bin_width_s},
                             {"horizon_s", metrics.horizon_s}};
    run_config["root_seed"] = results.root_seed;
    run_config["replications"] = results.matrix.replications;
    write_file(root / "run_config.json",
               [&](std::ostream& out) { out << run_config.dump(2) << "\n"; });

    write_file(root / "prices.csv", [&](std::ostream& out) { write_series(out, prices); });
    if (options.pv) {
        write_file(root / "pv.csv", [&](std::ostream& out) { write_series(out, *options.pv); });
    }
    write_file(root / "summary.csv",
               [&](std::ostream& out) { write_summary_csv(out, results); });

    for (const auto& exp : results.experiments) {
        const fs::path dir = root / exp_dir_name(exp.row.exp_id);
        fs::create_directories(dir);
        write_file(dir / "ttr.csv", [&](std::ostream& out) { write_ttr_csv(out, exp); });
        write_file(dir / "utilization.csv",
                   [&](std::ostream& out) { write_utilization_csv(out, exp); });
        write_file(dir / "es_power_bins.csv",
                   [&](std::ostream& out) { write_es_bins_csv(out, exp); });

        const int export_reps = options.export_all_traces ? results.matrix.replications : 1;
        for (int rep = 0; rep < export_reps; ++rep) {
            const SimResult sim = run_experiment_full(exp.row, base, prices, results.root_seed, rep);
            const fs::path rep_dir = dir / rep_dir_name(rep);
            fs::create_directories(rep_dir);
            write_file(rep_dir / "es_trace.csv",
                       [&](std::ostream& out) { write_es_trace_csv(out, sim); });
            write_file(rep_dir / "grants.csv",
                       [&](std::ostream& out) { write_grants_csv(out, sim); });
            write_file(rep_dir / "events.csv",
                       [&](std::ostream& out) { write_events_csv(out, sim); });
        }
    }
}

} // namespace evsim
