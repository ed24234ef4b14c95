#include "evsim/errors.hpp"
#include "evsim/metrics.hpp"
#include "evsim/oracle.hpp"
#include "evsim/report.hpp"
#include "evsim/runner.hpp"
#include "evsim/strfmt.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace evsim;

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct RunOptions {
    std::string matrix = "builtin";
    std::uint64_t seed = 1;
    int reps = 30;
    std::string out_dir;
    std::string config_file;
    std::string prices_file;
    std::string pv_file;
    double e_star_kwh = 9.36;
    double price_interval_s = 0.0; // 0: keep scenario default
    double horizon_s = 0.0;
    double bin_width_s = 900.0;
    int jobs = 0;
    bool export_traces = false;
};

int cmd_run(const RunOptions& opt) {
    ScenarioConfig base;
    if (!opt.config_file.empty()) base = scenario_from_json_file(opt.config_file, base);
    if (opt.price_interval_s > 0.0) base.price_interval_s = opt.price_interval_s;
    if (opt.horizon_s > 0.0) base.horizon_s = opt.horizon_s;

    MetricsConfig metrics;
    metrics.e_star_ws = opt.e_star_kwh * 3'600'000.0;
    metrics.bin_width_s = opt.bin_width_s;
    metrics.horizon_s = base.horizon_s;

    TimeSeries prices = TimeSeries::constant(0.30); // documented default tariff
    if (!opt.prices_file.empty()) {
        prices = load_series_file(opt.prices_file);
        if (prices.first_breakpoint() > 0.0) {
            throw IoError(opt.prices_file + ": price series must start at or before t=0");
        }
    }
    std::optional<TimeSeries> pv;
    if (!opt.pv_file.empty()) pv = load_series_file(opt.pv_file);

    ExperimentMatrix matrix =
        opt.matrix == "builtin" ? builtin_matrix() : matrix_from_csv_file(opt.matrix, opt.reps);
    matrix.replications = opt.reps;

    const auto t0 = std::chrono::steady_clock::now();
    const MatrixResults results = run_matrix(matrix, base, metrics, prices, opt.seed, opt.jobs);
    const double sim_s = elapsed_s(t0);

    OutputOptions out;
    out.out_dir = opt.out_dir;
    out.export_all_traces = opt.export_traces;
    out.pv = pv;
    write_outputs(results, base, metrics, prices, out);

    int total_runs = 0;
    for (const auto& exp : results.experiments) total_runs += static_cast<int>(exp.runs.size());
    std::printf("ran %d simulations (%zu experiments x %d replications) in %.3f s\n", total_runs,
                results.experiments.size(), matrix.replications, sim_s);
    std::printf("outputs written to %s\n", opt.out_dir.c_str());
    return 0;
}

struct ValidateOptions {
    double dt = 1.0;
    int evs = 3;
    int columns = 2;
    std::string kind = "SCC";
    std::string strategy = "both";
    std::uint64_t seed = 7;
    std::string out_dir;
    bool require_alignment = false;
};

ScenarioConfig small_scenario(const ValidateOptions& opt, Strategy strategy) {
    ScenarioConfig cfg;
    cfg.ev_count = opt.evs;
    cfg.fcc_count = opt.kind == "FCC" ? opt.columns : 0;
    cfg.scc_count = opt.kind == "FCC" ? 0 : opt.columns;
    cfg.strategy = strategy;
    cfg.validate();
    return cfg;
}

int cmd_validate(const ValidateOptions& opt) {
    std::vector<Strategy> strategies;
    if (opt.strategy == "both") {
        strategies = {Strategy::FCFS, Strategy::SHRD};
    } else {
        strategies = {strategy_from_string(opt.strategy)};
    }
    const TimeSeries prices = TimeSeries::constant(0.30);
    if (!opt.out_dir.empty()) std::filesystem::create_directories(opt.out_dir);

    for (Strategy strategy : strategies) {
        const ScenarioConfig cfg = small_scenario(opt, strategy);
        const auto fleet = sample_fleet(cfg, opt.seed);

        auto t0 = std::chrono::steady_clock::now();
        const SimResult event_driven = run_simulation(cfg, fleet, prices);
        const double wall_event = elapsed_s(t0);

        StepConfig step;
        step.dt_s = opt.dt;
        step.require_alignment = opt.require_alignment;
        t0 = std::chrono::steady_clock::now();
        const SimResult stepped = simulate_timestep(cfg, fleet, prices, step);
        const double wall_step = elapsed_s(t0);

        ComparisonReport rep = compare_traces(event_driven, stepped, opt.dt);
        rep.wall_event_s = wall_event;
        rep.wall_step_s = wall_step;

        std::printf("strategy %s:\n%s", to_string(strategy), comparison_text(rep).c_str());

        if (!opt.out_dir.empty()) {
            const std::string stem = std::string("validate_") + to_string(strategy);
            std::ofstream csv(opt.out_dir + "/" + stem + ".csv");
            csv << "ev,energy_event_ws,energy_step_ws,energy_delta_ws,ttr_event_s,ttr_step_s,"
                   "ttr_delta_s\n";
            for (const auto& row : rep.rows) {
                csv << row.ev << ',' << num_str(row.energy_event_ws) << ','
                    << num_str(row.energy_step_ws) << ',' << num_str(row.energy_delta_ws) << ','
                    << (row.ttr_event_s ? num_str(*row.ttr_event_s) : std::string("NA")) << ','
                    << (row.ttr_step_s ? num_str(*row.ttr_step_s) : std::string("NA")) << ','
                    << num_str(row.ttr_delta_s) << '\n';
            }
            std::ofstream txt(opt.out_dir + "/" + stem + ".txt");
            txt << comparison_text(rep);
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grid-aware EV charging facility simulator"};
    app.require_subcommand(1);

    RunOptions run_opt;
    auto* run = app.add_subcommand("run", "execute an experiment matrix");
    run->add_option("--matrix", run_opt.matrix, "builtin or a matrix CSV file");
    run->add_option("--seed", run_opt.seed, "root seed");
    run->add_option("--reps", run_opt.reps, "replications per experiment")->check(CLI::PositiveNumber);
    run->add_option("--out", run_opt.out_dir, "output directory")->required();
    run->add_option("--config", run_opt.config_file, "scenario config JSON");
    run->add_option("--prices", run_opt.prices_file, "price series CSV (time_s,value)");
    run->add_option("--pv", run_opt.pv_file, "PV series CSV (time_s,value)");
    run->add_option("--e-star", run_opt.e_star_kwh, "TTR reference energy in kWh");
    run->add_option("--price-interval", run_opt.price_interval_s, "price interval in seconds");
    run->add_option("--horizon", run_opt.horizon_s, "horizon in seconds");
    run->add_option("--bin-width", run_opt.bin_width_s, "power bin width in seconds");
    run->add_option("--jobs", run_opt.jobs, "worker threads (0 = all cores)");
    run->add_flag("--export-traces", run_opt.export_traces,
                  "export per-run trace CSVs for every replication");

    ReportOptions report_opt;
    auto* report = app.add_subcommand("report", "render figures from a run output tree");
    report->add_option("--in", report_opt.in_dir, "run output directory")->required();
    report->add_option("--out", report_opt.out_dir, "figure output directory")->required();
    report->add_option("--overlay-exp", report_opt.overlay_exp, "experiment for the overlay");
    report->add_option("--bandwidth", report_opt.kde_bandwidth_s, "density bandwidth in seconds");

    ValidateOptions val_opt;
    auto* validate = app.add_subcommand("validate",
                                        "compare the event-driven engine against the "
                                        "fixed-time-step reference");
    validate->add_option("--dt", val_opt.dt, "time step in seconds")->check(CLI::PositiveNumber);
    validate->add_option("--evs", val_opt.evs, "fleet size")->check(CLI::PositiveNumber);
    validate->add_option("--columns", val_opt.columns, "column count")->check(CLI::PositiveNumber);
    validate->add_option("--kind", val_opt.kind, "column kind (FCC or SCC)");
    validate->add_option("--strategy", val_opt.strategy, "FCFS, SHRD or both");
    validate->add_option("--seed", val_opt.seed, "scenario seed");
    validate->add_option("--out", val_opt.out_dir, "directory for the comparison CSV/report");
    validate->add_flag("--require-alignment", val_opt.require_alignment,
                       "error unless dt divides the handshake and price interval");

    std::string show_config_file;
    auto* show = app.add_subcommand("show-config", "print the effective scenario defaults");
    show->add_option("--config", show_config_file, "scenario config JSON to merge");

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(run_opt);
        if (report->parsed()) {
            for (const auto& path : evsim::emit_report(report_opt)) {
                std::printf("wrote %s\n", path.c_str());
            }
            return 0;
        }
        if (validate->parsed()) return cmd_validate(val_opt);
        if (show->parsed()) {
            ScenarioConfig cfg;
            if (!show_config_file.empty()) cfg = scenario_from_json_file(show_config_file, cfg);
            std::cout << scenario_to_json_text(cfg);
            return 0;
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "input/output error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 4;
    }
    return 0;
}
