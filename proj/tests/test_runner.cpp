#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evsim/errors.hpp"
#include "evsim/report.hpp"
#include "evsim/runner.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace evsim;
namespace fs = std::filesystem;

namespace {

const TimeSeries kFlatPrice = TimeSeries::constant(0.30);

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("evsim_test_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string render_ttr(const ExperimentResults& exp) {
    std::ostringstream out;
    write_ttr_csv(out, exp);
    return out.str();
}

} // namespace

TEST_CASE("builtin matrix reproduces the 12-row study") {
    const auto m = builtin_matrix();
    REQUIRE(m.rows.size() == 12);
    CHECK(m.replications == 30);
    CHECK(m.rows.size() * static_cast<std::size_t>(m.replications) == 360);

    CHECK(m.rows[0].exp_id == 1);
    CHECK(m.rows[0].ev_count == 30);
    CHECK(m.rows[0].fcc_count == 30);
    CHECK(m.rows[0].scc_count == 0);
    CHECK(m.rows[0].strategy == Strategy::FCFS);

    CHECK(m.rows[11].exp_id == 12);
    CHECK(m.rows[11].ev_count == 120);
    CHECK(m.rows[11].fcc_count == 0);
    CHECK(m.rows[11].scc_count == 30);
    CHECK(m.rows[11].strategy == Strategy::SHRD);

    // the EV-count blocks of the table
    for (int i = 0; i < 4; ++i) CHECK(m.rows[static_cast<std::size_t>(i)].ev_count == 30);
    for (int i = 4; i < 8; ++i) CHECK(m.rows[static_cast<std::size_t>(i)].ev_count == 60);
    for (int i = 8; i < 12; ++i) CHECK(m.rows[static_cast<std::size_t>(i)].ev_count == 120);
}

TEST_CASE("matrix CSV files parse and validate") {
    TempDir tmp("matrix");
    const auto path = tmp.path / "matrix.csv";
    {
        std::ofstream out(path);
        out << "exp_id,ev_count,fcc_count,scc_count,strategy\n";
        out << "1,5,2,0,FCFS\n";
        out << "2,5,0,2,SHRD\n";
    }
    const auto m = matrix_from_csv_file(path.string(), 4);
    REQUIRE(m.rows.size() == 2);
    CHECK(m.replications == 4);
    CHECK(m.rows[1].strategy == Strategy::SHRD);

    {
        std::ofstream out(path);
        out << "exp_id,ev_count,fcc_count,scc_count,strategy\n";
        out << "1,5,2,0,FCFS\n";
        out << "1,5,0,2,SHRD\n"; // duplicate id
    }
    CHECK_THROWS_AS(matrix_from_csv_file(path.string(), 4), ConfigError);
}

TEST_CASE("identical seeds yield byte-identical artifacts") {
    const ExperimentRow row{3, 30, 0, 30, Strategy::FCFS};
    const ScenarioConfig base;
    const MetricsConfig metrics;
    ExperimentResults a{row, {run_experiment(row, base, metrics, kFlatPrice, 42, 0)}};
    ExperimentResults b{row, {run_experiment(row, base, metrics, kFlatPrice, 42, 0)}};
    CHECK(render_ttr(a) == render_ttr(b));

    std::ostringstream ta, tb;
    write_es_trace_csv(ta, run_experiment_full(row, base, kFlatPrice, 42, 0));
    write_es_trace_csv(tb, run_experiment_full(row, base, kFlatPrice, 42, 0));
    CHECK(ta.str() == tb.str());

    // a different replication produces different samples
    ExperimentResults c{row, {run_experiment(row, base, metrics, kFlatPrice, 42, 1)}};
    CHECK(render_ttr(a) != render_ttr(c));
}

TEST_CASE("slow-column experiments never exceed the 330 kW aggregate") {
    const ExperimentRow row{11, 120, 0, 30, Strategy::FCFS};
    const auto art = run_experiment(row, {}, {}, kFlatPrice, 7, 0);
    CHECK(art.es_trace_max_w <= 330'000.0);
    CHECK(art.grant_order_ok);
}

TEST_CASE("serial and concurrent execution produce identical results") {
    ExperimentMatrix matrix;
    matrix.replications = 3;
    matrix.rows = {{1, 8, 4, 0, Strategy::FCFS}, {2, 8, 0, 4, Strategy::SHRD}};
    const ScenarioConfig base;
    const MetricsConfig metrics;
    const auto serial = run_matrix(matrix, base, metrics, kFlatPrice, 5, /*jobs=*/1);
    const auto parallel = run_matrix(matrix, base, metrics, kFlatPrice, 5, /*jobs=*/2);
    std::ostringstream sa, sb;
    write_summary_csv(sa, serial);
    write_summary_csv(sb, parallel);
    CHECK(sa.str() == sb.str());
    for (std::size_t e = 0; e < serial.experiments.size(); ++e) {
        CHECK(render_ttr(serial.experiments[e]) == render_ttr(parallel.experiments[e]));
    }
}

TEST_CASE("a horizon that cannot cover the departures is an error naming the vehicles") {
    ExperimentRow row{1, 2, 1, 0, Strategy::FCFS};
    ScenarioConfig base;
    base.parking_lo_s = base.parking_hi_s = 70'000.0; // departs around 93k s
    MetricsConfig metrics; // horizon 86,400
    try {
        run_experiment(row, base, metrics, kFlatPrice, 1, 0);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        CHECK(what.find("horizon") != std::string::npos);
        CHECK(what.find("0") != std::string::npos);
    }
}

TEST_CASE("output tree and report figures round-trip end to end") {
    TempDir tmp("outputs");
    ExperimentMatrix matrix;
    matrix.replications = 2;
    matrix.rows = {{1, 6, 3, 0, Strategy::FCFS}, {2, 6, 0, 3, Strategy::SHRD}};
    const ScenarioConfig base;
    MetricsConfig metrics;
    const auto results = run_matrix(matrix, base, metrics, kFlatPrice, 11, 1);

    OutputOptions out;
    out.out_dir = (tmp.path / "run").string();
    SUBCASE("without a PV series the overlay names the missing file") {
        write_outputs(results, base, metrics, kFlatPrice, out);
        ReportOptions rep;
        rep.in_dir = out.out_dir;
        rep.out_dir = (tmp.path / "figs").string();
        rep.overlay_exp = 1;
        try {
            emit_report(rep);
            FAIL("expected IoError");
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find("pv.csv") != std::string::npos);
        }
    }
    SUBCASE("with a PV series every figure is written") {
        out.pv = TimeSeries({0.0, 21'600.0, 43'200.0, 64'800.0}, {0.0, 120'000.0, 200'000.0, 0.0});
        write_outputs(results, base, metrics, kFlatPrice, out);
        for (const char* name :
             {"run_config.json", "summary.csv", "prices.csv", "pv.csv", "exp_01/ttr.csv",
              "exp_01/utilization.csv", "exp_01/es_power_bins.csv", "exp_01/rep_000/es_trace.csv",
              "exp_01/rep_000/grants.csv", "exp_01/rep_000/events.csv", "exp_02/ttr.csv"}) {
            CHECK_MESSAGE(fs::exists(fs::path(out.out_dir) / name), name);
        }
        ReportOptions rep;
        rep.in_dir = out.out_dir;
        rep.out_dir = (tmp.path / "figs").string();
        rep.overlay_exp = 1;
        const auto written = emit_report(rep);
        CHECK(written.size() >= 6);
        for (const char* name : {"ttr_cdf_fcc.svg", "ttr_cdf_scc.svg", "utilization.svg",
                                 "es_power_bins_006.svg", "overlay.svg"}) {
            CHECK_MESSAGE(fs::exists(fs::path(rep.out_dir) / name), name);
        }
    }
}
