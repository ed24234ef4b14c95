// Benchmark: OpenMP-parallel replication runner against the serial path,
// and the event-driven engine against the fixed-time-step reference.

#include "evsim/oracle.hpp"
#include "evsim/runner.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>

namespace {

using namespace evsim;

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string digest(const MatrixResults& results) {
    std::ostringstream out;
    write_summary_csv(out, results);
    return out.str();
}

} // namespace

int main(int argc, char** argv) {
    std::uint64_t seed = 1;
    int reps = 30;
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--seed") seed = std::strtoull(argv[i + 1], nullptr, 10);
        if (flag == "--reps") reps = std::atoi(argv[i + 1]);
    }

    ExperimentMatrix matrix = builtin_matrix();
    matrix.replications = reps;
    const ScenarioConfig base;
    const MetricsConfig metrics;
    const TimeSeries prices = TimeSeries::constant(0.30);

    std::printf("== replication runner: serial vs OpenMP ==\n");
    auto t0 = std::chrono::steady_clock::now();
    const MatrixResults serial = run_matrix(matrix, base, metrics, prices, seed, /*jobs=*/1);
    const double serial_s = elapsed_s(t0);

    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    t0 = std::chrono::steady_clock::now();
    const MatrixResults parallel = run_matrix(matrix, base, metrics, prices, seed, /*jobs=*/0);
    const double parallel_s = elapsed_s(t0);

    const bool identical = digest(serial) == digest(parallel);
    std::printf("serial (1 thread):    %8.3f s\n", serial_s);
    std::printf("parallel (%d threads): %8.3f s\n", threads, parallel_s);
    std::printf("speedup:              %8.2fx\n", parallel_s > 0 ? serial_s / parallel_s : 0.0);
    std::printf("identical artifacts:  %s\n", identical ? "yes" : "NO");

    std::printf("\n== time advance: event-driven vs fixed step ==\n");
    ExperimentRow row{9, 120, 30, 0, Strategy::FCFS};
    const ScenarioConfig cfg = scenario_for_row(row, base);
    const auto fleet = sample_fleet(cfg, derive_run_seed(seed, 9, 0));
    for (double dt : {1.0, 0.1}) {
        t0 = std::chrono::steady_clock::now();
        const SimResult event_driven = run_simulation(cfg, fleet, prices);
        const double wall_event = elapsed_s(t0);
        t0 = std::chrono::steady_clock::now();
        const SimResult stepped = simulate_timestep(cfg, fleet, prices, {dt, 0, false});
        const double wall_step = elapsed_s(t0);
        ComparisonReport rep = compare_traces(event_driven, stepped, dt);
        rep.wall_event_s = wall_event;
        rep.wall_step_s = wall_step;
        std::printf("dt=%g s: event %.4f s, stepped %.4f s, speedup %.1fx, "
                    "max energy delta %.0f Ws, max TTR delta %.3f s\n",
                    dt, wall_event, wall_step, rep.wall_ratio(), rep.max_energy_delta_ws,
                    rep.max_ttr_delta_s);
    }
    return identical ? 0 : 1;
}
