#pragma once

#include "evsim/metrics.hpp"
#include "evsim/oracle.hpp"
#include "evsim/protocol.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace evsim {

struct ExperimentRow {
    int exp_id = 0;
    int ev_count = 0;
    int fcc_count = 0;
    int scc_count = 0;
    Strategy strategy = Strategy::FCFS;
};

struct ExperimentMatrix {
    std::vector<ExperimentRow> rows;
    int replications = 30;

    void validate() const;
};

/// The 12-row study matrix: {30, 60, 120} vehicles x {30 FCC, 30 SCC} x
/// {FCFS, SHRD}, 30 replications each.
ExperimentMatrix builtin_matrix();

/// Matrix file: CSV with header exp_id,ev_count,fcc_count,scc_count,strategy.
ExperimentMatrix matrix_from_csv_file(const std::string& path, int replications);

/// The scenario for one matrix row (row overrides fleet size, columns and
/// strategy; everything else comes from the base config).
ScenarioConfig scenario_for_row(const ExperimentRow& row, const ScenarioConfig& base);

/// One full simulation: sample fleet, execute, compute metrics.
/// Deterministic per (row, base, root_seed, replication).
RunArtifacts run_experiment(const ExperimentRow& row, const ScenarioConfig& base,
                            const MetricsConfig& metrics, const TimeSeries& prices,
                            std::uint64_t root_seed, int replication);

/// Same run, returning the raw result for trace exports and validation.
SimResult run_experiment_full(const ExperimentRow& row, const ScenarioConfig& base,
                              const TimeSeries& prices, std::uint64_t root_seed, int replication);

struct ExperimentResults {
    ExperimentRow row;
    std::vector<RunArtifacts> runs; // by replication
};

struct MatrixResults {
    ExperimentMatrix matrix;
    std::uint64_t root_seed = 0;
    std::vector<ExperimentResults> experiments;
};

/// Execute the whole matrix. Replications are independent and may run
/// concurrently (jobs > 1, OpenMP); results are identical either way.
MatrixResults run_matrix(const ExperimentMatrix& matrix, const ScenarioConfig& base,
                         const MetricsConfig& metrics, const TimeSeries& prices,
                         std::uint64_t root_seed, int jobs = 0);

// --- CSV serialization (streamed so tests can render to memory) -----------

void write_ttr_csv(std::ostream& out, const ExperimentResults& exp);
void write_utilization_csv(std::ostream& out, const ExperimentResults& exp);
void write_es_bins_csv(std::ostream& out, const ExperimentResults& exp);
void write_summary_csv(std::ostream& out, const MatrixResults& results);
void write_es_trace_csv(std::ostream& out, const SimResult& result);
void write_grants_csv(std::ostream& out, const SimResult& result);
void write_events_csv(std::ostream& out, const SimResult& result);

struct OutputOptions {
    std::string out_dir;
    bool export_all_traces = false; // default: traces of replication 0 only
    std::optional<TimeSeries> pv;   // echoed for the report overlay
};

/// Write the full output tree: run_config.json, prices.csv, optional pv.csv,
/// summary.csv, per-experiment metric CSVs and per-run trace exports.
void write_outputs(const MatrixResults& results, const ScenarioConfig& base,
                   const MetricsConfig& metrics, const TimeSeries& prices,
                   const OutputOptions& options);

} // namespace evsim
