#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "knnmode/dataset.hpp"
#include "knnmode/mode_estimator.hpp"
#include "knnmode/oracle.hpp"

namespace knnmode {

enum class Method { kAdaptive, kNaivePlus, kRandomSampling };

std::string method_name(Method m);

enum class SweepVariable { kNone, kBudget, kN, kCBeta };

std::string sweep_variable_name(SweepVariable v);

struct ExperimentConfig {
    // dataset: either a file (optionally subsampled per trial) or a synthetic family
    std::optional<std::string> dataset_path;
    DataFormat dataset_format = DataFormat::kCsv;
    std::optional<SyntheticSpec> synthetic;
    std::optional<std::size_t> subsample_n;

    QueryModel model = QueryModel::kDimensionSampling;
    double sigma = 0.1;
    bool cap = false;

    ScheduleKind schedule = ScheduleKind::kEmpirical;
    double delta = 0.001;
    double c_beta = 0.03;

    std::size_t k = 10;
    RunMode mode = RunMode::kDeltaTrue;
    std::vector<uint64_t> budgets;
    std::optional<uint64_t> safety_cap;
    std::vector<Method> methods = {Method::kAdaptive};

    std::size_t trials = 100;
    uint64_t seed = 0;
    bool normalize_queries = false;  // report queries divided by m*n^2
    std::size_t workers = 1;
    bool diagnostics = true;
    double k_fraction = 0.0;  // n sweep: k = max(1, round(k_fraction * n)) when > 0
    bool keep_records = false;
};

struct SweepRow {
    std::string method;
    std::string variable;
    double value = 0.0;
    std::size_t trials = 0;
    double accuracy = 0.0;
    double accuracy_stderr = 0.0;
    double queries_mean = 0.0;
    double queries_stderr = 0.0;
    uint64_t seed = 0;
};

struct TrialOutcome {
    std::string method;
    double value = 0.0;
    std::size_t trial = 0;
    TrialRecord record;
};

struct SweepResult {
    std::string variable;
    std::vector<double> grid;
    std::vector<SweepRow> rows;
    std::vector<TrialOutcome> records;  // per-trial detail, kept on demand
};

// Runs config.trials seeded trials per grid value (and per method); trial t of
// every method consumes an identically seeded oracle.
SweepResult sweep(const ExperimentConfig& config, SweepVariable variable,
                  const std::vector<double>& grid);

// Budget mode: a budget sweep over config.budgets. Delta-true: a single cell.
SweepResult run_trials(const ExperimentConfig& config);

void emit_csv(const SweepResult& result, const std::filesystem::path& path);
void emit_json(const SweepResult& result, const ExperimentConfig& config,
               const std::filesystem::path& path, bool verbose);

// Round-trip helper for the serialization tests.
SweepResult parse_csv_result(const std::filesystem::path& path);

ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace knnmode
