#include "knnmode/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "knnmode/detail/hash_rng.hpp"

namespace knnmode {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    const std::size_t spawn = std::min(workers, count);
    pool.reserve(spawn);
    for (std::size_t w = 0; w < spawn; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

uint64_t trial_seed(uint64_t root, uint64_t salt, std::size_t trial) {
    return detail::hash3(root, salt, trial);
}

struct CellStats {
    std::size_t trials = 0;
    double acc_sum = 0.0;
    double q_sum = 0.0;
    double q_sq_sum = 0.0;

    void add(bool correct, double queries) {
        ++trials;
        acc_sum += correct ? 1.0 : 0.0;
        q_sum += queries;
        q_sq_sum += queries * queries;
    }
};

SweepRow to_row(const CellStats& s, const std::string& method, const std::string& variable,
                double value, uint64_t seed) {
    SweepRow row;
    row.method = method;
    row.variable = variable;
    row.value = value;
    row.trials = s.trials;
    row.seed = seed;
    const double t = static_cast<double>(s.trials);
    row.accuracy = s.acc_sum / t;
    row.accuracy_stderr = std::sqrt(std::max(0.0, row.accuracy * (1.0 - row.accuracy) / t));
    row.queries_mean = s.q_sum / t;
    const double var = std::max(0.0, s.q_sq_sum / t - row.queries_mean * row.queries_mean);
    row.queries_stderr = std::sqrt(var / t);
    return row;
}

struct TrialResult {
    // method -> per grid-cell record (budget sweeps have one per budget,
    // otherwise exactly one)
    std::vector<std::vector<TrialRecord>> per_method;
};

ExperimentConfig specialize(const ExperimentConfig& base, SweepVariable variable, double value) {
    ExperimentConfig cfg = base;
    switch (variable) {
        case SweepVariable::kNone:
        case SweepVariable::kBudget:
            break;
        case SweepVariable::kN: {
            const auto n = static_cast<std::size_t>(std::llround(value));
            if (n < 2) throw ConfigError("n sweep: n must be >= 2");
            if (cfg.synthetic) cfg.synthetic->n = n;
            if (cfg.dataset_path) cfg.subsample_n = n;
            if (cfg.k_fraction > 0.0)
                cfg.k = std::max<std::size_t>(
                    1, static_cast<std::size_t>(std::llround(cfg.k_fraction * value)));
            if (cfg.k > n - 1) cfg.k = n - 1;
            break;
        }
        case SweepVariable::kCBeta:
            if (cfg.schedule != ScheduleKind::kEmpirical)
                throw ConfigError("c_beta sweep needs the empirical schedule");
            cfg.c_beta = value;
            break;
    }
    return cfg;
}

BetaSchedule make_schedule(const ExperimentConfig& cfg, std::size_t n) {
    return cfg.schedule == ScheduleKind::kTheoretical
               ? BetaSchedule::theoretical(n, cfg.delta)
               : BetaSchedule::empirical(n, cfg.delta, cfg.c_beta);
}

Dataset make_trial_dataset(const ExperimentConfig& cfg, const Dataset* file_ds,
                           std::size_t trial) {
    if (cfg.synthetic) {
        SyntheticSpec spec = *cfg.synthetic;
        spec.seed = trial_seed(cfg.seed, 0xDA7Aull, trial);
        return generate_synthetic(spec);
    }
    if (!file_ds) throw ConfigError("no dataset configured");
    if (!cfg.subsample_n) return *file_ds;
    const std::size_t want = *cfg.subsample_n;
    if (want > file_ds->size())
        throw ConfigError("subsample n exceeds the dataset rows");
    // Partial Fisher-Yates draw without replacement.
    detail::SplitMix64 rng(trial_seed(cfg.seed, 0x5AB5ull, trial));
    std::vector<std::size_t> rows(file_ds->size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    for (std::size_t i = 0; i < want; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_bounded(rows.size() - i));
        std::swap(rows[i], rows[j]);
    }
    rows.resize(want);
    return file_ds->subset(rows);
}

TrialResult run_one_trial(const ExperimentConfig& cfg, const Dataset* file_ds,
                          std::size_t trial) {
    const Dataset ds = make_trial_dataset(cfg, file_ds, trial);
    const std::size_t n = ds.size();
    if (cfg.k < 1 || cfg.k > n - 1) throw ConfigError("k out of range for the trial dataset");

    const uint64_t oracle_seed = trial_seed(cfg.seed, 0x0AC1ull, trial);
    OracleOptions oopt;
    oopt.model = cfg.model;
    oopt.sigma = cfg.sigma;
    oopt.per_pair_cap = cfg.cap;
    oopt.seed = oracle_seed;

    TrialResult result;
    result.per_method.reserve(cfg.methods.size());
    for (Method method : cfg.methods) {
        EstimatorConfig ec(cfg.k, make_schedule(cfg, n));
        ec.safety_cap = cfg.safety_cap;
        ec.diagnostics = cfg.diagnostics;
        OracleSession session(ds, oopt);  // identically seeded for every method
        if (cfg.mode == RunMode::kFixedBudget) {
            ec.mode = RunMode::kFixedBudget;
            switch (method) {
                case Method::kAdaptive:
                    result.per_method.push_back(
                        estimate_mode_budget_sweep(ds, ec, cfg.budgets, session));
                    break;
                case Method::kNaivePlus:
                    result.per_method.push_back(
                        baseline_naive_plus_sweep(ds, ec, cfg.budgets, session));
                    break;
                case Method::kRandomSampling:
                    result.per_method.push_back(
                        baseline_random_sampling_sweep(ds, ec, cfg.budgets, session));
                    break;
            }
        } else {
            ec.mode = RunMode::kDeltaTrue;
            if (method != Method::kAdaptive)
                throw ConfigError("baselines are fixed-budget methods");
            result.per_method.push_back({estimate_mode(ds, ec, session)});
        }
    }
    return result;
}

double normalizer(const ExperimentConfig& cfg, std::size_t n, std::size_t m) {
    if (!cfg.normalize_queries) return 1.0;
    return static_cast<double>(m) * static_cast<double>(n) * static_cast<double>(n);
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::kAdaptive: return "adaptive";
        case Method::kNaivePlus: return "naive-plus";
        case Method::kRandomSampling: return "random-sampling";
    }
    return "?";
}

std::string sweep_variable_name(SweepVariable v) {
    switch (v) {
        case SweepVariable::kNone: return "none";
        case SweepVariable::kBudget: return "budget";
        case SweepVariable::kN: return "n";
        case SweepVariable::kCBeta: return "c_beta";
    }
    return "?";
}

SweepResult sweep(const ExperimentConfig& config, SweepVariable variable,
                  const std::vector<double>& grid) {
    if (config.trials < 1) throw ConfigError("trials must be >= 1");
    if (config.methods.empty()) throw ConfigError("no methods selected");
    if (grid.empty()) throw ConfigError("empty sweep grid");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw ConfigError("sweep grid must be strictly increasing");

    std::optional<Dataset> file_ds;
    if (!config.synthetic) {
        if (!config.dataset_path) throw ConfigError("no dataset configured");
        file_ds = load_dataset(*config.dataset_path, config.dataset_format);
    }

    SweepResult out;
    out.variable = sweep_variable_name(variable);
    out.grid = grid;

    // For the budget variable one pass covers the whole grid; other variables
    // re-run the trials per grid value.
    std::vector<ExperimentConfig> cell_configs;
    if (variable == SweepVariable::kBudget) {
        ExperimentConfig cfg = config;
        cfg.mode = RunMode::kFixedBudget;
        cfg.budgets.clear();
        for (double b : grid) cfg.budgets.push_back(static_cast<uint64_t>(std::llround(b)));
        cell_configs.push_back(std::move(cfg));
    } else {
        for (double v : grid) cell_configs.push_back(specialize(config, variable, v));
    }

    for (std::size_t ci = 0; ci < cell_configs.size(); ++ci) {
        const ExperimentConfig& cfg = cell_configs[ci];
        std::vector<TrialResult> results(cfg.trials);
        parallel_for(cfg.trials, cfg.workers, [&](std::size_t t) {
            results[t] = run_one_trial(cfg, file_ds ? &*file_ds : nullptr, t);
        });

        const std::size_t cells = variable == SweepVariable::kBudget ? grid.size() : 1;
        for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
            for (std::size_t cell = 0; cell < cells; ++cell) {
                CellStats stats;
                for (std::size_t t = 0; t < cfg.trials; ++t) {
                    const TrialRecord& rec = results[t].per_method[mi][cell];
                    // The normalization constant only depends on the configured
                    // shape, which is identical across trials.
                    std::size_t n = cfg.synthetic ? cfg.synthetic->n
                                    : cfg.subsample_n ? *cfg.subsample_n
                                                      : file_ds->size();
                    std::size_t m = cfg.synthetic ? cfg.synthetic->m : file_ds->dim();
                    stats.add(rec.correct,
                              static_cast<double>(rec.total_queries) / normalizer(cfg, n, m));
                }
                const double value = variable == SweepVariable::kBudget ? grid[cell]
                                     : variable == SweepVariable::kNone ? 0.0
                                                                        : grid[ci];
                out.rows.push_back(to_row(stats, method_name(cfg.methods[mi]), out.variable,
                                          value, config.seed));
            }
        }
        if (config.keep_records) {
            for (std::size_t t = 0; t < cfg.trials; ++t)
                for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi)
                    for (std::size_t cell = 0; cell < results[t].per_method[mi].size(); ++cell) {
                        TrialOutcome rec;
                        rec.method = method_name(cfg.methods[mi]);
                        rec.value = variable == SweepVariable::kBudget ? grid[cell]
                                    : variable == SweepVariable::kNone ? 0.0
                                                                       : grid[ci];
                        rec.trial = t;
                        rec.record = results[t].per_method[mi][cell];
                        out.records.push_back(std::move(rec));
                    }
        }
    }
    // Stable row order: variable value first, then method order as configured.
    std::stable_sort(out.rows.begin(), out.rows.end(),
                     [](const SweepRow& a, const SweepRow& b) { return a.value < b.value; });
    return out;
}

SweepResult run_trials(const ExperimentConfig& config) {
    if (config.mode == RunMode::kFixedBudget) {
        if (config.budgets.empty()) throw ConfigError("budget mode needs a budget grid");
        std::vector<double> grid;
        for (uint64_t b : config.budgets) grid.push_back(static_cast<double>(b));
        return sweep(config, SweepVariable::kBudget, grid);
    }
    return sweep(config, SweepVariable::kNone, {0.0});
}

void emit_csv(const SweepResult& result, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "method,variable,value,trials,accuracy,accuracy_stderr,queries_mean,queries_stderr,seed\n";
    for (const SweepRow& r : result.rows) {
        out << r.method << ',' << r.variable << ',' << fmt_double(r.value) << ',' << r.trials
            << ',' << fmt_double(r.accuracy) << ',' << fmt_double(r.accuracy_stderr) << ','
            << fmt_double(r.queries_mean) << ',' << fmt_double(r.queries_stderr) << ',' << r.seed
            << '\n';
    }
    if (!out) throw ConfigError("I/O failure writing " + path.string());
}

SweepResult parse_csv_result(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing CSV header");
    SweepResult out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            cells.push_back(line.substr(pos, comma - pos));
            pos = comma + 1;
            if (comma == line.size()) break;
        }
        if (cells.size() != 9) throw ParseError("row " + std::to_string(lineno) + ": bad arity");
        SweepRow r;
        r.method = cells[0];
        r.variable = cells[1];
        r.value = std::stod(cells[2]);
        r.trials = std::stoull(cells[3]);
        r.accuracy = std::stod(cells[4]);
        r.accuracy_stderr = std::stod(cells[5]);
        r.queries_mean = std::stod(cells[6]);
        r.queries_stderr = std::stod(cells[7]);
        r.seed = std::stoull(cells[8]);
        out.rows.push_back(std::move(r));
        out.variable = out.rows.back().variable;
    }
    return out;
}

namespace {

ordered_json config_json(const ExperimentConfig& c) {
    ordered_json j;
    if (c.dataset_path) {
        j["dataset"] = *c.dataset_path;
        j["format"] = c.dataset_format == DataFormat::kCsv ? "csv" : "raw-binary";
        if (c.subsample_n) j["subsample_n"] = *c.subsample_n;
    }
    if (c.synthetic) {
        j["synthetic"] = {{"family", family_name(c.synthetic->family)},
                          {"n", c.synthetic->n},
                          {"m", c.synthetic->m},
                          {"gap_scale", c.synthetic->gap_scale}};
    }
    j["model"] = c.model == QueryModel::kDimensionSampling ? "1"
                 : c.model == QueryModel::kAdditiveNoise   ? "2"
                                                           : "exact";
    j["sigma"] = c.sigma;
    j["cap"] = c.cap;
    j["schedule"] = c.schedule == ScheduleKind::kTheoretical ? "theoretical" : "empirical";
    j["delta"] = c.delta;
    j["c_beta"] = c.c_beta;
    j["k"] = c.k;
    j["mode"] = c.mode == RunMode::kDeltaTrue ? "delta-true" : "budget";
    j["budgets"] = c.budgets;
    if (c.safety_cap) j["safety_cap"] = *c.safety_cap;
    std::vector<std::string> methods;
    for (Method m : c.methods) methods.push_back(method_name(m));
    j["methods"] = methods;
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    j["normalize_queries"] = c.normalize_queries;
    j["workers"] = c.workers;
    if (c.k_fraction > 0.0) j["k_fraction"] = c.k_fraction;
    return j;
}

ordered_json record_json(const TrialRecord& r) {
    ordered_json j;
    j["returned_index"] = r.returned_index;
    j["truth_index"] = r.truth_index;
    j["correct"] = r.correct;
    j["total_queries"] = r.total_queries;
    j["terminated_by"] = termination_name(r.terminated_by);
    j["budget"] = r.budget;
    j["coverage_held"] = r.coverage_held;
    j["knn_ci_valid"] = r.knn_ci_valid;
    j["per_point_queries"] = r.per_point_queries;
    j["queries_at_knnfound"] = r.queries_at_knnfound;
    return j;
}

}  // namespace

void emit_json(const SweepResult& result, const ExperimentConfig& config,
               const std::filesystem::path& path, bool verbose) {
    ordered_json j;
    j["config"] = config_json(config);
    j["variable"] = result.variable;
    j["grid"] = result.grid;
    j["rows"] = ordered_json::array();
    for (const SweepRow& r : result.rows) {
        ordered_json row;
        row["method"] = r.method;
        row["variable"] = r.variable;
        row["value"] = r.value;
        row["trials"] = r.trials;
        row["accuracy"] = r.accuracy;
        row["accuracy_stderr"] = r.accuracy_stderr;
        row["queries_mean"] = r.queries_mean;
        row["queries_stderr"] = r.queries_stderr;
        row["seed"] = r.seed;
        j["rows"].push_back(std::move(row));
    }
    if (verbose) {
        j["trial_records"] = ordered_json::array();
        for (const TrialOutcome& rec : result.records) {
            ordered_json r;
            r["method"] = rec.method;
            r["value"] = rec.value;
            r["trial"] = rec.trial;
            r["record"] = record_json(rec.record);
            j["trial_records"].push_back(std::move(r));
        }
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw ConfigError("I/O failure writing " + path.string());
}

namespace {

std::vector<uint64_t> geometric_budgets(std::size_t n, std::size_t m, std::size_t points) {
    // Geometric grid from the initialization cost n(n-1) to the capped
    // worst case 2mn(n-1).
    const double lo = static_cast<double>(n) * static_cast<double>(n - 1);
    const double hi = 2.0 * static_cast<double>(m) * lo;
    std::vector<uint64_t> out;
    out.reserve(points);
    for (std::size_t i = 0; i < points; ++i) {
        const double f = static_cast<double>(i) / static_cast<double>(points - 1);
        out.push_back(static_cast<uint64_t>(std::llround(lo * std::pow(hi / lo, f))));
    }
    return out;
}

ExperimentConfig fig1(std::size_t n, std::size_t m, std::size_t k, std::size_t trials,
                      int model) {
    ExperimentConfig c;
    c.synthetic = SyntheticSpec{SyntheticFamily::kGaussianClusters, n, m, 1.0, 0};
    c.k = k;
    c.trials = trials;
    c.mode = RunMode::kFixedBudget;
    c.budgets = geometric_budgets(n, m, 8);
    c.methods = {Method::kAdaptive, Method::kNaivePlus, Method::kRandomSampling};
    c.schedule = ScheduleKind::kEmpirical;
    c.delta = 0.001;
    if (model == 1) {
        c.model = QueryModel::kDimensionSampling;
        c.cap = true;
        c.c_beta = 0.03;
    } else {
        c.model = QueryModel::kAdditiveNoise;
        c.sigma = 0.1;
        c.c_beta = 0.01;
    }
    return c;
}

ExperimentConfig sweep_cbeta_preset(std::size_t n, std::size_t m, std::size_t k,
                                    std::size_t trials) {
    ExperimentConfig c;
    c.synthetic = SyntheticSpec{SyntheticFamily::kGaussianClusters, n, m, 1.0, 0};
    c.k = k;
    c.trials = trials;
    c.mode = RunMode::kDeltaTrue;
    c.model = QueryModel::kDimensionSampling;
    c.cap = true;
    c.schedule = ScheduleKind::kEmpirical;
    c.delta = 0.001;
    return c;
}

ExperimentConfig sweep_n_preset(std::size_t m, std::size_t trials) {
    ExperimentConfig c;
    c.synthetic = SyntheticSpec{SyntheticFamily::kGaussianClusters, 40, m, 1.0, 0};
    c.k_fraction = 0.1;
    c.k = 4;
    c.trials = trials;
    c.mode = RunMode::kDeltaTrue;
    c.model = QueryModel::kDimensionSampling;
    c.cap = true;
    c.schedule = ScheduleKind::kEmpirical;
    c.delta = 0.001;
    c.c_beta = 0.03;
    c.normalize_queries = true;
    return c;
}

}  // namespace

ExperimentConfig preset(const std::string& name) {
    if (name == "fig1-model1") return fig1(100, 64, 10, 200, 1);
    if (name == "fig1-model2") return fig1(100, 64, 10, 200, 2);
    if (name == "fig1-model1-desk") return fig1(50, 32, 5, 200, 1);
    if (name == "fig1-model2-desk") return fig1(50, 32, 5, 200, 2);
    if (name == "sweep-cbeta") return sweep_cbeta_preset(100, 64, 10, 25);
    if (name == "sweep-cbeta-desk") return sweep_cbeta_preset(50, 32, 5, 25);
    if (name == "sweep-n") return sweep_n_preset(64, 20);
    if (name == "sweep-n-desk") return sweep_n_preset(32, 10);
    throw ConfigError("unknown preset: " + name);
}

std::vector<std::string> preset_names() {
    return {"fig1-model1",  "fig1-model2",      "fig1-model1-desk", "fig1-model2-desk",
            "sweep-cbeta",  "sweep-cbeta-desk", "sweep-n",          "sweep-n-desk"};
}

}  // namespace knnmode
