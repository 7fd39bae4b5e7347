#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "knnmode/harness.hpp"

namespace {

using namespace knnmode;

int run(int argc, char** argv) {
    CLI::App app{"Adaptive k-NN mode estimation under noisy distance oracles"};

    std::string dataset_path, dataset_format = "csv";
    std::string synthetic_family;
    std::size_t n = 0, m = 1;
    double gap_scale = 1.0;
    std::size_t subsample = 0;

    std::string model = "1";
    double sigma = 0.1;
    bool cap = false;

    std::string schedule = "empirical";
    double delta = 0.001;
    double c_beta = 0.03;

    std::size_t k = 10;
    std::string mode = "delta-true";
    std::vector<uint64_t> budgets;
    uint64_t safety_cap = 0;

    std::size_t trials = 100;
    uint64_t seed = 0;
    std::string preset_name;
    std::string out_path;
    std::string out_format = "csv";
    bool verbose = false;
    bool normalize_queries = false;
    std::size_t workers = 1;

    std::string sweep_var;
    std::vector<double> grid;
    double k_frac = 0.0;
    std::vector<std::string> methods;

    app.add_option("--dataset", dataset_path, "dataset file (one point per row)");
    app.add_option("--dataset-format", dataset_format, "csv | raw")->check(CLI::IsMember({"csv", "raw"}));
    app.add_option("--synthetic", synthetic_family,
                   "uniform-cube | gaussian-clusters | binary-hypercube | line-with-gaps");
    app.add_option("--n", n, "points (synthetic size or per-trial subsample of --dataset)");
    app.add_option("--m", m, "dimensions (synthetic)");
    app.add_option("--gap-scale", gap_scale, "synthetic gap scale");
    app.add_option("--subsample", subsample, "rows drawn per trial from --dataset");
    app.add_option("--model", model, "oracle: 1 | 2 | exact")->check(CLI::IsMember({"1", "2", "exact"}));
    app.add_option("--sigma", sigma, "model-2 noise scale");
    app.add_flag("--cap", cap, "model 1: per-pair cap with exact fallback");
    app.add_option("--schedule", schedule, "theoretical | empirical")
        ->check(CLI::IsMember({"theoretical", "empirical"}));
    app.add_option("--delta", delta, "risk parameter");
    app.add_option("--c-beta", c_beta, "empirical schedule constant");
    app.add_option("--k", k, "neighbor rank (1-based)");
    app.add_option("--mode", mode, "delta-true | budget")->check(CLI::IsMember({"delta-true", "budget"}));
    app.add_option("--budgets", budgets, "budget grid")->delimiter(',');
    app.add_option("--safety-cap", safety_cap, "delta-true max charged queries (0 = default 10mn^2)");
    app.add_option("--trials", trials, "trials per grid point");
    app.add_option("--seed", seed, "root seed");
    app.add_option("--preset", preset_name, "named experiment preset");
    app.add_option("--out", out_path, "output file");
    app.add_option("--format", out_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
    app.add_flag("--verbose", verbose, "include per-trial records in JSON output");
    app.add_flag("--normalize-queries", normalize_queries, "report queries divided by m*n^2");
    app.add_option("--workers", workers, "concurrent trial runners");
    app.add_option("--sweep", sweep_var, "budget | n | c-beta")
        ->check(CLI::IsMember({"budget", "n", "c-beta"}));
    app.add_option("--grid", grid, "sweep grid values")->delimiter(',');
    app.add_option("--k-frac", k_frac, "n sweep: k as a fraction of n");
    app.add_option("--methods", methods, "adaptive | naive-plus | random-sampling")
        ->delimiter(',');
    app.add_flag("--list-presets", "print preset names and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (app.count("--list-presets")) {
        for (const auto& name : preset_names()) std::printf("%s\n", name.c_str());
        return 0;
    }

    ExperimentConfig cfg;
    if (!preset_name.empty()) cfg = preset(preset_name);

    auto set = [&](const char* flag) { return app.count(flag) > 0; };

    if (set("--dataset")) {
        cfg.dataset_path = dataset_path;
        cfg.synthetic.reset();
    }
    if (set("--dataset-format"))
        cfg.dataset_format = dataset_format == "raw" ? DataFormat::kRawBinary : DataFormat::kCsv;
    if (set("--synthetic")) {
        SyntheticSpec spec;
        spec.family = parse_family(synthetic_family);
        spec.n = cfg.synthetic ? cfg.synthetic->n : 0;
        spec.m = cfg.synthetic ? cfg.synthetic->m : 1;
        cfg.synthetic = spec;
        cfg.dataset_path.reset();
    }
    if (cfg.synthetic) {
        if (set("--n")) cfg.synthetic->n = n;
        if (set("--m")) cfg.synthetic->m = m;
        if (set("--gap-scale")) cfg.synthetic->gap_scale = gap_scale;
    } else if (set("--n") || set("--subsample")) {
        cfg.subsample_n = set("--subsample") ? subsample : n;
    }
    if (set("--model"))
        cfg.model = model == "1"   ? QueryModel::kDimensionSampling
                    : model == "2" ? QueryModel::kAdditiveNoise
                                   : QueryModel::kExact;
    if (set("--sigma")) cfg.sigma = sigma;
    if (set("--cap")) cfg.cap = cap;
    if (set("--schedule"))
        cfg.schedule = schedule == "theoretical" ? ScheduleKind::kTheoretical
                                                 : ScheduleKind::kEmpirical;
    if (set("--delta")) cfg.delta = delta;
    if (set("--c-beta")) cfg.c_beta = c_beta;
    if (set("--k")) cfg.k = k;
    if (set("--mode")) cfg.mode = mode == "budget" ? RunMode::kFixedBudget : RunMode::kDeltaTrue;
    if (set("--budgets")) {
        cfg.budgets = budgets;
        cfg.mode = RunMode::kFixedBudget;
    }
    if (set("--safety-cap") && safety_cap > 0) cfg.safety_cap = safety_cap;
    if (set("--trials")) cfg.trials = trials;
    if (set("--seed")) cfg.seed = seed;
    if (set("--normalize-queries")) cfg.normalize_queries = normalize_queries;
    if (set("--workers")) cfg.workers = workers;
    if (set("--k-frac")) cfg.k_fraction = k_frac;
    if (set("--methods")) {
        cfg.methods.clear();
        for (const auto& name : methods) {
            if (name == "adaptive") cfg.methods.push_back(Method::kAdaptive);
            else if (name == "naive-plus") cfg.methods.push_back(Method::kNaivePlus);
            else if (name == "random-sampling") cfg.methods.push_back(Method::kRandomSampling);
            else throw ConfigError("unknown method: " + name);
        }
    }
    cfg.keep_records = verbose;

    SweepResult result;
    if (!sweep_var.empty()) {
        if (grid.empty()) throw ConfigError("--sweep needs --grid");
        const SweepVariable var = sweep_var == "budget" ? SweepVariable::kBudget
                                  : sweep_var == "n"    ? SweepVariable::kN
                                                        : SweepVariable::kCBeta;
        result = sweep(cfg, var, grid);
    } else {
        result = run_trials(cfg);
    }

    if (out_path.empty()) {
        std::printf("method,variable,value,trials,accuracy,queries_mean\n");
        for (const auto& r : result.rows)
            std::printf("%s,%s,%g,%zu,%g,%g\n", r.method.c_str(), r.variable.c_str(), r.value,
                        r.trials, r.accuracy, r.queries_mean);
    } else if (out_format == "json") {
        emit_json(result, cfg, out_path, verbose);
    } else {
        emit_csv(result, out_path);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const knnmode::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
