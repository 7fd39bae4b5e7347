#include "knnmode/mode_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace knnmode {

std::string termination_name(Termination t) {
    switch (t) {
        case Termination::kStoppingRule: return "stopping-rule";
        case Termination::kBudget: return "budget";
        case Termination::kSafetyCap: return "safety-cap";
    }
    return "?";
}

namespace {

constexpr uint64_t kNever = std::numeric_limits<uint64_t>::max();

struct RunContext {
    const Dataset* ds;
    const EstimatorConfig* config;
    OracleSession* session;
    std::vector<PointState> states;
    std::vector<double> exact_knn;  // diagnostics
    uint64_t start_total = 0;
    uint32_t truth = 0;

    std::vector<uint64_t> per_point;
    std::vector<uint64_t> knnfound_at;     // per-point charge when the flag fired
    bool coverage_held = true;
    bool knn_ci_valid = true;

    uint64_t charged() const { return session->total_queries() - start_total; }
};

RunContext make_context(const Dataset& ds, const EstimatorConfig& config,
                        OracleSession& session) {
    const std::size_t n = ds.size();
    if (n < 2) throw ConfigError("mode estimation needs n >= 2");
    if (config.k < 1 || config.k > n - 1) throw ConfigError("k out of range 1..n-1");

    RunContext ctx;
    ctx.ds = &ds;
    ctx.config = &config;
    ctx.session = &session;
    ctx.start_total = session.total_queries();
    ctx.states.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ctx.states.emplace_back(ds, i, config.diagnostics);
    if (config.diagnostics) {
        ctx.exact_knn.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> d = ctx.states[i].exact;
            std::nth_element(d.begin(), d.begin() + (config.k - 1), d.end());
            ctx.exact_knn[i] = d[config.k - 1];
        }
    }
    ctx.truth = static_cast<uint32_t>(ds.brute_force_mode(config.k));
    ctx.per_point.assign(n, 0);
    ctx.knnfound_at.assign(n, 0);
    return ctx;
}

void check_pair_coverage(RunContext& ctx, std::size_t i, uint32_t local) {
    if (!ctx.config->diagnostics || !ctx.coverage_held) return;
    const PairEstimate& e = ctx.states[i].est[local];
    if (std::abs(e.mean - ctx.states[i].exact[local]) > e.width) ctx.coverage_held = false;
}

void check_interval(RunContext& ctx, std::size_t i) {
    if (!ctx.config->diagnostics || !ctx.knn_ci_valid) return;
    const PointState& st = ctx.states[i];
    if (st.lower_k > ctx.exact_knn[i] || st.upper_k < ctx.exact_knn[i])
        ctx.knn_ci_valid = false;
}

// Sample every not-yet-sampled pair of point i; `stop` is polled before each
// query. Returns false when stopped early.
template <class StopFn>
bool init_point(RunContext& ctx, std::size_t i, StopFn&& stop) {
    PointState& st = ctx.states[i];
    const std::size_t locals = st.local_count();
    for (std::size_t j = 0; j < locals; ++j) {
        if (st.est[j].count != 0) continue;
        if (stop()) return false;
        const uint64_t before = ctx.session->total_queries();
        const QuerySample s = ctx.session->query(i, neighbor_to_global(i, j));
        update_estimate(st.est[j], s.value, s.resolved, ctx.config->schedule);
        ctx.per_point[i] += ctx.session->total_queries() - before;
        check_pair_coverage(ctx, i, static_cast<uint32_t>(j));
    }
    refresh_interval(st, ctx.config->k);
    check_interval(ctx, i);
    return true;
}

void note_knnfound(RunContext& ctx, std::size_t i) {
    if (ctx.knnfound_at[i] == 0 && ctx.states[i].knnfound)
        ctx.knnfound_at[i] = ctx.per_point[i];
}

uint64_t do_step(RunContext& ctx, std::size_t i) {
    PointState& st = ctx.states[i];
    const StepReport r = find_knn_step(st, ctx.config->k, *ctx.session, ctx.config->schedule);
    ctx.per_point[i] += r.queries_charged;
    for (uint32_t s = 0; s < r.sampled_count; ++s) check_pair_coverage(ctx, i, r.sampled[s]);
    check_interval(ctx, i);
    note_knnfound(ctx, i);
    return r.queries_charged;
}

uint64_t do_pair_sample(RunContext& ctx, std::size_t i) {
    PointState& st = ctx.states[i];
    const uint64_t before = ctx.session->total_queries();
    const QuerySample s = ctx.session->query(i, neighbor_to_global(i, st.candidate));
    update_estimate(st.est[st.candidate], s.value, s.resolved, ctx.config->schedule);
    const uint64_t charged = ctx.session->total_queries() - before;
    ctx.per_point[i] += charged;
    refresh_interval(st, ctx.config->k);
    check_pair_coverage(ctx, i, st.candidate);
    check_interval(ctx, i);
    return charged;
}

std::pair<std::size_t, std::size_t> two_smallest_lcb(const std::vector<PointState>& states) {
    std::size_t l1 = 0, l2 = 1;
    if (states[l2].lower_k < states[l1].lower_k) std::swap(l1, l2);
    for (std::size_t i = 2; i < states.size(); ++i) {
        const double v = states[i].lower_k;
        if (v < states[l1].lower_k) {
            l2 = l1;
            l1 = i;
        } else if (v < states[l2].lower_k) {
            l2 = i;
        }
    }
    return {l1, l2};
}

uint32_t argmin_mean_estimate(const RunContext& ctx) {
    std::size_t best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ctx.states.size(); ++i) {
        const double v = knn_mean_estimate(ctx.states[i], ctx.config->k);
        if (v < best_v) {
            best_v = v;
            best = i;
        }
    }
    return static_cast<uint32_t>(best);
}

TrialRecord snapshot(const RunContext& ctx, uint32_t returned, Termination why,
                     uint64_t budget) {
    TrialRecord rec;
    rec.returned_index = returned;
    rec.truth_index = ctx.truth;
    rec.correct = returned == ctx.truth;
    rec.total_queries = ctx.charged();
    rec.terminated_by = why;
    rec.budget = budget;
    rec.coverage_held = ctx.coverage_held;
    rec.knn_ci_valid = ctx.knn_ci_valid;
    rec.per_point_queries = ctx.per_point;
    rec.queries_at_knnfound = ctx.knnfound_at;
    return rec;
}

void check_budgets(const std::vector<uint64_t>& budgets) {
    for (std::size_t b = 1; b < budgets.size(); ++b)
        if (budgets[b] <= budgets[b - 1])
            throw ConfigError("budget grid must be strictly increasing");
}

// The delta-true algorithm and its fixed-budget truncations in one pass.
// Empty `budgets` means delta-true (safety cap active).
std::vector<TrialRecord> run_adaptive(const Dataset& ds, const EstimatorConfig& config,
                                      OracleSession& session,
                                      const std::vector<uint64_t>& budgets) {
    RunContext ctx = make_context(ds, config, session);
    const std::size_t n = ds.size();
    const bool budget_mode = !budgets.empty();
    check_budgets(budgets);
    const uint64_t cap =
        budget_mode ? kNever : config.safety_cap.value_or(10ull * ds.dim() * n * n);

    std::vector<TrialRecord> out;
    std::size_t next_budget = 0;
    // Emits a record for every budget the charge has crossed; true when done.
    auto emit_crossed = [&] {
        while (next_budget < budgets.size() && ctx.charged() >= budgets[next_budget]) {
            out.push_back(snapshot(ctx, argmin_mean_estimate(ctx), Termination::kBudget,
                                   budgets[next_budget]));
            ++next_budget;
        }
        return next_budget >= budgets.size();
    };
    auto emit_rest = [&](uint32_t returned, Termination why) {
        if (!budget_mode) {
            out.push_back(snapshot(ctx, returned, why, 0));
            return;
        }
        for (; next_budget < budgets.size(); ++next_budget)
            out.push_back(snapshot(ctx, returned, why, budgets[next_budget]));
    };
    auto stop_now = [&] {
        return budget_mode ? emit_crossed() : ctx.charged() >= cap;
    };

    // Initialization: one Find-kNN call per point (sampling pass + one step).
    for (std::size_t i = 0; i < n; ++i) {
        const bool full = init_point(ctx, i, stop_now);
        if (budget_mode) {
            if (emit_crossed()) return out;
        } else if (!full || ctx.charged() >= cap) {
            emit_rest(argmin_mean_estimate(ctx), Termination::kSafetyCap);
            return out;
        }
        do_step(ctx, i);
        if (budget_mode && emit_crossed()) return out;
    }

    uint64_t stalled = 0;
    while (true) {
        const auto [l1, l2] = two_smallest_lcb(ctx.states);
        if (ctx.states[l1].upper_k < ctx.states[l2].lower_k) {
            emit_rest(static_cast<uint32_t>(l1), Termination::kStoppingRule);
            return out;
        }
        if (budget_mode) {
            if (emit_crossed()) return out;
        } else if (ctx.charged() >= cap) {
            emit_rest(argmin_mean_estimate(ctx), Termination::kSafetyCap);
            return out;
        }
        const uint64_t charged =
            ctx.states[l1].knnfound ? do_pair_sample(ctx, l1) : do_step(ctx, l1);
        // Fully resolved ties never separate and stop charging; force out.
        stalled = charged == 0 ? stalled + 1 : 0;
        if (stalled > 2 * n + 4) {
            emit_rest(argmin_mean_estimate(ctx), Termination::kSafetyCap);
            return out;
        }
    }
}

// Shared engine for the two baselines: per-point budget shares with
// mean-estimate snapshots at every share threshold.
template <class PointTrace>
std::vector<TrialRecord> run_baseline(const Dataset& ds, const EstimatorConfig& config,
                                      const std::vector<uint64_t>& budgets,
                                      OracleSession& session, PointTrace&& trace_point) {
    if (budgets.empty()) throw ConfigError("baseline needs at least one budget");
    check_budgets(budgets);
    RunContext ctx = make_context(ds, config, session);
    const std::size_t n = ds.size();
    const std::size_t nb = budgets.size();
    std::vector<uint64_t> shares(nb);
    for (std::size_t b = 0; b < nb; ++b) shares[b] = budgets[b] / n;

    std::vector<std::vector<double>> snap_mean(nb, std::vector<double>(n));
    std::vector<std::vector<uint64_t>> snap_queries(nb, std::vector<uint64_t>(n));
    std::vector<std::vector<uint64_t>> snap_found(nb, std::vector<uint64_t>(n, 0));

    for (std::size_t i = 0; i < n; ++i) {
        std::size_t next = 0;
        auto take = [&](bool flush) {
            while (next < nb && (flush || ctx.per_point[i] >= shares[next])) {
                snap_mean[next][i] = knn_mean_estimate(ctx.states[i], config.k);
                snap_queries[next][i] = ctx.per_point[i];
                snap_found[next][i] = ctx.knnfound_at[i];
                ++next;
            }
        };
        take(false);
        trace_point(ctx, i, shares.back(), [&] { take(false); });
        take(true);
    }

    std::vector<TrialRecord> out;
    out.reserve(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        std::size_t best = 0;
        double best_v = std::numeric_limits<double>::infinity();
        uint64_t total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            total += snap_queries[b][i];
            if (snap_mean[b][i] < best_v) {
                best_v = snap_mean[b][i];
                best = i;
            }
        }
        TrialRecord rec;
        rec.returned_index = static_cast<uint32_t>(best);
        rec.truth_index = ctx.truth;
        rec.correct = rec.returned_index == ctx.truth;
        rec.total_queries = total;
        rec.terminated_by = Termination::kBudget;
        rec.budget = budgets[b];
        rec.coverage_held = ctx.coverage_held;
        rec.knn_ci_valid = ctx.knn_ci_valid;
        rec.per_point_queries = snap_queries[b];
        rec.queries_at_knnfound = snap_found[b];
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace

TrialRecord estimate_mode(const Dataset& ds, const EstimatorConfig& config,
                          OracleSession& session) {
    if (config.mode != RunMode::kDeltaTrue)
        throw ConfigError("estimate_mode requires delta-true mode");
    return run_adaptive(ds, config, session, {}).front();
}

std::vector<TrialRecord> estimate_mode_budget_sweep(const Dataset& ds,
                                                    const EstimatorConfig& config,
                                                    const std::vector<uint64_t>& budgets,
                                                    OracleSession& session) {
    if (config.mode != RunMode::kFixedBudget)
        throw ConfigError("budget sweep requires fixed-budget mode");
    if (budgets.empty()) throw ConfigError("budget sweep needs at least one budget");
    return run_adaptive(ds, config, session, budgets);
}

TrialRecord estimate_mode_budget(const Dataset& ds, const EstimatorConfig& config,
                                 OracleSession& session) {
    if (config.mode != RunMode::kFixedBudget)
        throw ConfigError("estimate_mode_budget requires fixed-budget mode");
    return run_adaptive(ds, config, session, {config.budget}).front();
}

std::vector<TrialRecord> baseline_naive_plus_sweep(const Dataset& ds,
                                                   const EstimatorConfig& config,
                                                   const std::vector<uint64_t>& budgets,
                                                   OracleSession& session) {
    return run_baseline(
        ds, config, budgets, session,
        [](RunContext& ctx, std::size_t i, uint64_t share, auto&& on_progress) {
            PointState& st = ctx.states[i];
            auto spent = [&] { return ctx.per_point[i] >= share; };
            const std::size_t locals = st.local_count();
            for (std::size_t j = 0; j < locals; ++j) {
                if (st.est[j].count != 0) continue;
                if (spent()) break;
                const uint64_t before = ctx.session->total_queries();
                const QuerySample s = ctx.session->query(i, neighbor_to_global(i, j));
                update_estimate(st.est[j], s.value, s.resolved, ctx.config->schedule);
                ctx.per_point[i] += ctx.session->total_queries() - before;
                check_pair_coverage(ctx, i, static_cast<uint32_t>(j));
                on_progress();
            }
            refresh_interval(st, ctx.config->k);
            check_interval(ctx, i);
            while (!spent() && !st.knnfound) {
                if (do_step(ctx, i) == 0) break;  // fully resolved point
                on_progress();
            }
            note_knnfound(ctx, i);
        });
}

TrialRecord baseline_naive_plus(const Dataset& ds, const EstimatorConfig& config,
                                uint64_t budget, OracleSession& session) {
    return baseline_naive_plus_sweep(ds, config, {budget}, session).front();
}

std::vector<TrialRecord> baseline_random_sampling_sweep(const Dataset& ds,
                                                        const EstimatorConfig& config,
                                                        const std::vector<uint64_t>& budgets,
                                                        OracleSession& session) {
    return run_baseline(
        ds, config, budgets, session,
        [](RunContext& ctx, std::size_t i, uint64_t share, auto&& on_progress) {
            detail::SplitMix64 picker(
                detail::hash3(ctx.session->options().seed ^ 0x726e64ULL, 0x77, i));
            PointState& st = ctx.states[i];
            const std::size_t n = ctx.states.size();
            uint64_t idle = 0;
            while (ctx.per_point[i] < share && idle <= 64 * n) {
                const auto local = static_cast<std::size_t>(picker.next_bounded(st.local_count()));
                const uint64_t before = ctx.session->total_queries();
                const QuerySample s = ctx.session->query(i, neighbor_to_global(i, local));
                update_estimate(st.est[local], s.value, s.resolved, ctx.config->schedule);
                const uint64_t charged = ctx.session->total_queries() - before;
                ctx.per_point[i] += charged;
                check_pair_coverage(ctx, i, static_cast<uint32_t>(local));
                idle = charged == 0 ? idle + 1 : 0;  // resolved pairs are free
                on_progress();
            }
            refresh_interval(st, ctx.config->k);
            check_interval(ctx, i);
        });
}

TrialRecord baseline_random_sampling(const Dataset& ds, const EstimatorConfig& config,
                                     uint64_t budget, OracleSession& session) {
    return baseline_random_sampling_sweep(ds, config, {budget}, session).front();
}

}  // namespace knnmode
