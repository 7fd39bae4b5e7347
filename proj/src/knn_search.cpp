#include "knnmode/knn_search.hpp"

#include <algorithm>

namespace knnmode {

namespace {

constexpr std::size_t kSmallRank = 12;

// k-th smallest of { value_of(j) : j in 0..count-1 }, 1-based k.
// Bounded-insertion fast path from whichever side of the order is closer.
template <class F>
double kth_smallest_value(std::size_t count, std::size_t k, F&& value_of,
                          std::vector<double>& scratch) {
    const std::size_t from_top = count - k + 1;
    if (k <= kSmallRank) {
        double best[kSmallRank];
        std::size_t filled = 0;
        for (std::size_t j = 0; j < count; ++j) {
            const double v = value_of(j);
            if (filled < k) {
                std::size_t p = filled++;
                while (p > 0 && best[p - 1] > v) {
                    best[p] = best[p - 1];
                    --p;
                }
                best[p] = v;
            } else if (v < best[k - 1]) {
                std::size_t p = k - 1;
                while (p > 0 && best[p - 1] > v) {
                    best[p] = best[p - 1];
                    --p;
                }
                best[p] = v;
            }
        }
        return best[k - 1];
    }
    if (from_top <= kSmallRank) {
        double best[kSmallRank];  // the from_top largest, ascending
        std::size_t filled = 0;
        for (std::size_t j = 0; j < count; ++j) {
            const double v = value_of(j);
            if (filled < from_top) {
                std::size_t p = filled++;
                while (p > 0 && best[p - 1] > v) {
                    best[p] = best[p - 1];
                    --p;
                }
                best[p] = v;
            } else if (v > best[0]) {
                std::size_t p = 0;
                while (p + 1 < from_top && best[p + 1] < v) {
                    best[p] = best[p + 1];
                    ++p;
                }
                best[p] = v;
            }
        }
        return best[0];
    }
    scratch.resize(count);
    for (std::size_t j = 0; j < count; ++j) scratch[j] = value_of(j);
    std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
    return scratch[k - 1];
}

}  // namespace

PointState::PointState(const Dataset& ds, std::size_t reference, bool with_exact)
    : reference(static_cast<uint32_t>(reference)), est(ds.size() - 1) {
    if (reference >= ds.size()) throw ConfigError("reference point out of range");
    if (with_exact) {
        exact.resize(ds.size() - 1);
        for (std::size_t j = 0; j < exact.size(); ++j)
            exact[j] = ds.exact_distance(reference, neighbor_to_global(reference, j));
    }
}

void ensure_initialized(PointState& state, std::size_t k, OracleSession& session,
                        const BetaSchedule& schedule) {
    const std::size_t count = state.local_count();
    if (k < 1 || k > count) throw ConfigError("k out of range 1..n-1");
    bool touched = false;
    for (std::size_t j = 0; j < count; ++j) {
        if (state.est[j].count != 0) continue;
        const QuerySample s =
            session.query(state.reference, neighbor_to_global(state.reference, j));
        update_estimate(state.est[j], s.value, s.resolved, schedule);
        touched = true;
    }
    if (touched || state.upper_k == std::numeric_limits<double>::infinity())
        refresh_interval(state, k);
}

PointState init_point_state(const Dataset& ds, std::size_t reference, std::size_t k,
                            OracleSession& session, const BetaSchedule& schedule,
                            bool with_exact) {
    PointState state(ds, reference, with_exact);
    ensure_initialized(state, k, session, schedule);
    return state;
}

TargetSelection select_targets(const PointState& state, std::size_t k) {
    const std::size_t count = state.local_count();
    if (k < 1 || k > count) throw ConfigError("k out of range 1..n-1");
    const auto& est = state.est;

    TargetSelection sel;
    sel.has_a1 = k > 1;
    sel.has_a2 = k < count;

    if (k <= kSmallRank) {
        // Bounded insertion of the k smallest (mean, index) pairs.
        double mv[kSmallRank];
        uint32_t mi[kSmallRank];
        std::size_t filled = 0;
        for (std::size_t j = 0; j < count; ++j) {
            const double v = est[j].mean;
            if (filled == k && !(v < mv[k - 1] || (v == mv[k - 1] && j < mi[k - 1]))) continue;
            std::size_t p = filled < k ? filled++ : k - 1;
            while (p > 0 && (mv[p - 1] > v || (mv[p - 1] == v && mi[p - 1] > j))) {
                mv[p] = mv[p - 1];
                mi[p] = mi[p - 1];
                --p;
            }
            mv[p] = v;
            mi[p] = static_cast<uint32_t>(j);
        }
        sel.b = mi[k - 1];
        if (sel.has_a1) {
            double best_u = -std::numeric_limits<double>::infinity();
            uint32_t best_j = 0;
            for (std::size_t r = 0; r + 1 < k; ++r) {
                const double u = est[mi[r]].ucb();
                if (u > best_u || (u == best_u && mi[r] < best_j)) {
                    best_u = u;
                    best_j = mi[r];
                }
            }
            sel.a1 = best_j;
        }
        if (sel.has_a2) {
            // Far set = everything not among the k smallest.
            double best_l = std::numeric_limits<double>::infinity();
            uint32_t best_j = 0;
            bool found = false;
            for (std::size_t j = 0; j < count; ++j) {
                bool in_near = false;
                for (std::size_t r = 0; r < k; ++r)
                    if (mi[r] == j) {
                        in_near = true;
                        break;
                    }
                if (in_near) continue;
                const double l = est[j].lcb();
                if (!found || l < best_l || (l == best_l && j < best_j)) {
                    found = true;
                    best_l = l;
                    best_j = static_cast<uint32_t>(j);
                }
            }
            sel.a2 = best_j;
        }
        return sel;
    }

    // General path: partition the index permutation around rank k.
    auto& idx = const_cast<PointState&>(state).idx_scratch;
    idx.resize(count);
    for (std::size_t j = 0; j < count; ++j) idx[j] = static_cast<uint32_t>(j);
    auto less = [&est](uint32_t a, uint32_t b) {
        return est[a].mean < est[b].mean || (est[a].mean == est[b].mean && a < b);
    };
    std::nth_element(idx.begin(), idx.begin() + (k - 1), idx.end(), less);
    sel.b = idx[k - 1];
    if (sel.has_a1) {
        double best_u = -std::numeric_limits<double>::infinity();
        uint32_t best_j = 0;
        for (std::size_t r = 0; r + 1 < k; ++r) {
            const double u = est[idx[r]].ucb();
            if (u > best_u || (u == best_u && idx[r] < best_j)) {
                best_u = u;
                best_j = idx[r];
            }
        }
        sel.a1 = best_j;
    }
    if (sel.has_a2) {
        double best_l = std::numeric_limits<double>::infinity();
        uint32_t best_j = 0;
        bool found = false;
        for (std::size_t r = k; r < count; ++r) {
            const double l = est[idx[r]].lcb();
            if (!found || l < best_l || (l == best_l && idx[r] < best_j)) {
                found = true;
                best_l = l;
                best_j = idx[r];
            }
        }
        sel.a2 = best_j;
    }
    return sel;
}

std::pair<bool, bool> stopping_met(const PointState& state, std::size_t k) {
    const TargetSelection sel = select_targets(state, k);
    const bool sc1 = !sel.has_a1 || state.est[sel.b].lcb() > state.est[sel.a1].ucb();
    const bool sc2 = !sel.has_a2 || state.est[sel.b].ucb() < state.est[sel.a2].lcb();
    return {sc1, sc2};
}

std::pair<double, double> knn_interval(const PointState& state, std::size_t k) {
    const std::size_t count = state.local_count();
    if (k < 1 || k > count) throw ConfigError("k out of range 1..n-1");
    auto& scratch = const_cast<PointState&>(state).val_scratch;
    const auto& est = state.est;
    const double lk =
        kth_smallest_value(count, k, [&est](std::size_t j) { return est[j].lcb(); }, scratch);
    const double uk =
        kth_smallest_value(count, k, [&est](std::size_t j) { return est[j].ucb(); }, scratch);
    return {lk, uk};
}

void refresh_interval(PointState& state, std::size_t k) {
    const auto [lk, uk] = knn_interval(state, k);
    state.lower_k = lk;
    state.upper_k = uk;
}

StepReport find_knn_step(PointState& state, std::size_t k, OracleSession& session,
                         const BetaSchedule& schedule) {
    if (state.knnfound)
        throw ConfigError("find_knn_step called with knnfound set; sample the pair directly");
    const uint64_t charged_before = session.total_queries();
    const TargetSelection sel = select_targets(state, k);

    StepReport report;
    auto sample = [&](uint32_t local) {
        const QuerySample s =
            session.query(state.reference, neighbor_to_global(state.reference, local));
        update_estimate(state.est[local], s.value, s.resolved, schedule);
        report.sampled[report.sampled_count++] = local;
    };

    sample(sel.b);
    bool found = true;
    if (sel.has_a1 && state.est[sel.a1].ucb() >= state.est[sel.b].lcb()) {
        sample(sel.a1);
        found = false;
    }
    if (sel.has_a2 && state.est[sel.b].ucb() >= state.est[sel.a2].lcb()) {
        sample(sel.a2);
        found = false;
    }

    refresh_interval(state, k);
    state.knnfound = found;
    state.candidate = sel.b;
    report.knnfound_after = found;
    report.queries_charged = session.total_queries() - charged_before;
    return report;
}

double knn_mean_estimate(const PointState& state, std::size_t k) {
    const std::size_t count = state.local_count();
    if (k < 1 || k > count) throw ConfigError("k out of range 1..n-1");
    auto& scratch = const_cast<PointState&>(state).val_scratch;
    const auto& est = state.est;
    return kth_smallest_value(count, k, [&est](std::size_t j) { return est[j].mean; }, scratch);
}

uint64_t run_find_knn(PointState& state, std::size_t k, OracleSession& session,
                      const BetaSchedule& schedule, uint64_t max_queries) {
    const uint64_t start = session.total_queries();
    ensure_initialized(state, k, session, schedule);
    uint64_t stalled = 0;
    while (!state.knnfound) {
        const StepReport r = find_knn_step(state, k, session, schedule);
        if (max_queries && session.total_queries() - start >= max_queries) break;
        // Fully resolved states with tied distances can never satisfy the
        // strict stopping criteria; bail out once steps stop charging.
        stalled = r.queries_charged == 0 ? stalled + 1 : 0;
        if (stalled > 2 * state.local_count() + 4) break;
    }
    return session.total_queries() - start;
}

}  // namespace knnmode
