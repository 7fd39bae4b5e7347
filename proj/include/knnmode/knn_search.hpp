#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "knnmode/confidence.hpp"
#include "knnmode/dataset.hpp"
#include "knnmode/oracle.hpp"

namespace knnmode {

// Search state for one reference point: n-1 pair estimates indexed by the
// local neighbor index (local j -> global j if j < reference else j+1),
// the current confidence interval on the k-NN distance, and the knnfound flag.
struct PointState {
    uint32_t reference = 0;
    std::vector<PairEstimate> est;
    std::vector<double> exact;  // exact distances, diagnostics only (may be empty)
    bool knnfound = false;
    uint32_t candidate = 0;  // local index of the estimated k-NN, valid when knnfound
    double lower_k = -std::numeric_limits<double>::infinity();
    double upper_k = std::numeric_limits<double>::infinity();

    PointState(const Dataset& ds, std::size_t reference, bool with_exact = true);

    std::size_t local_count() const { return est.size(); }

    // scratch buffers for the per-step order-statistic passes
    std::vector<uint32_t> idx_scratch;
    std::vector<double> val_scratch;
};

struct TargetSelection {
    uint32_t b = 0;  // local index at rank k of the means
    bool has_a1 = false;
    bool has_a2 = false;
    uint32_t a1 = 0;  // argmax UCB over ranks 1..k-1 (absent iff k == 1)
    uint32_t a2 = 0;  // argmin LCB over ranks k+1..n-1 (absent iff k == n-1)
};

struct StepReport {
    std::array<uint32_t, 3> sampled{};
    uint32_t sampled_count = 0;
    bool knnfound_after = false;
    uint64_t queries_charged = 0;
};

// Samples every pair with count 0 exactly once and refreshes the interval.
// Calling it again is a no-op on counts.
void ensure_initialized(PointState& state, std::size_t k, OracleSession& session,
                        const BetaSchedule& schedule);

PointState init_point_state(const Dataset& ds, std::size_t reference, std::size_t k,
                            OracleSession& session, const BetaSchedule& schedule,
                            bool with_exact = true);

// Rank the locals by running mean (ties: lowest local index) and pick b/a1/a2.
// Requires every estimate to have count >= 1.
TargetSelection select_targets(const PointState& state, std::size_t k);

// sc1: L[b] > U[a1] (vacuous without a1); sc2: U[b] < L[a2] (vacuous without a2).
std::pair<bool, bool> stopping_met(const PointState& state, std::size_t k);

// (k-th smallest LCB, k-th smallest UCB) over the current estimates.
std::pair<double, double> knn_interval(const PointState& state, std::size_t k);

// Recompute and store the interval on the state.
void refresh_interval(PointState& state, std::size_t k);

// One call of the Find-kNN body: sample b, then conditionally a1 and a2 with
// the bounds as they stand when each check is made; set knnfound when neither
// extra sample was needed. Requires an initialized state with knnfound false.
StepReport find_knn_step(PointState& state, std::size_t k, OracleSession& session,
                         const BetaSchedule& schedule);

// Run init + steps until knnfound. Returns total queries charged.
uint64_t run_find_knn(PointState& state, std::size_t k, OracleSession& session,
                      const BetaSchedule& schedule, uint64_t max_queries = 0);

// k-th smallest running mean (pairs never sampled contribute mean 0).
double knn_mean_estimate(const PointState& state, std::size_t k);

}  // namespace knnmode
