#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "knnmode/confidence.hpp"
#include "knnmode/dataset.hpp"
#include "knnmode/knn_search.hpp"
#include "knnmode/oracle.hpp"

namespace knnmode {

enum class RunMode { kDeltaTrue, kFixedBudget };
enum class Termination { kStoppingRule, kBudget, kSafetyCap };

std::string termination_name(Termination t);

struct EstimatorConfig {
    EstimatorConfig(std::size_t k, BetaSchedule schedule)
        : k(k), schedule(std::move(schedule)) {}

    std::size_t k;
    BetaSchedule schedule;
    RunMode mode = RunMode::kDeltaTrue;
    uint64_t budget = 0;  // fixed-budget mode only
    // Max charged queries in delta-true mode; unset means 10*m*n^2.
    std::optional<uint64_t> safety_cap;
    // Track pair coverage and interval validity against exact distances.
    bool diagnostics = true;
};

struct TrialRecord {
    uint32_t returned_index = 0;
    uint32_t truth_index = 0;
    bool correct = false;
    uint64_t total_queries = 0;
    Termination terminated_by = Termination::kStoppingRule;
    uint64_t budget = 0;
    bool coverage_held = true;  // no pair estimate ever left its confidence interval
    bool knn_ci_valid = true;   // no k-NN interval ever excluded the true k-NN distance
    std::vector<uint64_t> per_point_queries;
    std::vector<uint64_t> queries_at_knnfound;  // charged when the flag fired; 0 = never
};

// Algorithm: initialize Find-kNN once per point, then repeatedly tighten the
// point with the smallest k-NN LCB until its UCB drops below the second
// smallest LCB. Returns that point.
TrialRecord estimate_mode(const Dataset& ds, const EstimatorConfig& config,
                          OracleSession& session);

// Same loop, stopped at a query budget; outputs the point with the smallest
// k-th-smallest running-mean distance (natural termination keeps the
// stopping-rule output).
TrialRecord estimate_mode_budget(const Dataset& ds, const EstimatorConfig& config,
                                 OracleSession& session);

// Budget split equally across points; Find-kNN is called on each point until
// its share is used (or its knnfound fires). Output by smallest mean estimate.
TrialRecord baseline_naive_plus(const Dataset& ds, const EstimatorConfig& config,
                                uint64_t budget, OracleSession& session);

// Budget split equally; each draw samples a uniformly random neighbor pair.
TrialRecord baseline_random_sampling(const Dataset& ds, const EstimatorConfig& config,
                                     uint64_t budget, OracleSession& session);

// Multi-budget variants: one record per budget (ascending), from a single
// pass. A fixed-budget run at B is a truncation of the run at B' > B under
// the counter-based oracle streams, so the sweep is exact, not approximate.
std::vector<TrialRecord> estimate_mode_budget_sweep(const Dataset& ds,
                                                    const EstimatorConfig& config,
                                                    const std::vector<uint64_t>& budgets,
                                                    OracleSession& session);
std::vector<TrialRecord> baseline_naive_plus_sweep(const Dataset& ds,
                                                   const EstimatorConfig& config,
                                                   const std::vector<uint64_t>& budgets,
                                                   OracleSession& session);
std::vector<TrialRecord> baseline_random_sampling_sweep(const Dataset& ds,
                                                        const EstimatorConfig& config,
                                                        const std::vector<uint64_t>& budgets,
                                                        OracleSession& session);

}  // namespace knnmode
