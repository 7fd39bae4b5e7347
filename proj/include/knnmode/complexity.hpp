#pragma once

#include <cstdint>
#include <vector>

#include "knnmode/confidence.hpp"
#include "knnmode/dataset.hpp"
#include "knnmode/knn_search.hpp"

namespace knnmode {

// Per-pair gaps around the k-NN distance, in sorted-exact-distance order:
// gaps[j-1] = d_k - d_j for j < k, min adjacent gap at j = k, d_j - d_k for
// j > k. At the boundaries (k = 1, k = n-1) the single adjacent gap is used.
struct GapProfile {
    std::size_t reference = 0;
    std::size_t k = 0;
    std::vector<double> gaps;
    bool identifiable = true;  // false iff some gap is zero
};

GapProfile gap_profile(const Dataset& ds, std::size_t i, std::size_t k);

// Dataset-level gaps d^i_k - d^{m_k}_k; the mode's own entry is 0.
std::vector<double> mode_gaps(const Dataset& ds, std::size_t k);

// Smallest integer z with schedule(z) <= gap/8.
uint64_t z_threshold(double gap, const BetaSchedule& schedule);

// 3 * sum_j z(gap_j): query bound for Find-kNN on point i.
uint64_t find_knn_upper_bound(const Dataset& ds, std::size_t i, std::size_t k,
                              const BetaSchedule& schedule);

// sum_i find_knn_upper_bound(i) + sum_{i != m_k} z(mode gap_i).
uint64_t mode_upper_bound(const Dataset& ds, std::size_t k, const BetaSchedule& schedule);

// Midpoints between the exact distances adjacent to rank k. Infinite on the
// missing side at the boundaries.
struct BadEventMus {
    double mu1;
    double mu2;
};

BadEventMus bad_event_mus(const Dataset& ds, std::size_t i, std::size_t k);

// Whether the pair at sorted-exact rank j (1-based) is still "bad": its
// 3-sigma band reaches across the relevant midpoint. Diagnostic only; the
// state must carry exact distances.
bool bad_event(const PointState& state, std::size_t rank_j, std::size_t k, BadEventMus mus);

double kl_bernoulli(double p, double q);
double kl_gaussian(double mu_a, double mu_b, double sigma);

enum class MeanModel { kBernoulli, kGaussian };

// A Find-kNN instance abstracted to its n-1 arm means, strictly ascending.
struct InstanceMeans {
    std::vector<double> means;
    MeanModel model = MeanModel::kGaussian;
    double sigma = 0.25;  // gaussian model only
    std::size_t k = 1;
};

// Expected-query lower bound for identifying the k-th smallest mean:
// log(1/(2.4 delta)) * [ sum_{a != k} 1/KL(nu_a, nu_k) + 1/KL(nu_k, nu_k*) ].
double find_knn_lower_bound(const InstanceMeans& inst, double delta);

}  // namespace knnmode
