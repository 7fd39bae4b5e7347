#include "knnmode/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace knnmode {

GapProfile gap_profile(const Dataset& ds, std::size_t i, std::size_t k) {
    const std::size_t count = ds.size() - 1;
    if (k < 1 || k > count) throw ConfigError("k out of range 1..n-1");
    const std::vector<double> d = ds.sorted_distances(i);

    GapProfile out;
    out.reference = i;
    out.k = k;
    out.gaps.resize(count);
    const double dk = d[k - 1];
    for (std::size_t j = 1; j <= count; ++j) {
        double g;
        if (j < k) {
            g = dk - d[j - 1];
        } else if (j > k) {
            g = d[j - 1] - dk;
        } else if (k == 1) {
            g = d[1] - d[0];
        } else if (k == count) {
            g = d[count - 1] - d[count - 2];
        } else {
            g = std::min(dk - d[k - 2], d[k] - dk);
        }
        out.gaps[j - 1] = g;
        if (g <= 0.0) out.identifiable = false;
    }
    return out;
}

std::vector<double> mode_gaps(const Dataset& ds, std::size_t k) {
    const std::size_t n = ds.size();
    const std::size_t mk = ds.brute_force_mode(k);
    const double d_mode = ds.exact_knn_distance(mk, k);
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        if (i != mk) out[i] = ds.exact_knn_distance(i, k) - d_mode;
    return out;
}

uint64_t z_threshold(double gap, const BetaSchedule& schedule) {
    if (!(gap > 0.0)) throw ConfigError("z-threshold needs a positive gap (non-identifiable)");
    const double target = gap / 8.0;
    if (schedule.width(1) <= target) return 1;
    uint64_t lo = 1, hi = 2;
    while (schedule.width(hi) > target) {
        lo = hi;
        if (hi > (1ull << 62))
            throw ConfigError("z-threshold exceeds the search range; gap too small");
        hi *= 2;
    }
    while (hi - lo > 1) {
        const uint64_t mid = lo + (hi - lo) / 2;
        (schedule.width(mid) <= target ? hi : lo) = mid;
    }
    return hi;
}

uint64_t find_knn_upper_bound(const Dataset& ds, std::size_t i, std::size_t k,
                              const BetaSchedule& schedule) {
    const GapProfile gp = gap_profile(ds, i, k);
    if (!gp.identifiable) throw ConfigError("zero gap: instance not identifiable");
    uint64_t total = 0;
    for (double g : gp.gaps) total += z_threshold(g, schedule);
    return 3 * total;
}

uint64_t mode_upper_bound(const Dataset& ds, std::size_t k, const BetaSchedule& schedule) {
    uint64_t total = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) total += find_knn_upper_bound(ds, i, k, schedule);
    const std::vector<double> mg = mode_gaps(ds, k);
    const std::size_t mk = ds.brute_force_mode(k);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (i == mk) continue;
        if (!(mg[i] > 0.0)) throw ConfigError("non-unique mode: instance not identifiable");
        total += z_threshold(mg[i], schedule);
    }
    return total;
}

BadEventMus bad_event_mus(const Dataset& ds, std::size_t i, std::size_t k) {
    const std::vector<double> d = ds.sorted_distances(i);
    const std::size_t count = d.size();
    if (k < 1 || k > count) throw ConfigError("k out of range 1..n-1");
    BadEventMus mus;
    mus.mu1 = k >= 2 ? 0.5 * (d[k - 2] + d[k - 1]) : -std::numeric_limits<double>::infinity();
    mus.mu2 = k < count ? 0.5 * (d[k - 1] + d[k]) : std::numeric_limits<double>::infinity();
    return mus;
}

bool bad_event(const PointState& state, std::size_t rank_j, std::size_t k, BadEventMus mus) {
    const std::size_t count = state.local_count();
    if (state.exact.empty()) throw ConfigError("bad_event needs exact distances on the state");
    if (rank_j < 1 || rank_j > count || k < 1 || k > count)
        throw ConfigError("rank out of range 1..n-1");
    // Map the sorted-exact rank to its local index (ties by lowest local).
    std::vector<uint32_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&state](uint32_t a, uint32_t b) {
        return state.exact[a] < state.exact[b];
    });
    const PairEstimate& e = state.est[order[rank_j - 1]];
    const double hi = e.mean + 3.0 * e.width;
    const double lo = e.mean - 3.0 * e.width;
    if (rank_j < k) return hi > mus.mu1;
    if (rank_j > k) return lo < mus.mu2;
    return lo < mus.mu1 || hi > mus.mu2;
}

double kl_bernoulli(double p, double q) {
    if (!(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0))
        throw ConfigError("kl_bernoulli needs p, q in (0, 1)");
    return p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
}

double kl_gaussian(double mu_a, double mu_b, double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("kl_gaussian needs sigma > 0");
    const double d = mu_a - mu_b;
    return d * d / (2.0 * sigma * sigma);
}

double find_knn_lower_bound(const InstanceMeans& inst, double delta) {
    if (!(delta > 0.0 && delta <= 0.15)) throw ConfigError("delta must be in (0, 0.15]");
    const std::size_t count = inst.means.size();
    if (count < 2) throw ConfigError("instance needs at least 2 means");
    if (inst.k < 1 || inst.k > count) throw ConfigError("k out of range");
    for (std::size_t a = 1; a < count; ++a)
        if (!(inst.means[a] > inst.means[a - 1]))
            throw ConfigError("means must be strictly ascending");
    if (inst.model == MeanModel::kBernoulli)
        for (double p : inst.means)
            if (!(p > 0.0 && p < 1.0)) throw ConfigError("bernoulli means must be in (0, 1)");

    auto kl = [&inst](double a, double b) {
        return inst.model == MeanModel::kBernoulli ? kl_bernoulli(a, b)
                                                   : kl_gaussian(a, b, inst.sigma);
    };

    const double mk = inst.means[inst.k - 1];
    // Nearest neighbor rank of k among {k-1, k+1}; ties prefer k-1.
    std::size_t kstar;
    if (inst.k == 1) {
        kstar = 2;
    } else if (inst.k == count) {
        kstar = count - 1;
    } else {
        const double left = mk - inst.means[inst.k - 2];
        const double right = inst.means[inst.k] - mk;
        kstar = left <= right ? inst.k - 1 : inst.k + 1;
    }

    double sum = 1.0 / kl(mk, inst.means[kstar - 1]);
    for (std::size_t a = 1; a <= count; ++a)
        if (a != inst.k) sum += 1.0 / kl(inst.means[a - 1], mk);
    return std::log(1.0 / (2.4 * delta)) * sum;
}

}  // namespace knnmode
