#pragma once

#include <cstdint>
#include <vector>

#include "knnmode/dataset.hpp"
#include "knnmode/detail/hash_rng.hpp"
#include "knnmode/errors.hpp"

namespace knnmode {

enum class QueryModel {
    kDimensionSampling,  // model 1: squared gap along a uniformly random dimension
    kAdditiveNoise,      // model 2: exact distance plus zero-mean Gaussian noise
    kExact,              // diagnostic oracle: the exact distance, width-0 estimates
};

struct OracleOptions {
    QueryModel model = QueryModel::kAdditiveNoise;
    double sigma = 0.1;       // additive-noise scale
    uint64_t seed = 0;
    bool per_pair_cap = false;  // model 1 only: exact fallback after m queries on a pair
};

struct QuerySample {
    double value = 0.0;
    uint32_t i = 0;
    uint32_t j = 0;                  // global indices of the ordered pair
    bool exact_fallback_used = false;
    bool resolved = false;           // value is the exact distance; width collapses to 0
};

// One noisy-distance oracle bound to a dataset, with per-pair and global
// query accounting. Per-pair sample streams are counter-based: the t-th draw
// for an ordered pair depends only on (seed, i, j, t), never on query order.
// Not thread-safe; one session serves one estimation run.
class OracleSession {
public:
    OracleSession(const Dataset& ds, OracleOptions opt);

    QuerySample query(std::size_t i, std::size_t j);

    uint64_t total_queries() const { return total_; }
    uint64_t pair_queries(std::size_t i, std::size_t j) const {
        return counts_[i * n_ + j];
    }
    bool pair_resolved(std::size_t i, std::size_t j) const {
        return opt_.per_pair_cap && resolved_[i * n_ + j] != 0;
    }

    const OracleOptions& options() const { return opt_; }
    const Dataset& dataset() const { return *ds_; }

    // Exact distance with per-session caching (diagnostics and model 2).
    double exact(std::size_t i, std::size_t j);

private:
    const Dataset* ds_;
    OracleOptions opt_;
    std::size_t n_;
    std::size_t m_;
    uint64_t total_ = 0;
    std::vector<uint64_t> counts_;      // ordered pair (i, j) -> queries charged
    std::vector<uint8_t> resolved_;     // capped model: pair resolved exactly
    std::vector<double> exact_cache_;   // -1 = not computed
};

}  // namespace knnmode
