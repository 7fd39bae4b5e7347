#include "knnmode/oracle.hpp"

#include <cstdio>

namespace knnmode {

OracleSession::OracleSession(const Dataset& ds, OracleOptions opt)
    : ds_(&ds), opt_(opt), n_(ds.size()), m_(ds.dim()) {
    if (opt_.per_pair_cap && opt_.model != QueryModel::kDimensionSampling)
        throw ConfigError("per-pair cap applies to the dimension-sampling model only");
    if (opt_.model == QueryModel::kAdditiveNoise) {
        if (!(opt_.sigma >= 0.0)) throw ConfigError("sigma must be nonnegative");
        if (opt_.sigma > 0.25)
            std::fprintf(stderr,
                         "warning: sigma=%g exceeds 1/4; the LIL width no longer covers this "
                         "noise scale\n",
                         opt_.sigma);
    }
    counts_.assign(n_ * n_, 0);
    if (opt_.per_pair_cap) resolved_.assign(n_ * n_, 0);
    exact_cache_.assign(n_ * n_, -1.0);
}

double OracleSession::exact(std::size_t i, std::size_t j) {
    double& slot = exact_cache_[i * n_ + j];
    if (slot < 0.0) {
        slot = ds_->exact_distance(i, j);
        exact_cache_[j * n_ + i] = slot;
    }
    return slot;
}

QuerySample OracleSession::query(std::size_t i, std::size_t j) {
    if (i == j) throw ConfigError("oracle query requires i != j");
    QuerySample out;
    out.i = static_cast<uint32_t>(i);
    out.j = static_cast<uint32_t>(j);
    const std::size_t slot = i * n_ + j;

    switch (opt_.model) {
        case QueryModel::kExact:
            ++counts_[slot];
            ++total_;
            out.value = exact(i, j);
            out.resolved = true;
            return out;

        case QueryModel::kAdditiveNoise: {
            const uint64_t t = ++counts_[slot];
            ++total_;
            const uint64_t h = detail::hash4(opt_.seed, i, j, t);
            out.value = exact(i, j) + opt_.sigma * detail::gaussian(h);
            return out;
        }

        case QueryModel::kDimensionSampling: {
            if (opt_.per_pair_cap) {
                if (resolved_[slot]) {
                    // Already evaluated exactly; repeat queries are free.
                    out.value = exact(i, j);
                    out.resolved = true;
                    out.exact_fallback_used = true;
                    return out;
                }
                if (counts_[slot] + 1 >= m_) {
                    // The query that reaches the cap sweeps all m dimensions.
                    counts_[slot] += m_;
                    total_ += m_;
                    resolved_[slot] = 1;
                    out.value = exact(i, j);
                    out.resolved = true;
                    out.exact_fallback_used = true;
                    return out;
                }
            }
            const uint64_t t = ++counts_[slot];
            ++total_;
            const uint64_t h = detail::hash4(opt_.seed, i, j, t);
            const std::size_t p = static_cast<std::size_t>(detail::bounded(h, m_));
            const double d = ds_->coord(i, p) - ds_->coord(j, p);
            out.value = d * d;
            return out;
        }
    }
    throw ConfigError("unknown oracle model");
}

}  // namespace knnmode
