#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "knnmode/errors.hpp"

namespace knnmode {

enum class ScheduleKind { kTheoretical, kEmpirical };

// Anytime confidence-width schedule beta(t).
//
// Theoretical: finite-sample law-of-the-iterated-logarithm width
//   beta(t) = sqrt(2*alpha(t, d')/t),
//   alpha(u, d') = log(1/d') + 3*log(log(1/d')) + 1.5*log(1 + log(u)),
//   d' = delta/(n*(n-1)).
// Empirical: the looser bound used for experiments,
//   beta(u) = sqrt(c_beta * log(1 + (1 + log(u))*n/delta) / u).
// Natural logarithms throughout.
class BetaSchedule {
public:
    static BetaSchedule theoretical(std::size_t n, double delta);
    static BetaSchedule empirical(std::size_t n, double delta, double c_beta);

    double width(uint64_t t) const {
        if (t == 0) throw ConfigError("beta(t) undefined before the first sample");
        const double td = static_cast<double>(t);
        if (kind_ == ScheduleKind::kTheoretical)
            return std::sqrt(2.0 * (alpha_base_ + 1.5 * std::log1p(std::log(td))) / td);
        return std::sqrt(c_beta_ * std::log1p((1.0 + std::log(td)) * n_over_delta_) / td);
    }

    ScheduleKind kind() const { return kind_; }
    double delta() const { return delta_; }
    std::size_t n() const { return n_; }
    double c_beta() const { return c_beta_; }

private:
    BetaSchedule() = default;

    ScheduleKind kind_ = ScheduleKind::kTheoretical;
    double delta_ = 0.0;
    std::size_t n_ = 0;
    double c_beta_ = 0.0;
    double alpha_base_ = 0.0;     // log(1/d') + 3 log log(1/d')
    double n_over_delta_ = 0.0;   // n/delta
};

double beta_theoretical(uint64_t t, std::size_t n, double delta);
double beta_empirical(uint64_t t, std::size_t n, double delta, double c_beta);

// Running estimate of one ordered pair's distance.
// Bounds are mean +- width; before the first sample they are infinite.
// A resolved estimate (exact oracle, or capped model-1 fallback) has width 0
// and ignores further updates.
struct PairEstimate {
    double mean = 0.0;
    double width = std::numeric_limits<double>::infinity();
    uint64_t count = 0;
    bool resolved = false;

    double ucb() const { return count == 0 ? std::numeric_limits<double>::infinity() : mean + width; }
    double lcb() const { return count == 0 ? -std::numeric_limits<double>::infinity() : mean - width; }
};

struct QuerySample;  // oracle.hpp

void update_estimate(PairEstimate& est, double value, bool resolved, const BetaSchedule& schedule);

}  // namespace knnmode
