#include "knnmode/confidence.hpp"

namespace knnmode {

BetaSchedule BetaSchedule::theoretical(std::size_t n, double delta) {
    if (n < 2) throw ConfigError("theoretical schedule needs n >= 2");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must be in (0, 1)");
    const double dprime = delta / (static_cast<double>(n) * static_cast<double>(n - 1));
    // log log(1/d') must be positive, i.e. d' < 1/e.
    const double log_inv = std::log(1.0 / dprime);
    if (log_inv <= 1.0)
        throw ConfigError("delta too large: log log(1/delta') undefined");
    BetaSchedule s;
    s.kind_ = ScheduleKind::kTheoretical;
    s.delta_ = delta;
    s.n_ = n;
    s.alpha_base_ = log_inv + 3.0 * std::log(log_inv);
    return s;
}

BetaSchedule BetaSchedule::empirical(std::size_t n, double delta, double c_beta) {
    if (n < 2) throw ConfigError("empirical schedule needs n >= 2");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must be in (0, 1)");
    if (!(c_beta > 0.0)) throw ConfigError("c_beta must be positive");
    BetaSchedule s;
    s.kind_ = ScheduleKind::kEmpirical;
    s.delta_ = delta;
    s.n_ = n;
    s.c_beta_ = c_beta;
    s.n_over_delta_ = static_cast<double>(n) / delta;
    return s;
}

double beta_theoretical(uint64_t t, std::size_t n, double delta) {
    return BetaSchedule::theoretical(n, delta).width(t);
}

double beta_empirical(uint64_t t, std::size_t n, double delta, double c_beta) {
    return BetaSchedule::empirical(n, delta, c_beta).width(t);
}

void update_estimate(PairEstimate& est, double value, bool resolved, const BetaSchedule& schedule) {
    if (est.resolved) return;
    if (resolved) {
        est.mean = value;
        est.width = 0.0;
        est.resolved = true;
        if (est.count == 0) est.count = 1;
        return;
    }
    ++est.count;
    est.mean += (value - est.mean) / static_cast<double>(est.count);
    est.width = schedule.width(est.count);
}

}  // namespace knnmode
