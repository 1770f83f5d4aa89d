#include "pspd/schedule.hpp"

#include <cmath>

#include "pspd/error.hpp"

namespace pspd {

void PaceSchedule::validate() const {
    if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) {
        throw ConfigError("pace lambda0 must be positive");
    }
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw ConfigError("pace alpha must be non-negative");
    }
}

void LearningRateSchedule::validate() const {
    if (!(lr_init > 0.0) || !(lr_peak > 0.0) || !std::isfinite(lr_peak)) {
        throw ConfigError("learning rates must be positive");
    }
    if (lr_init > lr_peak) {
        throw ConfigError("lr_init must not exceed lr_peak");
    }
}

double pace_at(const PaceSchedule& schedule, std::size_t epoch) noexcept {
    return schedule.lambda0 + schedule.alpha * static_cast<double>(epoch);
}

double lr_at(const LearningRateSchedule& schedule, std::size_t epoch) noexcept {
    if (epoch >= schedule.warmup_epochs) {
        return schedule.lr_peak;
    }
    const double frac = static_cast<double>(epoch) / static_cast<double>(schedule.warmup_epochs);
    return schedule.lr_init + frac * (schedule.lr_peak - schedule.lr_init);
}

} // namespace pspd
