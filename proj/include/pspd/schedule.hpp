#pragma once

#include <cstddef>

namespace pspd {

// Linear pace: lambda(t) = lambda0 + alpha * t, t counted from 0.
struct PaceSchedule {
    double lambda0 = 0.6;
    double alpha = 0.006;

    void validate() const;
};

// Linear warmup from lr_init (epoch 0) to lr_peak (epoch warmup_epochs),
// constant afterwards.
struct LearningRateSchedule {
    double lr_init = 1e-6;
    double lr_peak = 1e-4;
    std::size_t warmup_epochs = 10;

    void validate() const;
};

double pace_at(const PaceSchedule& schedule, std::size_t epoch) noexcept;
double lr_at(const LearningRateSchedule& schedule, std::size_t epoch) noexcept;

} // namespace pspd
