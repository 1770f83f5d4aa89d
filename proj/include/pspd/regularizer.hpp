#pragma once

#include <cstddef>
#include <string_view>

namespace pspd {

// Self-paced regularizer family.
//   Hard: R(w) = -lambda * w               -> binary selection
//   Soft: R(w) = lambda * (w^2 / 2 - w)    -> linear down-weighting
enum class RegularizerKind { Hard, Soft };

std::string_view to_string(RegularizerKind kind) noexcept;
RegularizerKind parse_regularizer_kind(std::string_view text);

struct WeightSolution {
    double weight = 0.0;
    // w * loss + R(w) at the returned weight.
    double objective_value = 0.0;
};

inline constexpr std::size_t kDefaultOracleGridSteps = 100000;

double regularizer_value(RegularizerKind kind, double weight, double lambda);

// argmin over w in [0, 1] of w * loss + R(w). A loss at or above the pace
// threshold always gives weight 0.
WeightSolution closed_form_weight(RegularizerKind kind, double loss, double lambda);

// Brute-force minimisation of the same objective on grid_steps + 1 equispaced
// points of [0, 1]. Ties resolve to the smallest weight.
WeightSolution oracle_weight(RegularizerKind kind, double loss, double lambda,
                             std::size_t grid_steps = kDefaultOracleGridSteps);

} // namespace pspd
