#include "pspd/regularizer.hpp"

#include <cmath>
#include <string>

#include "pspd/error.hpp"

namespace pspd {

std::string_view to_string(RegularizerKind kind) noexcept {
    return kind == RegularizerKind::Hard ? "hard" : "soft";
}

RegularizerKind parse_regularizer_kind(std::string_view text) {
    if (text == "hard") {
        return RegularizerKind::Hard;
    }
    if (text == "soft") {
        return RegularizerKind::Soft;
    }
    throw InvalidInput("unknown regularizer kind '" + std::string(text) + "' (expected hard|soft)");
}

namespace {

void check_lambda(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw InvalidInput("pace lambda must be a positive finite number");
    }
}

void check_loss(double loss) {
    if (!(loss >= 0.0) || std::isnan(loss)) {
        throw InvalidInput("self-paced loss must be non-negative");
    }
}

} // namespace

double regularizer_value(RegularizerKind kind, double weight, double lambda) {
    if (!(weight >= 0.0 && weight <= 1.0)) {
        throw InvalidInput("regularizer weight outside [0, 1]");
    }
    check_lambda(lambda);
    switch (kind) {
    case RegularizerKind::Hard:
        return -lambda * weight;
    case RegularizerKind::Soft:
        return lambda * (0.5 * weight * weight - weight);
    }
    return 0.0;
}

WeightSolution closed_form_weight(RegularizerKind kind, double loss, double lambda) {
    check_loss(loss);
    check_lambda(lambda);
    double weight = 0.0;
    if (loss < lambda) {
        weight = kind == RegularizerKind::Hard ? 1.0 : 1.0 - loss / lambda;
    }
    return {weight, weight * loss + regularizer_value(kind, weight, lambda)};
}

WeightSolution oracle_weight(RegularizerKind kind, double loss, double lambda,
                             std::size_t grid_steps) {
    check_loss(loss);
    check_lambda(lambda);
    if (grid_steps < 1000) {
        throw InvalidInput("oracle grid needs at least 1000 steps");
    }
    WeightSolution best{0.0, regularizer_value(kind, 0.0, lambda)};
    const double steps = static_cast<double>(grid_steps);
    for (std::size_t k = 1; k <= grid_steps; ++k) {
        const double w = static_cast<double>(k) / steps;
        const double value = w * loss + regularizer_value(kind, w, lambda);
        if (value < best.objective_value) {
            best = {w, value};
        }
    }
    return best;
}

} // namespace pspd
