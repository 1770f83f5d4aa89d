#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pspd/numerics.hpp"

namespace pspd {

inline constexpr std::size_t kDefaultEceBins = 10;

// Evaluation summary. sen/spe are only defined for binary tasks with both
// classes present; auc needs both classes (one-vs-rest macro for >2 classes).
struct MetricsReport {
    double acc = 0.0;
    std::optional<double> sen;
    std::optional<double> spe;
    std::optional<double> auc;
    double ece = 0.0;
    double nll = 0.0;
    std::size_t n_samples = 0;

    // Flat JSON object; undefined metrics are written as null.
    std::string to_json() const;
};

// Argmax decision, ties to the lower class index.
std::size_t predict_class(std::span<const double> probs) noexcept;

// Fills acc, sen, spe and n_samples. probs is N x C.
MetricsReport classification_metrics(const Matrix& probs, std::span<const std::size_t> labels);

// Mann-Whitney form: P(score_pos > score_neg) + 0.5 P(tie), from average
// ranks. labels are 0/1. Returns nullopt when a class is missing.
std::optional<double> auc(std::span<const double> scores, std::span<const std::size_t> labels);

// Binary: AUC of column 1. Multi-class: macro one-vs-rest over classes that
// have both positives and negatives.
std::optional<double> auc_from_probs(const Matrix& probs, std::span<const std::size_t> labels);

// Equal-width bins on [0, 1], right-closed (bin b holds (b/B, (b+1)/B], zero
// goes to the first bin). Confidence is the max class probability.
double ece(const Matrix& probs, std::span<const std::size_t> labels,
           std::size_t bins = kDefaultEceBins);

// Mean clamped cross-entropy.
double nll(const Matrix& probs, std::span<const std::size_t> labels);

MetricsReport evaluate_probs(const Matrix& probs, std::span<const std::size_t> labels,
                             std::size_t bins = kDefaultEceBins);

} // namespace pspd
