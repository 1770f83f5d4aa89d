#include "pspd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "pspd/error.hpp"

namespace pspd {

namespace {

void check_inputs(const Matrix& probs, std::span<const std::size_t> labels) {
    if (probs.rows() != labels.size()) {
        throw InvalidInput("metrics: probability rows and labels differ in length");
    }
    if (labels.empty()) {
        throw InvalidInput("metrics: no samples");
    }
    for (std::size_t y : labels) {
        if (y >= probs.cols()) {
            throw InvalidInput("metrics: label " + std::to_string(y) + " out of range");
        }
    }
}

} // namespace

std::string MetricsReport::to_json() const {
    auto opt = [](const std::optional<double>& v) -> nlohmann::json {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    nlohmann::ordered_json j;
    j["acc"] = acc;
    j["sen"] = opt(sen);
    j["spe"] = opt(spe);
    j["auc"] = opt(auc);
    j["ece"] = ece;
    j["nll"] = nll;
    j["n_samples"] = n_samples;
    return j.dump(2);
}

std::size_t predict_class(std::span<const double> probs) noexcept {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.size(); ++c) {
        if (probs[c] > probs[best]) {
            best = c;
        }
    }
    return best;
}

MetricsReport classification_metrics(const Matrix& probs, std::span<const std::size_t> labels) {
    check_inputs(probs, labels);
    MetricsReport report;
    report.n_samples = labels.size();
    std::size_t correct = 0;
    std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const std::size_t pred = predict_class(probs.row(i));
        correct += pred == labels[i] ? 1 : 0;
        if (labels[i] == 1) {
            (pred == 1 ? tp : fn)++;
        } else if (labels[i] == 0) {
            (pred == 0 ? tn : fp)++;
        }
    }
    report.acc = static_cast<double>(correct) / static_cast<double>(labels.size());
    if (probs.cols() == 2) {
        if (tp + fn > 0) {
            report.sen = static_cast<double>(tp) / static_cast<double>(tp + fn);
        }
        if (tn + fp > 0) {
            report.spe = static_cast<double>(tn) / static_cast<double>(tn + fp);
        }
    }
    return report;
}

std::optional<double> auc(std::span<const double> scores, std::span<const std::size_t> labels) {
    if (scores.size() != labels.size()) {
        throw InvalidInput("auc: scores and labels differ in length");
    }
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of (twice the) average 1-based ranks of the positives; doubling
    // keeps tied ranks integral.
    double positives = 0.0;
    double twice_rank_sum = 0.0;
    for (std::size_t start = 0; start < n;) {
        std::size_t end = start;
        while (end < n && scores[order[end]] == scores[order[start]]) {
            ++end;
        }
        const double twice_avg_rank = static_cast<double>(start + 1 + end);
        for (std::size_t k = start; k < end; ++k) {
            if (labels[order[k]] > 1) {
                throw InvalidInput("auc: labels must be 0 or 1");
            }
            if (labels[order[k]] == 1) {
                positives += 1.0;
                twice_rank_sum += twice_avg_rank;
            }
        }
        start = end;
    }
    const double negatives = static_cast<double>(n) - positives;
    if (positives == 0.0 || negatives == 0.0) {
        return std::nullopt;
    }
    const double twice_u = twice_rank_sum - positives * (positives + 1.0);
    return twice_u / (2.0 * positives * negatives);
}

std::optional<double> auc_from_probs(const Matrix& probs, std::span<const std::size_t> labels) {
    check_inputs(probs, labels);
    const std::size_t classes = probs.cols();
    std::vector<double> scores(labels.size());
    std::vector<std::size_t> binary(labels.size());
    auto one_vs_rest = [&](std::size_t c) {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            scores[i] = probs(i, c);
            binary[i] = labels[i] == c ? 1 : 0;
        }
        return auc(scores, binary);
    };
    if (classes == 2) {
        return one_vs_rest(1);
    }
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        if (const auto a = one_vs_rest(c)) {
            sum += *a;
            ++defined;
        }
    }
    if (defined == 0) {
        return std::nullopt;
    }
    return sum / static_cast<double>(defined);
}

double ece(const Matrix& probs, std::span<const std::size_t> labels, std::size_t bins) {
    check_inputs(probs, labels);
    if (bins == 0) {
        throw InvalidInput("ece needs at least one bin");
    }
    std::vector<double> conf_sum(bins, 0.0);
    std::vector<double> correct(bins, 0.0);
    std::vector<std::size_t> count(bins, 0);
    const double b = static_cast<double>(bins);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto p = probs.row(i);
        const std::size_t pred = predict_class(p);
        const double conf = p[pred];
        const double edge = std::ceil(conf * b);
        std::size_t bin = edge <= 1.0 ? 0 : static_cast<std::size_t>(edge) - 1;
        bin = std::min(bin, bins - 1);
        conf_sum[bin] += conf;
        correct[bin] += pred == labels[i] ? 1.0 : 0.0;
        ++count[bin];
    }
    const double n = static_cast<double>(labels.size());
    double total = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
        if (count[k] == 0) {
            continue;
        }
        const double nk = static_cast<double>(count[k]);
        total += (nk / n) * std::abs(correct[k] / nk - conf_sum[k] / nk);
    }
    return total;
}

double nll(const Matrix& probs, std::span<const std::size_t> labels) {
    check_inputs(probs, labels);
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        total += cross_entropy(probs.row(i), labels[i]);
    }
    return total / static_cast<double>(labels.size());
}

MetricsReport evaluate_probs(const Matrix& probs, std::span<const std::size_t> labels,
                             std::size_t bins) {
    MetricsReport report = classification_metrics(probs, labels);
    report.auc = auc_from_probs(probs, labels);
    report.ece = ece(probs, labels, bins);
    report.nll = nll(probs, labels);
    return report;
}

} // namespace pspd
