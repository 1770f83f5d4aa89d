#include "pspd/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "pspd/error.hpp"

namespace pspd {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw InvalidInput("matrix data length " + std::to_string(data_.size()) + " != " +
                           std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows_) {
            throw InvalidInput("row index " + std::to_string(indices[i]) + " out of range");
        }
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                    out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
    }
    return out;
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

void check_logits(std::span<const double> logits) {
    if (logits.empty()) {
        throw InvalidInput("softmax of an empty vector");
    }
    for (double z : logits) {
        if (!std::isfinite(z)) {
            throw InvalidInput("softmax input is not finite");
        }
    }
}

} // namespace

double logsumexp(std::span<const double> logits) {
    check_logits(logits);
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) {
        sum += std::exp(z - m);
    }
    return m + std::log(sum);
}

ProbabilityVector softmax(std::span<const double> logits) {
    check_logits(logits);
    const double m = *std::max_element(logits.begin(), logits.end());
    ProbabilityVector p(logits.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        p[c] = std::exp(logits[c] - m);
        sum += p[c];
    }
    for (double& v : p) {
        v /= sum;
    }
    return p;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const ProbabilityVector p = softmax(logits.row(r));
        std::copy(p.begin(), p.end(), out.row(r).begin());
    }
    return out;
}

double cross_entropy(std::span<const double> probs, std::size_t label) {
    if (label >= probs.size()) {
        throw InvalidInput("label " + std::to_string(label) + " out of range for " +
                           std::to_string(probs.size()) + " classes");
    }
    return -std::log(std::max(probs[label], kLogClamp));
}

double kl_divergence(std::span<const double> teacher, std::span<const double> student) {
    if (teacher.size() != student.size()) {
        throw InvalidInput("kl_divergence: length mismatch");
    }
    double kl = 0.0;
    for (std::size_t c = 0; c < teacher.size(); ++c) {
        const double t = std::max(teacher[c], kLogClamp);
        const double s = std::max(student[c], kLogClamp);
        kl += teacher[c] * std::log(t / s);
    }
    return kl;
}

void append_number(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

} // namespace pspd
