#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pspd {

// Probabilities are clamped to this floor before any logarithm.
inline constexpr double kLogClamp = 1e-12;

// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    // Rows selected by index, in the given order.
    Matrix gather_rows(std::span<const std::size_t> indices) const;

    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

using ProbabilityVector = std::vector<double>;

double logsumexp(std::span<const double> logits);

// Max-subtracted softmax. Throws InvalidInput on empty or non-finite input.
ProbabilityVector softmax(std::span<const double> logits);

// Row-wise softmax of a logits matrix.
Matrix softmax_rows(const Matrix& logits);

// -ln(max(p[label], kLogClamp)).
double cross_entropy(std::span<const double> probs, std::size_t label);

// KL(teacher || student) = sum_c t_c ln(t_c / s_c), both clamped at kLogClamp.
double kl_divergence(std::span<const double> teacher, std::span<const double> student);

// Shortest decimal form that reads back to the same double.
void append_number(std::string& out, double v);

} // namespace pspd
