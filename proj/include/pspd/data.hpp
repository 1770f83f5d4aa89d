#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pspd/numerics.hpp"

namespace pspd {

struct Dataset {
    Matrix features; // N x d
    std::vector<std::size_t> labels;
    std::size_t class_count = 0;
    // Display name per class index; empty for integer-coded labels.
    std::vector<std::string> class_names;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t feature_count() const noexcept { return features.cols(); }

    // Throws InvalidInput when labels/features disagree or contain bad values.
    void validate() const;

    Dataset subset(std::span<const std::size_t> indices) const;
};

struct SyntheticSpec {
    std::size_t n = 2000;
    std::size_t d = 20;
    std::size_t class_count = 2;
    double class_separation = 2.0;
    double noise_rate = 0.2;
    std::uint64_t seed = 0;

    // Throws InvalidInput.
    void validate() const;
};

struct SyntheticDataset {
    Dataset data;                          // possibly noisy labels
    std::vector<std::size_t> clean_labels; // labels before flipping
};

// Isotropic unit-variance Gaussian clusters whose means are pairwise
// class_separation apart, then exactly floor(noise_rate * n) labels flipped to
// a uniformly chosen other class.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

using ColumnRef = std::variant<std::string, std::size_t>;

struct CsvOptions {
    ColumnRef label_column = std::string("label");
    std::optional<std::size_t> class_count;
    // Columns excluded from the feature matrix (e.g. a clean-label sidecar).
    std::vector<std::string> drop_columns;
};

// Header row required, comma-delimited. Integer labels are used as class
// indices; any non-integer label switches to lexicographic string mapping.
// Features are returned raw; see Standardizer.
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

// Writes f0..f{d-1},label[,clean_label] with round-trip exact numbers.
void write_csv(const std::filesystem::path& path, const Dataset& dataset,
               const std::vector<std::size_t>* clean_labels = nullptr);

// Per-column z-scoring. Fit on the training split only.
class Standardizer {
public:
    static Standardizer fit(const Matrix& features);
    Matrix apply(const Matrix& features) const;

    const std::vector<double>& mean() const noexcept { return mean_; }
    const std::vector<double>& scale() const noexcept { return scale_; }

private:
    std::vector<double> mean_;
    std::vector<double> scale_;
};

struct SplitSpec {
    double train_frac = 0.70;
    double val_frac = 0.15;
    double test_frac = 0.15;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

// Stratified random partition. Split totals follow largest-remainder rounding
// of N * fraction and every per-class count is within one of its ideal share.
SplitIndices split(const Dataset& dataset, const SplitSpec& spec);

} // namespace pspd
