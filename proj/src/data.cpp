#include "pspd/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "pspd/error.hpp"

namespace pspd {

void Dataset::validate() const {
    if (labels.empty()) {
        throw InvalidInput("dataset is empty");
    }
    if (features.rows() != labels.size()) {
        throw InvalidInput("dataset has " + std::to_string(features.rows()) + " feature rows but " +
                           std::to_string(labels.size()) + " labels");
    }
    if (class_count == 0) {
        throw InvalidInput("dataset class_count is zero");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= class_count) {
            throw InvalidInput("label " + std::to_string(labels[i]) + " at row " +
                               std::to_string(i) + " >= class_count");
        }
    }
    if (!features.all_finite()) {
        throw InvalidInput("dataset features contain non-finite values");
    }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.features = features.gather_rows(indices);
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
        out.labels.push_back(labels[i]);
    }
    out.class_count = class_count;
    out.class_names = class_names;
    return out;
}

void SyntheticSpec::validate() const {
    const SyntheticSpec& spec = *this;
    if (spec.class_count < 2) {
        throw InvalidInput("synthetic data needs at least two classes");
    }
    if (spec.n < spec.class_count) {
        throw InvalidInput("synthetic data needs n >= class_count");
    }
    if (spec.d < spec.class_count) {
        throw InvalidInput("synthetic data needs d >= class_count (one mean axis per class)");
    }
    if (!(spec.class_separation > 0.0)) {
        throw InvalidInput("class_separation must be positive");
    }
    if (!(spec.noise_rate >= 0.0 && spec.noise_rate < 1.0)) {
        throw InvalidInput("noise_rate must be in [0, 1)");
    }
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Class k sits at (sep / sqrt 2) * e_k, shifted so the centroid is the origin.
    const double offset = spec.class_separation / std::sqrt(2.0);
    const double centre = offset / static_cast<double>(spec.class_count);

    SyntheticDataset out;
    Dataset& data = out.data;
    data.class_count = spec.class_count;
    data.features = Matrix(spec.n, spec.d);
    data.labels.resize(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t y = i % spec.class_count;
        data.labels[i] = y;
        auto row = data.features.row(i);
        for (std::size_t j = 0; j < spec.d; ++j) {
            double mean = 0.0;
            if (j < spec.class_count) {
                mean = (j == y ? offset : 0.0) - centre;
            }
            row[j] = mean + gauss(rng);
        }
    }
    out.clean_labels = data.labels;

    const auto flips = static_cast<std::size_t>(
        std::floor(spec.noise_rate * static_cast<double>(spec.n)));
    std::vector<std::size_t> order(spec.n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_int_distribution<std::size_t> other(1, spec.class_count - 1);
    for (std::size_t k = 0; k < flips; ++k) {
        const std::size_t i = order[k];
        data.labels[i] = (data.labels[i] + other(rng)) % spec.class_count;
    }
    return out;
}

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(trim(std::string_view(line).substr(
            start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return fields;
}

std::optional<double> parse_double(const std::string& s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (s.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

std::optional<std::size_t> parse_index(const std::string& s) {
    std::size_t v = 0;
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (s.empty() || res.ec != std::errc() || res.ptr != end) {
        return std::nullopt;
    }
    return v;
}

} // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidInput("cannot open CSV file '" + path.string() + "'");
    }
    const std::string where = path.string();
    std::string line;
    if (!std::getline(in, line)) {
        throw InvalidInput(where + ": missing header row");
    }
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        line.erase(0, 3);
    }
    const std::vector<std::string> header = split_fields(line);

    std::size_t label_idx = 0;
    if (const auto* name = std::get_if<std::string>(&options.label_column)) {
        const auto it = std::find(header.begin(), header.end(), *name);
        if (it == header.end()) {
            throw InvalidInput(where + ": label column '" + *name + "' not in header");
        }
        label_idx = static_cast<std::size_t>(it - header.begin());
    } else {
        label_idx = std::get<std::size_t>(options.label_column);
        if (label_idx >= header.size()) {
            throw InvalidInput(where + ": label column index " + std::to_string(label_idx) +
                               " out of range");
        }
    }
    for (const auto& drop : options.drop_columns) {
        if (std::find(header.begin(), header.end(), drop) == header.end()) {
            throw InvalidInput(where + ": drop column '" + drop + "' not in header");
        }
    }
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const bool dropped = std::find(options.drop_columns.begin(), options.drop_columns.end(),
                                       header[c]) != options.drop_columns.end();
        if (c != label_idx && !dropped) {
            feature_cols.push_back(c);
        }
    }

    std::vector<double> values;
    std::vector<std::string> raw_labels;
    std::vector<std::size_t> line_numbers;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            throw InvalidInput(where + ": row " + std::to_string(line_no) + " has " +
                               std::to_string(fields.size()) + " fields, header has " +
                               std::to_string(header.size()));
        }
        for (std::size_t c : feature_cols) {
            const auto v = parse_double(fields[c]);
            if (!v) {
                throw InvalidInput(where + ": row " + std::to_string(line_no) + ", column '" +
                                   header[c] + "': non-numeric cell '" + fields[c] + "'");
            }
            values.push_back(*v);
        }
        if (fields[label_idx].empty()) {
            throw InvalidInput(where + ": row " + std::to_string(line_no) + ": empty label");
        }
        raw_labels.push_back(fields[label_idx]);
        line_numbers.push_back(line_no);
    }
    if (raw_labels.empty()) {
        throw InvalidInput(where + ": no data rows");
    }

    Dataset data;
    data.features = Matrix(raw_labels.size(), feature_cols.size(), std::move(values));
    data.labels.resize(raw_labels.size());

    const bool integer_labels = std::all_of(raw_labels.begin(), raw_labels.end(),
                                            [](const std::string& s) { return parse_index(s).has_value(); });
    if (integer_labels) {
        std::size_t max_label = 0;
        for (std::size_t i = 0; i < raw_labels.size(); ++i) {
            data.labels[i] = *parse_index(raw_labels[i]);
            max_label = std::max(max_label, data.labels[i]);
        }
        data.class_count = options.class_count.value_or(max_label + 1);
        for (std::size_t i = 0; i < data.labels.size(); ++i) {
            if (data.labels[i] >= data.class_count) {
                throw InvalidInput(where + ": row " + std::to_string(line_numbers[i]) +
                                   ": unseen label '" + raw_labels[i] + "' for " +
                                   std::to_string(data.class_count) + " classes");
            }
        }
    } else {
        const std::set<std::string> distinct(raw_labels.begin(), raw_labels.end());
        std::map<std::string, std::size_t> index;
        for (const auto& name : distinct) {
            index.emplace(name, data.class_names.size());
            data.class_names.push_back(name);
        }
        data.class_count = options.class_count.value_or(distinct.size());
        for (std::size_t i = 0; i < raw_labels.size(); ++i) {
            data.labels[i] = index.at(raw_labels[i]);
            if (data.labels[i] >= data.class_count) {
                throw InvalidInput(where + ": row " + std::to_string(line_numbers[i]) +
                                   ": unseen label '" + raw_labels[i] + "' for " +
                                   std::to_string(data.class_count) + " classes");
            }
        }
    }
    data.validate();
    return data;
}

void write_csv(const std::filesystem::path& path, const Dataset& dataset,
               const std::vector<std::size_t>* clean_labels) {
    if (clean_labels != nullptr && clean_labels->size() != dataset.size()) {
        throw InvalidInput("clean label count does not match dataset size");
    }
    std::string text;
    for (std::size_t j = 0; j < dataset.feature_count(); ++j) {
        text += "f" + std::to_string(j) + ",";
    }
    text += "label";
    if (clean_labels != nullptr) {
        text += ",clean_label";
    }
    text += '\n';
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        for (double v : dataset.features.row(i)) {
            append_number(text, v);
            text += ',';
        }
        text += std::to_string(dataset.labels[i]);
        if (clean_labels != nullptr) {
            text += ',' + std::to_string((*clean_labels)[i]);
        }
        text += '\n';
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text)) {
        throw std::runtime_error("cannot write CSV '" + path.string() + "'");
    }
}

Standardizer Standardizer::fit(const Matrix& features) {
    if (features.rows() == 0) {
        throw InvalidInput("cannot standardize with zero rows");
    }
    Standardizer s;
    const std::size_t d = features.cols();
    const double n = static_cast<double>(features.rows());
    s.mean_.assign(d, 0.0);
    s.scale_.assign(d, 0.0);
    for (std::size_t r = 0; r < features.rows(); ++r) {
        for (std::size_t j = 0; j < d; ++j) {
            s.mean_[j] += features(r, j);
        }
    }
    for (double& m : s.mean_) {
        m /= n;
    }
    for (std::size_t r = 0; r < features.rows(); ++r) {
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = features(r, j) - s.mean_[j];
            s.scale_[j] += diff * diff;
        }
    }
    for (double& v : s.scale_) {
        v /= n;
        // Variance at or below the clamp marks a constant column; it maps to 0.
        v = v > 1e-12 ? std::sqrt(v) : 0.0;
    }
    return s;
}

Matrix Standardizer::apply(const Matrix& features) const {
    if (features.cols() != mean_.size()) {
        throw InvalidInput("standardizer fitted on a different feature count");
    }
    Matrix out(features.rows(), features.cols());
    for (std::size_t r = 0; r < features.rows(); ++r) {
        for (std::size_t j = 0; j < features.cols(); ++j) {
            out(r, j) = scale_[j] > 0.0 ? (features(r, j) - mean_[j]) / scale_[j] : 0.0;
        }
    }
    return out;
}

void SplitSpec::validate() const {
    if (!(train_frac > 0.0 && val_frac > 0.0 && test_frac > 0.0)) {
        throw InvalidInput("split fractions must all be positive");
    }
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
        throw InvalidInput("split fractions must sum to 1");
    }
}

SplitIndices split(const Dataset& dataset, const SplitSpec& spec) {
    spec.validate();
    dataset.validate();
    constexpr std::size_t kParts = 3;
    const double fracs[kParts] = {spec.train_frac, spec.val_frac, spec.test_frac};
    const std::size_t n = dataset.size();
    const std::size_t classes = dataset.class_count;

    std::vector<std::vector<std::size_t>> members(classes);
    for (std::size_t i = 0; i < n; ++i) {
        members[dataset.labels[i]].push_back(i);
    }
    std::mt19937_64 rng(spec.seed);
    for (std::size_t c = 0; c < classes; ++c) {
        if (!members[c].empty() && members[c].size() < 3) {
            throw InvalidInput("class " + std::to_string(c) + " has " +
                               std::to_string(members[c].size()) +
                               " samples; stratified splitting needs at least 3");
        }
        std::shuffle(members[c].begin(), members[c].end(), rng);
    }

    // Largest-remainder totals per split.
    std::array<std::size_t, kParts> totals{};
    std::array<double, kParts> remainders{};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < kParts; ++s) {
        const double ideal = fracs[s] * static_cast<double>(n);
        totals[s] = static_cast<std::size_t>(std::floor(ideal));
        remainders[s] = ideal - std::floor(ideal);
        assigned += totals[s];
    }
    std::array<std::size_t, kParts> by_remainder{0, 1, 2};
    std::stable_sort(by_remainder.begin(), by_remainder.end(),
                     [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) {
        ++totals[by_remainder[k % kParts]];
    }

    // Per class: floor of the ideal share, then hand the leftovers to the
    // splits still furthest below their totals (at most one extra per split).
    std::vector<std::array<std::size_t, kParts>> counts(classes);
    std::vector<std::array<double, kParts>> fractional(classes);
    std::array<long long, kParts> deficit{};
    for (std::size_t s = 0; s < kParts; ++s) {
        deficit[s] = static_cast<long long>(totals[s]);
    }
    std::vector<std::size_t> leftover(classes, 0);
    for (std::size_t c = 0; c < classes; ++c) {
        std::size_t used = 0;
        for (std::size_t s = 0; s < kParts; ++s) {
            const double ideal = fracs[s] * static_cast<double>(members[c].size());
            counts[c][s] = static_cast<std::size_t>(std::floor(ideal));
            fractional[c][s] = ideal - std::floor(ideal);
            used += counts[c][s];
            deficit[s] -= static_cast<long long>(counts[c][s]);
        }
        leftover[c] = members[c].size() - used;
    }
    std::vector<std::size_t> class_order(classes);
    std::iota(class_order.begin(), class_order.end(), std::size_t{0});
    std::stable_sort(class_order.begin(), class_order.end(),
                     [&](std::size_t a, std::size_t b) { return leftover[a] > leftover[b]; });
    for (std::size_t c : class_order) {
        std::array<std::size_t, kParts> order{0, 1, 2};
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (deficit[a] != deficit[b]) {
                return deficit[a] > deficit[b];
            }
            return fractional[c][a] > fractional[c][b];
        });
        for (std::size_t k = 0; k < leftover[c]; ++k) {
            ++counts[c][order[k]];
            --deficit[order[k]];
        }
    }

    SplitIndices out;
    std::vector<std::size_t>* parts[kParts] = {&out.train, &out.val, &out.test};
    for (std::size_t c = 0; c < classes; ++c) {
        auto it = members[c].begin();
        for (std::size_t s = 0; s < kParts; ++s) {
            const auto count = static_cast<std::ptrdiff_t>(counts[c][s]);
            parts[s]->insert(parts[s]->end(), it, it + count);
            it += count;
        }
    }
    for (auto* part : parts) {
        std::sort(part->begin(), part->end());
    }
    return out;
}

} // namespace pspd
