#include "pspd/curriculum.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "pspd/error.hpp"

namespace pspd {

std::string_view to_string(Ablation ablation) noexcept {
    switch (ablation) {
    case Ablation::Baseline:
        return "baseline";
    case Ablation::PclOnly:
        return "pcl_only";
    case Ablation::PcdOnly:
        return "pcd_only";
    case Ablation::Full:
        return "full";
    }
    return "full";
}

Ablation parse_ablation(std::string_view text) {
    for (Ablation a : {Ablation::Baseline, Ablation::PclOnly, Ablation::PcdOnly, Ablation::Full}) {
        if (text == to_string(a)) {
            return a;
        }
    }
    throw InvalidInput("unknown ablation '" + std::string(text) +
                       "' (expected baseline|pcl_only|pcd_only|full)");
}

bool uses_pcl(Ablation ablation) noexcept {
    return ablation == Ablation::PclOnly || ablation == Ablation::Full;
}

bool uses_pcd(Ablation ablation) noexcept {
    return ablation == Ablation::PcdOnly || ablation == Ablation::Full;
}

void TrainConfig::validate() const {
    if (epochs < 1) {
        throw ConfigError("epochs must be at least 1");
    }
    if (batch_size < 1) {
        throw ConfigError("batch_size must be at least 1");
    }
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw ConfigError("gamma must be a non-negative number");
    }
    pcl_schedule.validate();
    pcd_schedule.validate();
    lr_schedule.validate();
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
        !(adam.epsilon > 0.0)) {
        throw ConfigError("adam needs beta1, beta2 in [0, 1) and epsilon > 0");
    }
    for (std::size_t h : hidden_layers) {
        if (h == 0) {
            throw ConfigError("hidden layer sizes must be positive");
        }
    }
    if (ece_bins < 1) {
        throw ConfigError("ece_bins must be at least 1");
    }
}

namespace {

Curriculum weigh(const Matrix& probs, const Dataset& data, double lambda, RegularizerKind kind) {
    Curriculum c;
    c.losses.resize(data.size());
    c.weights.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        c.losses[i] = cross_entropy(probs.row(i), data.labels[i]);
        c.weights[i] = closed_form_weight(kind, c.losses[i], lambda).weight;
    }
    return c;
}

void check_data(const Dataset& data) {
    if (data.size() == 0) {
        throw InvalidInput("curriculum over an empty dataset");
    }
}

} // namespace

Curriculum determine_pcl_curriculum(const ModelParameters& student, const Dataset& data,
                                    double lambda_w, RegularizerKind kind) {
    check_data(data);
    const Matrix probs = softmax_rows(forward(student, data.features));
    return weigh(probs, data, lambda_w, kind);
}

DistillationCurriculum determine_pcd_curriculum(const std::optional<TeacherSnapshot>& teacher,
                                                const Dataset& data, double lambda_phi,
                                                RegularizerKind kind) {
    if (!teacher) {
        throw StateError("distillation curriculum requested before any teacher exists");
    }
    check_data(data);
    DistillationCurriculum out;
    out.teacher_probs = softmax_rows(forward(teacher->params(), data.features));
    static_cast<Curriculum&>(out) = weigh(out.teacher_probs, data, lambda_phi, kind);
    return out;
}

double ChannelWeighting::nonzero_fraction() const noexcept {
    if (weights.empty()) {
        return 0.0;
    }
    const auto nz = std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; });
    return static_cast<double>(nz) / static_cast<double>(weights.size());
}

double ChannelWeighting::mean_weight() const noexcept {
    if (weights.empty()) {
        return 0.0;
    }
    return std::accumulate(weights.begin(), weights.end(), 0.0) /
           static_cast<double>(weights.size());
}

double mean_regularizer(RegularizerKind kind, std::span<const double> weights, double lambda) {
    if (weights.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (double w : weights) {
        total += regularizer_value(kind, w, lambda);
    }
    return total / static_cast<double>(weights.size());
}

LossBreakdown epoch_loss(const ModelParameters& student,
                         const std::optional<TeacherSnapshot>& teacher, const Matrix& batch,
                         std::span<const std::size_t> labels, const WeightingSlice& slice,
                         double gamma) {
    const std::size_t n = batch.rows();
    if (labels.size() != n || slice.pcl.weights.size() != n ||
        (slice.pcd && slice.pcd->weights.size() != n)) {
        throw InvalidInput("epoch_loss: weighting slice is not aligned with the batch");
    }
    Matrix teacher_probs;
    if (slice.pcd) {
        if (!teacher) {
            throw StateError("epoch_loss: distillation weights without a teacher");
        }
        teacher_probs = softmax_rows(forward(teacher->params(), batch));
    }
    const BatchObjective objective{batch,
                                   labels,
                                   slice.pcl.weights,
                                   slice.pcd ? &teacher_probs : nullptr,
                                   slice.pcd ? slice.pcd->weights : std::span<const double>{},
                                   gamma};
    LossBreakdown out;
    out.objective = objective_value(student, objective);
    if (slice.pcl.paced) {
        out.regularizer += mean_regularizer(slice.pcl.kind, slice.pcl.weights, slice.pcl.lambda);
    }
    if (slice.pcd && slice.pcd->paced) {
        out.regularizer += mean_regularizer(slice.pcd->kind, slice.pcd->weights, slice.pcd->lambda);
    }
    return out;
}

const std::vector<std::string> kTraceColumns = {
    "epoch",  "lambda_w",   "lambda_phi", "frac_w_nonzero", "frac_phi_nonzero", "mean_w",
    "mean_phi", "train_loss", "val_acc",    "val_auc",        "val_ece",          "val_nll"};

void TrainingTrace::write_csv(const std::filesystem::path& path,
                              std::span<const std::string> comments) const {
    std::string text;
    for (const auto& c : comments) {
        text += "# " + c + '\n';
    }
    for (std::size_t k = 0; k < kTraceColumns.size(); ++k) {
        text += (k ? "," : "") + kTraceColumns[k];
    }
    text += '\n';
    for (const EpochRecord& r : epochs) {
        text += std::to_string(r.epoch);
        for (double v : {r.lambda_w, r.lambda_phi, r.frac_w_nonzero, r.frac_phi_nonzero, r.mean_w,
                         r.mean_phi, r.train_loss}) {
            text += ',';
            append_number(text, v);
        }
        auto opt = [&](const std::optional<double>& v) {
            text += ',';
            if (v) {
                append_number(text, *v);
            }
        };
        if (r.validation) {
            opt(r.validation->acc);
            opt(r.validation->auc);
            opt(r.validation->ece);
            opt(r.validation->nll);
        } else {
            text += ",,,,";
        }
        text += '\n';
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text)) {
        throw std::runtime_error("cannot write trace '" + path.string() + "'");
    }
}

namespace {

ChannelWeighting forced_channel(std::size_t n) {
    ChannelWeighting ch;
    ch.paced = false;
    ch.weights.assign(n, 1.0);
    return ch;
}

// Training data is validated up front, so an invalid-input failure inside the
// loop can only come from values that overflowed.
template <typename Fn>
auto checked(std::size_t epoch, Fn&& fn) {
    try {
        return fn();
    } catch (const InvalidInput& e) {
        throw DivergenceError("numerical failure at epoch " + std::to_string(epoch) + ": " +
                              e.what());
    }
}

ChannelWeighting paced_channel(Curriculum c, RegularizerKind kind, double lambda) {
    ChannelWeighting ch;
    ch.paced = true;
    ch.kind = kind;
    ch.lambda = lambda;
    ch.losses = std::move(c.losses);
    ch.weights = std::move(c.weights);
    return ch;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& values, std::span<const std::size_t> idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) {
        out.push_back(values[i]);
    }
    return out;
}

} // namespace

TrainResult train(const TrainConfig& config, const Dataset& train_data,
                  const TrainOptions& options) {
    config.validate();
    try {
        train_data.validate();
        if (options.validation != nullptr) {
            options.validation->validate();
        }
    } catch (const InvalidInput& e) {
        throw ConfigError(std::string("training data: ") + e.what());
    }
    if (options.validation != nullptr &&
        (options.validation->feature_count() != train_data.feature_count() ||
         options.validation->class_count != train_data.class_count)) {
        throw ConfigError("validation data shape does not match training data");
    }

    std::vector<std::size_t> sizes{train_data.feature_count()};
    sizes.insert(sizes.end(), config.hidden_layers.begin(), config.hidden_layers.end());
    sizes.push_back(train_data.class_count);

    std::mt19937_64 rng(config.seed);
    TrainResult result{init_parameters(sizes, rng), {}};
    ModelParameters& student = result.params;
    OptimizerState optimizer = make_optimizer_state(student, config.adam);
    std::optional<TeacherSnapshot> teacher;

    const std::size_t n = train_data.size();
    std::vector<std::size_t> order(n);

    for (std::size_t t = 0; t < config.epochs; ++t) {
        const double lambda_w = pace_at(config.pcl_schedule, t);
        const double lambda_phi = pace_at(config.pcd_schedule, t);

        SampleWeighting weighting;
        weighting.epoch = t;
        if (uses_pcl(config.ablation)) {
            weighting.pcl = paced_channel(
                checked(t, [&] {
                    return determine_pcl_curriculum(student, train_data, lambda_w, config.pcl_kind);
                }),
                config.pcl_kind, lambda_w);
        } else {
            weighting.pcl = forced_channel(n);
        }
        Matrix teacher_probs;
        if (uses_pcd(config.ablation) && teacher) {
            DistillationCurriculum pcd = checked(t, [&] {
                return determine_pcd_curriculum(teacher, train_data, lambda_phi, config.pcd_kind);
            });
            teacher_probs = std::move(pcd.teacher_probs);
            weighting.pcd = paced_channel(std::move(pcd), config.pcd_kind, lambda_phi);
        }

        const double lr = lr_at(config.lr_schedule, t);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);

        EpochRecord record;
        record.epoch = t;
        record.lambda_w = lambda_w;
        record.lambda_phi = lambda_phi;
        if (teacher) {
            record.teacher_epoch = teacher->source_epoch();
        }
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t stop = std::min(n, start + config.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, stop - start);
            const Matrix inputs = train_data.features.gather_rows(idx);
            const auto labels = gather(train_data.labels, idx);
            const auto ce_weights = gather(weighting.pcl.weights, idx);
            std::vector<double> kd_weights;
            Matrix batch_teacher;
            if (weighting.pcd) {
                kd_weights = gather(weighting.pcd->weights, idx);
                batch_teacher = teacher_probs.gather_rows(idx);
            }
            const BatchObjective objective{inputs,
                                           labels,
                                           ce_weights,
                                           weighting.pcd ? &batch_teacher : nullptr,
                                           kd_weights,
                                           config.gamma};
            BackwardResult step = checked(t, [&] { return backward(student, objective); });
            if (!std::isfinite(step.loss)) {
                throw DivergenceError("non-finite training loss at epoch " + std::to_string(t) +
                                      ", batch starting at " + std::to_string(start));
            }
            loss_sum += step.loss * static_cast<double>(idx.size());
            record.kl_evaluations += step.kl_evaluations;
            if (!config.freeze_model) {
                optimizer_step(student, optimizer, step.gradient, lr);
            }
        }
        if (!student.all_finite()) {
            throw DivergenceError("non-finite parameters after epoch " + std::to_string(t));
        }

        record.frac_w_nonzero = weighting.pcl.nonzero_fraction();
        record.mean_w = weighting.pcl.mean_weight();
        if (weighting.pcd) {
            record.frac_phi_nonzero = weighting.pcd->nonzero_fraction();
            record.mean_phi = weighting.pcd->mean_weight();
        }
        record.train_loss = loss_sum / static_cast<double>(n);
        if (options.validation != nullptr) {
            const Matrix probs = checked(
                t, [&] { return softmax_rows(forward(student, options.validation->features)); });
            record.validation =
                evaluate_probs(probs, options.validation->labels, config.ece_bins);
        }
        result.trace.epochs.push_back(record);

        if (options.on_epoch_end) {
            options.on_epoch_end(EpochView{weighting, teacher, student, record});
        }
        if (uses_pcd(config.ablation)) {
            teacher = snapshot(student, t);
        }
    }
    return result;
}

} // namespace pspd
