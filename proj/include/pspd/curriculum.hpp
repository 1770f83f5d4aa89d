#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pspd/data.hpp"
#include "pspd/metrics.hpp"
#include "pspd/model.hpp"
#include "pspd/regularizer.hpp"
#include "pspd/schedule.hpp"

namespace pspd {

// Which curriculum channels are active.
//   Baseline: all w = 1, no distillation.
//   PclOnly:  self-paced w, no distillation.
//   PcdOnly:  all w = 1, self-paced distillation weights.
//   Full:     both.
enum class Ablation { Baseline, PclOnly, PcdOnly, Full };

std::string_view to_string(Ablation ablation) noexcept;
Ablation parse_ablation(std::string_view text);
bool uses_pcl(Ablation ablation) noexcept;
bool uses_pcd(Ablation ablation) noexcept;

struct TrainConfig {
    std::size_t epochs = 180;
    std::size_t batch_size = 32;
    double gamma = 1.0;
    RegularizerKind pcl_kind = RegularizerKind::Hard;
    RegularizerKind pcd_kind = RegularizerKind::Soft;
    PaceSchedule pcl_schedule{0.6, 0.006};
    PaceSchedule pcd_schedule{0.8, 0.003};
    LearningRateSchedule lr_schedule{};
    AdamSettings adam{};
    std::vector<std::size_t> hidden_layers{32, 32};
    std::uint64_t seed = 0;
    Ablation ablation = Ablation::Full;
    std::size_t ece_bins = kDefaultEceBins;
    // Diagnostic: compute curricula every epoch but never update the model.
    bool freeze_model = false;

    // Throws ConfigError.
    void validate() const;
};

// Per-sample losses and the closed-form weights they produce.
struct Curriculum {
    std::vector<double> losses;
    std::vector<double> weights;
};

// Distillation curriculum also carries the teacher probabilities it computed,
// so the epoch's training steps reuse them.
struct DistillationCurriculum : Curriculum {
    Matrix teacher_probs;
};

// One no-gradient pass of the student over data: losses are the student's CE.
Curriculum determine_pcl_curriculum(const ModelParameters& student, const Dataset& data,
                                    double lambda_w, RegularizerKind kind);

// Losses are the teacher's CE against the ground truth, so samples the teacher
// gets confidently wrong are excluded from distillation. Throws StateError
// when there is no teacher.
DistillationCurriculum determine_pcd_curriculum(const std::optional<TeacherSnapshot>& teacher,
                                                const Dataset& data, double lambda_phi,
                                                RegularizerKind kind);

// Weights of one curriculum channel for one epoch.
struct ChannelWeighting {
    bool paced = false; // false: weights forced to 1 by the ablation
    RegularizerKind kind = RegularizerKind::Hard;
    double lambda = 0.0;
    std::vector<double> losses; // empty when not paced
    std::vector<double> weights;

    double nonzero_fraction() const noexcept;
    double mean_weight() const noexcept;
};

struct SampleWeighting {
    std::size_t epoch = 0;
    ChannelWeighting pcl;
    // Absent before the first teacher exists or when distillation is disabled.
    std::optional<ChannelWeighting> pcd;
};

// Subset of a channel aligned with batch rows.
struct ChannelSlice {
    std::span<const double> weights;
    bool paced = false;
    RegularizerKind kind = RegularizerKind::Hard;
    double lambda = 0.0;
};

struct WeightingSlice {
    ChannelSlice pcl;
    std::optional<ChannelSlice> pcd;
};

struct LossBreakdown {
    // (1/N) sum [w_i CE_i + gamma phi_i KL_i]; the part the gradient acts on.
    double objective = 0.0;
    // (1/N) sum [R(w_i) + R(phi_i)] over paced channels; constant in the parameters.
    double regularizer = 0.0;

    double total() const noexcept { return objective + regularizer; }
};

LossBreakdown epoch_loss(const ModelParameters& student,
                         const std::optional<TeacherSnapshot>& teacher, const Matrix& batch,
                         std::span<const std::size_t> labels, const WeightingSlice& slice,
                         double gamma);

// (1/N) sum_i R(w_i).
double mean_regularizer(RegularizerKind kind, std::span<const double> weights, double lambda);

struct EpochRecord {
    std::size_t epoch = 0;
    double lambda_w = 0.0;
    double lambda_phi = 0.0;
    double frac_w_nonzero = 0.0;
    double frac_phi_nonzero = 0.0;
    double mean_w = 0.0;
    double mean_phi = 0.0;
    double train_loss = 0.0;
    std::size_t kl_evaluations = 0;
    std::optional<std::size_t> teacher_epoch;
    std::optional<MetricsReport> validation;
};

struct TrainingTrace {
    std::vector<EpochRecord> epochs;

    // One row per epoch: epoch, lambda_w, lambda_phi, frac_w_nonzero,
    // frac_phi_nonzero, mean_w, mean_phi, train_loss, val_acc, val_auc,
    // val_ece, val_nll. Each comment line is written as "# <line>" first.
    void write_csv(const std::filesystem::path& path,
                   std::span<const std::string> comments = {}) const;
};

extern const std::vector<std::string> kTraceColumns;

// State exposed to observers at the end of each epoch.
struct EpochView {
    const SampleWeighting& weighting;
    // Teacher used for distillation during this epoch, if any.
    const std::optional<TeacherSnapshot>& teacher;
    const ModelParameters& student;
    const EpochRecord& record;
};

struct TrainOptions {
    const Dataset* validation = nullptr;
    std::function<void(const EpochView&)> on_epoch_end;
};

struct TrainResult {
    ModelParameters params;
    TrainingTrace trace;
};

// Progressive self-paced distillation loop. Epochs are numbered t = 0..T-1
// and the pace is lambda(t). Each epoch:
//   1. recompute the PCL curriculum with the current student;
//   2. if a teacher exists, recompute the PCD curriculum with it;
//   3. run shuffled mini-batch steps with the weights held fixed;
//   4. snapshot the student as the next epoch's teacher.
// RNG contract: one std::mt19937_64 seeded with config.seed draws the initial
// parameters (init_parameters) and then, each epoch, one std::shuffle of the
// index list 0..N-1.
TrainResult train(const TrainConfig& config, const Dataset& train_data,
                  const TrainOptions& options = {});

} // namespace pspd
