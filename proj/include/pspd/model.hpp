#pragma once

#include <cstddef>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "pspd/numerics.hpp"

namespace pspd {

// One affine layer. weight is (outputs x inputs).
struct Layer {
    Matrix weight;
    std::vector<double> bias;

    friend bool operator==(const Layer&, const Layer&) = default;
};

// Fully-connected ReLU classifier. Hidden layers use ReLU, the output layer is
// linear (raw logits). Also used as the gradient type, since gradients share
// the parameter shape.
class ModelParameters {
public:
    ModelParameters() = default;
    explicit ModelParameters(std::vector<Layer> layers);

    // Zero-filled parameters for the given layer sizes (input first, classes last).
    static ModelParameters zeros(std::span<const std::size_t> layer_sizes);

    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<Layer>& layers() noexcept { return layers_; }

    std::vector<std::size_t> layer_sizes() const;
    std::size_t input_size() const;
    std::size_t output_size() const;
    std::size_t parameter_count() const noexcept;

    // Flat view in layer order: weights row-major, then bias, per layer.
    std::vector<double> flatten() const;
    void assign_flat(std::span<const double> values);

    bool all_finite() const noexcept;

    friend bool operator==(const ModelParameters&, const ModelParameters&) = default;

private:
    std::vector<Layer> layers_;
};

using Gradient = ModelParameters;

// Same layer sizes and identical bit patterns in every value.
bool bitwise_equal(const ModelParameters& a, const ModelParameters& b);

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
ModelParameters init_parameters(std::span<const std::size_t> layer_sizes, std::mt19937_64& rng);

Matrix forward(const ModelParameters& params, const Matrix& batch);

// Per-sample weighted objective over one batch:
//   (1/N) sum_i [ ce_weight_i * CE(p_i, y_i) + gamma * kd_weight_i * KL(t_i || p_i) ]
// The weights are constants with respect to the parameters.
struct BatchObjective {
    const Matrix& inputs;
    std::span<const std::size_t> labels;
    std::span<const double> ce_weights;
    // Teacher class probabilities aligned with inputs; null when no teacher.
    const Matrix* teacher_probs = nullptr;
    std::span<const double> kd_weights = {};
    double gamma = 0.0;
};

struct BackwardResult {
    Gradient gradient;
    double loss = 0.0;
    std::size_t kl_evaluations = 0;
};

BackwardResult backward(const ModelParameters& params, const BatchObjective& objective);

// Loss value only, same definition as backward().
double objective_value(const ModelParameters& params, const BatchObjective& objective);

struct AdamSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    ModelParameters first_moment;
    ModelParameters second_moment;
    std::size_t step_count = 0;
    AdamSettings settings;
};

OptimizerState make_optimizer_state(const ModelParameters& params, AdamSettings settings = {});

// One bias-corrected adaptive-moment step, in place.
void optimizer_step(ModelParameters& params, OptimizerState& state, const Gradient& gradient,
                    double lr);

// Frozen copy of the student taken at the end of an epoch.
class TeacherSnapshot {
public:
    TeacherSnapshot(ModelParameters params, std::size_t source_epoch)
        : params_(std::move(params)), source_epoch_(source_epoch) {}

    const ModelParameters& params() const noexcept { return params_; }
    std::size_t source_epoch() const noexcept { return source_epoch_; }

private:
    ModelParameters params_;
    std::size_t source_epoch_;
};

TeacherSnapshot snapshot(const ModelParameters& params, std::size_t epoch);

// Parameter file: one JSON header line, then parameter_count() little-endian
// IEEE-754 doubles in flatten() order.
struct SavedParameters {
    ModelParameters params;
    std::size_t epoch = 0;
};

void save_parameters(const std::filesystem::path& path, const ModelParameters& params,
                     std::size_t epoch);
SavedParameters load_parameters(const std::filesystem::path& path);

} // namespace pspd
