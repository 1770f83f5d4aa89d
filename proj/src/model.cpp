#include "pspd/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>

#include "pspd/error.hpp"

namespace pspd {

ModelParameters::ModelParameters(std::vector<Layer> layers) : layers_(std::move(layers)) {
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        const Layer& layer = layers_[k];
        if (layer.bias.size() != layer.weight.rows()) {
            throw InvalidInput("layer " + std::to_string(k) + ": bias length != weight rows");
        }
        if (k > 0 && layer.weight.cols() != layers_[k - 1].weight.rows()) {
            throw InvalidInput("layer " + std::to_string(k) + ": input width does not chain");
        }
    }
}

ModelParameters ModelParameters::zeros(std::span<const std::size_t> layer_sizes) {
    if (layer_sizes.size() < 2) {
        throw InvalidInput("a model needs at least an input and an output size");
    }
    std::vector<Layer> layers;
    for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
        if (layer_sizes[k] == 0 || layer_sizes[k + 1] == 0) {
            throw InvalidInput("layer sizes must be positive");
        }
        layers.push_back({Matrix(layer_sizes[k + 1], layer_sizes[k]),
                          std::vector<double>(layer_sizes[k + 1], 0.0)});
    }
    return ModelParameters(std::move(layers));
}

std::vector<std::size_t> ModelParameters::layer_sizes() const {
    std::vector<std::size_t> sizes;
    if (layers_.empty()) {
        return sizes;
    }
    sizes.push_back(layers_.front().weight.cols());
    for (const Layer& layer : layers_) {
        sizes.push_back(layer.weight.rows());
    }
    return sizes;
}

std::size_t ModelParameters::input_size() const {
    if (layers_.empty()) {
        throw StateError("empty model");
    }
    return layers_.front().weight.cols();
}

std::size_t ModelParameters::output_size() const {
    if (layers_.empty()) {
        throw StateError("empty model");
    }
    return layers_.back().weight.rows();
}

std::size_t ModelParameters::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const Layer& layer : layers_) {
        n += layer.weight.size() + layer.bias.size();
    }
    return n;
}

std::vector<double> ModelParameters::flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const Layer& layer : layers_) {
        flat.insert(flat.end(), layer.weight.values().begin(), layer.weight.values().end());
        flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
    }
    return flat;
}

void ModelParameters::assign_flat(std::span<const double> values) {
    if (values.size() != parameter_count()) {
        throw InvalidInput("assign_flat: expected " + std::to_string(parameter_count()) +
                           " values, got " + std::to_string(values.size()));
    }
    std::size_t pos = 0;
    for (Layer& layer : layers_) {
        auto w = layer.weight.values();
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), w.size(), w.begin());
        pos += w.size();
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), layer.bias.size(),
                    layer.bias.begin());
        pos += layer.bias.size();
    }
}

bool ModelParameters::all_finite() const noexcept {
    for (const Layer& layer : layers_) {
        if (!layer.weight.all_finite()) {
            return false;
        }
        for (double b : layer.bias) {
            if (!std::isfinite(b)) {
                return false;
            }
        }
    }
    return true;
}

bool bitwise_equal(const ModelParameters& a, const ModelParameters& b) {
    if (a.layer_sizes() != b.layer_sizes()) {
        return false;
    }
    const auto fa = a.flatten();
    const auto fb = b.flatten();
    return std::equal(fa.begin(), fa.end(), fb.begin(), [](double x, double y) {
        return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
    });
}

ModelParameters init_parameters(std::span<const std::size_t> layer_sizes, std::mt19937_64& rng) {
    ModelParameters params = ModelParameters::zeros(layer_sizes);
    for (Layer& layer : params.layers()) {
        const double fan = static_cast<double>(layer.weight.rows() + layer.weight.cols());
        const double limit = std::sqrt(6.0 / fan);
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (double& w : layer.weight.values()) {
            w = dist(rng);
        }
    }
    return params;
}

namespace {

// Pre-activations per layer plus the input, kept for the backward pass.
struct ForwardCache {
    std::vector<Matrix> activations; // activations[0] = input, activations[k] = output of layer k-1
    std::vector<Matrix> pre_activations;
};

void affine(const Layer& layer, const Matrix& in, Matrix& out) {
    const std::size_t n_out = layer.weight.rows();
    const std::size_t n_in = layer.weight.cols();
    out = Matrix(in.rows(), n_out);
    for (std::size_t r = 0; r < in.rows(); ++r) {
        const auto x = in.row(r);
        for (std::size_t o = 0; o < n_out; ++o) {
            const auto w = layer.weight.row(o);
            double acc = layer.bias[o];
            for (std::size_t i = 0; i < n_in; ++i) {
                acc += w[i] * x[i];
            }
            out(r, o) = acc;
        }
    }
}

ForwardCache forward_cached(const ModelParameters& params, const Matrix& batch) {
    if (params.layers().empty()) {
        throw InvalidInput("forward on an empty model");
    }
    if (batch.cols() != params.input_size()) {
        throw InvalidInput("batch has " + std::to_string(batch.cols()) +
                           " features, model expects " + std::to_string(params.input_size()));
    }
    ForwardCache cache;
    const auto& layers = params.layers();
    cache.activations.reserve(layers.size() + 1);
    cache.pre_activations.resize(layers.size());
    cache.activations.push_back(batch);
    for (std::size_t k = 0; k < layers.size(); ++k) {
        affine(layers[k], cache.activations.back(), cache.pre_activations[k]);
        Matrix act = cache.pre_activations[k];
        if (k + 1 < layers.size()) {
            for (double& v : act.values()) {
                v = v > 0.0 ? v : 0.0;
            }
        }
        cache.activations.push_back(std::move(act));
    }
    return cache;
}

void check_objective(const ModelParameters& params, const BatchObjective& obj) {
    const std::size_t n = obj.inputs.rows();
    if (obj.labels.size() != n || obj.ce_weights.size() != n) {
        throw InvalidInput("labels and ce_weights must have one entry per batch row");
    }
    const std::size_t classes = params.output_size();
    for (std::size_t y : obj.labels) {
        if (y >= classes) {
            throw InvalidInput("label " + std::to_string(y) + " out of range");
        }
    }
    if (obj.teacher_probs != nullptr) {
        if (obj.teacher_probs->rows() != n || obj.teacher_probs->cols() != classes) {
            throw InvalidInput("teacher_probs shape does not match the batch");
        }
        if (obj.kd_weights.size() != n) {
            throw InvalidInput("kd_weights must have one entry per batch row");
        }
    } else {
        const bool uses_kd = obj.gamma != 0.0 &&
                             std::any_of(obj.kd_weights.begin(), obj.kd_weights.end(),
                                         [](double v) { return v != 0.0; });
        if (uses_kd) {
            throw InvalidInput("distillation weights given without teacher probabilities");
        }
    }
}

bool uses_kl(const BatchObjective& obj, std::size_t i) {
    return obj.teacher_probs != nullptr && obj.gamma != 0.0 && obj.kd_weights[i] != 0.0;
}

} // namespace

Matrix forward(const ModelParameters& params, const Matrix& batch) {
    ForwardCache cache = forward_cached(params, batch);
    return std::move(cache.activations.back());
}

double objective_value(const ModelParameters& params, const BatchObjective& objective) {
    check_objective(params, objective);
    const Matrix probs = softmax_rows(forward(params, objective.inputs));
    const std::size_t n = objective.inputs.rows();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double term = objective.ce_weights[i] * cross_entropy(probs.row(i), objective.labels[i]);
        if (uses_kl(objective, i)) {
            term += objective.gamma * objective.kd_weights[i] *
                    kl_divergence(objective.teacher_probs->row(i), probs.row(i));
        }
        total += term;
    }
    return n == 0 ? 0.0 : total / static_cast<double>(n);
}

BackwardResult backward(const ModelParameters& params, const BatchObjective& objective) {
    check_objective(params, objective);
    const std::size_t n = objective.inputs.rows();
    const auto& layers = params.layers();
    ForwardCache cache = forward_cached(params, objective.inputs);

    BackwardResult result{ModelParameters::zeros(params.layer_sizes()), 0.0, 0};
    if (n == 0) {
        return result;
    }
    const double inv_n = 1.0 / static_cast<double>(n);

    // delta = dL/dlogits. The CE part uses the unclamped softmax gradient p - e_y.
    const std::size_t classes = params.output_size();
    Matrix delta(n, classes);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const ProbabilityVector p = softmax(cache.activations.back().row(i));
        const double w = objective.ce_weights[i];
        double term = w * cross_entropy(p, objective.labels[i]);
        for (std::size_t c = 0; c < classes; ++c) {
            const double target = c == objective.labels[i] ? 1.0 : 0.0;
            delta(i, c) = w * (p[c] - target);
        }
        if (uses_kl(objective, i)) {
            const auto t = objective.teacher_probs->row(i);
            const double scale = objective.gamma * objective.kd_weights[i];
            term += scale * kl_divergence(t, p);
            for (std::size_t c = 0; c < classes; ++c) {
                delta(i, c) += scale * (p[c] - t[c]);
            }
            ++result.kl_evaluations;
        }
        total += term;
        for (std::size_t c = 0; c < classes; ++c) {
            delta(i, c) *= inv_n;
        }
    }
    result.loss = total * inv_n;

    auto& grads = result.gradient.layers();
    for (std::size_t k = layers.size(); k-- > 0;) {
        const Matrix& input = cache.activations[k];
        Layer& g = grads[k];
        const std::size_t n_out = layers[k].weight.rows();
        const std::size_t n_in = layers[k].weight.cols();
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = input.row(i);
            for (std::size_t o = 0; o < n_out; ++o) {
                const double d = delta(i, o);
                if (d == 0.0) {
                    continue;
                }
                g.bias[o] += d;
                auto gw = g.weight.row(o);
                for (std::size_t j = 0; j < n_in; ++j) {
                    gw[j] += d * x[j];
                }
            }
        }
        if (k == 0) {
            break;
        }
        Matrix prev(n, n_in);
        const Matrix& pre = cache.pre_activations[k - 1];
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n_in; ++j) {
                if (pre(i, j) <= 0.0) {
                    continue;
                }
                double acc = 0.0;
                for (std::size_t o = 0; o < n_out; ++o) {
                    acc += delta(i, o) * layers[k].weight(o, j);
                }
                prev(i, j) = acc;
            }
        }
        delta = std::move(prev);
    }
    return result;
}

OptimizerState make_optimizer_state(const ModelParameters& params, AdamSettings settings) {
    const auto sizes = params.layer_sizes();
    return {ModelParameters::zeros(sizes), ModelParameters::zeros(sizes), 0, settings};
}

void optimizer_step(ModelParameters& params, OptimizerState& state, const Gradient& gradient,
                    double lr) {
    const auto sizes = params.layer_sizes();
    if (gradient.layer_sizes() != sizes || state.first_moment.layer_sizes() != sizes ||
        state.second_moment.layer_sizes() != sizes) {
        throw InvalidInput("optimizer_step: parameter, gradient and state shapes differ");
    }
    const AdamSettings& s = state.settings;
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double correction1 = 1.0 - std::pow(s.beta1, t);
    const double correction2 = 1.0 - std::pow(s.beta2, t);

    auto update = [&](std::span<double> theta, std::span<const double> g, std::span<double> m,
                      std::span<double> v) {
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
            v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            theta[i] -= lr * m_hat / (std::sqrt(v_hat) + s.epsilon);
        }
    };

    auto& layers = params.layers();
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const Layer& g = gradient.layers()[k];
        Layer& m = state.first_moment.layers()[k];
        Layer& v = state.second_moment.layers()[k];
        update(layers[k].weight.values(), g.weight.values(), m.weight.values(), v.weight.values());
        update(layers[k].bias, g.bias, m.bias, v.bias);
    }
}

TeacherSnapshot snapshot(const ModelParameters& params, std::size_t epoch) {
    return TeacherSnapshot(params, epoch);
}

} // namespace pspd
