#pragma once

// Test-only oracles: a long-double objective that shares no code with the
// library's forward/backward, and a plain CE training loop that bypasses
// train() entirely.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "pspd/model.hpp"
#include "pspd/numerics.hpp"

namespace pspd::testing {

// Weighted CE + gamma * weighted KL objective evaluated from scratch in long
// double, with parameters given as a flat vector in ModelParameters::flatten()
// order.
struct ReferenceObjective {
    std::vector<std::size_t> layer_sizes;
    std::vector<std::vector<long double>> inputs;
    std::vector<std::size_t> labels;
    std::vector<long double> ce_weights;
    std::vector<std::vector<long double>> teacher_probs; // empty: no distillation
    std::vector<long double> kd_weights;
    long double gamma = 0.0L;

    long double operator()(const std::vector<long double>& theta) const {
        long double total = 0.0L;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            std::vector<long double> a = inputs[i];
            std::size_t pos = 0;
            for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
                const std::size_t n_in = layer_sizes[k];
                const std::size_t n_out = layer_sizes[k + 1];
                const std::size_t bias_at = pos + n_out * n_in;
                std::vector<long double> z(n_out);
                for (std::size_t o = 0; o < n_out; ++o) {
                    long double acc = theta[bias_at + o];
                    for (std::size_t j = 0; j < n_in; ++j) {
                        acc += theta[pos + o * n_in + j] * a[j];
                    }
                    const bool hidden = k + 2 < layer_sizes.size();
                    z[o] = hidden ? std::max(acc, 0.0L) : acc;
                }
                pos = bias_at + n_out;
                a = std::move(z);
            }
            const long double m = *std::max_element(a.begin(), a.end());
            long double sum = 0.0L;
            for (long double v : a) {
                sum += std::exp(v - m);
            }
            const long double lse = m + std::log(sum);
            long double term = ce_weights[i] * (lse - a[labels[i]]);
            if (!teacher_probs.empty()) {
                long double kl = 0.0L;
                for (std::size_t c = 0; c < a.size(); ++c) {
                    const long double t = teacher_probs[i][c];
                    if (t > 0.0L) {
                        kl += t * (std::log(t) - (a[c] - lse));
                    }
                }
                term += gamma * kd_weights[i] * kl;
            }
            total += term;
        }
        return total / static_cast<long double>(inputs.size());
    }
};

// Central finite differences with the given step.
inline std::vector<double> finite_difference_gradient(const ReferenceObjective& f,
                                                      const std::vector<double>& theta,
                                                      double step) {
    std::vector<long double> x(theta.begin(), theta.end());
    std::vector<double> grad(theta.size());
    const long double h = step;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const long double saved = x[k];
        x[k] = saved + h;
        const long double up = f(x);
        x[k] = saved - h;
        const long double down = f(x);
        x[k] = saved;
        grad[k] = static_cast<double>((up - down) / (2.0L * h));
    }
    return grad;
}

inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

enum class ObjectiveMode { CrossEntropy, Distillation, Mixed };

// A random small network with a random weighted batch objective, plus the
// long-double reference for the same objective.
struct GradientCase {
    ModelParameters params;
    Matrix inputs;
    std::vector<std::size_t> labels;
    std::vector<double> ce_weights;
    Matrix teacher_probs;
    std::vector<double> kd_weights;
    double gamma = 0.0;
    ReferenceObjective reference;

    BatchObjective objective() const {
        return BatchObjective{inputs, labels, ce_weights,
                              teacher_probs.empty() ? nullptr : &teacher_probs, kd_weights, gamma};
    }
};

inline GradientCase make_gradient_case(std::mt19937_64& rng, ObjectiveMode mode) {
    std::uniform_int_distribution<std::size_t> layers_dist(1, 3);
    std::uniform_int_distribution<std::size_t> width(1, 8);
    std::uniform_int_distribution<std::size_t> classes_dist(2, 4);
    std::uniform_int_distribution<std::size_t> batch_dist(1, 5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<std::size_t> sizes{width(rng)};
    const std::size_t affine_layers = layers_dist(rng);
    for (std::size_t k = 1; k < affine_layers; ++k) {
        sizes.push_back(width(rng));
    }
    const std::size_t classes = classes_dist(rng);
    sizes.push_back(classes);

    GradientCase c;
    c.params = init_parameters(sizes, rng);
    for (Layer& layer : c.params.layers()) {
        for (double& b : layer.bias) {
            b = 0.1 * gauss(rng);
        }
    }
    const std::size_t n = batch_dist(rng);
    c.inputs = Matrix(n, sizes.front());
    for (double& v : c.inputs.values()) {
        v = gauss(rng);
    }
    for (std::size_t i = 0; i < n; ++i) {
        c.labels.push_back(std::uniform_int_distribution<std::size_t>(0, classes - 1)(rng));
        c.ce_weights.push_back(mode == ObjectiveMode::Distillation ? 0.0
                               : mode == ObjectiveMode::Mixed      ? unit(rng)
                                                                   : 1.0);
    }
    if (mode != ObjectiveMode::CrossEntropy) {
        c.teacher_probs = Matrix(n, classes);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> z(classes);
            for (double& v : z) {
                v = 1.5 * gauss(rng);
            }
            const auto p = softmax(z);
            std::copy(p.begin(), p.end(), c.teacher_probs.row(i).begin());
            c.kd_weights.push_back(mode == ObjectiveMode::Mixed ? unit(rng) : 1.0);
        }
        c.gamma = mode == ObjectiveMode::Mixed ? 2.0 * unit(rng) : 1.0;
    }

    ReferenceObjective& ref = c.reference;
    ref.layer_sizes = sizes;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = c.inputs.row(i);
        ref.inputs.emplace_back(row.begin(), row.end());
        ref.ce_weights.push_back(c.ce_weights[i]);
        if (!c.teacher_probs.empty()) {
            const auto t = c.teacher_probs.row(i);
            ref.teacher_probs.emplace_back(t.begin(), t.end());
            ref.kd_weights.push_back(c.kd_weights[i]);
        }
    }
    ref.labels = c.labels;
    ref.gamma = c.gamma;
    return c;
}

// Largest per-coordinate relative error between backward() and central
// finite differences of the reference objective.
inline double max_gradient_error(const GradientCase& c, double step = 1e-6) {
    const std::vector<double> analytic = backward(c.params, c.objective()).gradient.flatten();
    const std::vector<double> numeric =
        finite_difference_gradient(c.reference, c.params.flatten(), step);
    double worst = 0.0;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
        worst = std::max(worst, relative_error(analytic[k], numeric[k]));
    }
    return worst;
}

// Plain mini-batch cross-entropy training written against the documented
// RNG contract only: seed one mt19937_64, draw the initial parameters, then
// shuffle 0..N-1 once per epoch and take consecutive batches.
struct PlainTrainingSetup {
    std::vector<std::size_t> layer_sizes;
    std::size_t epochs = 1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    double lr_init = 1e-6;
    double lr_peak = 1e-4;
    std::size_t warmup_epochs = 10;
};

inline std::vector<ModelParameters> plain_ce_training(const PlainTrainingSetup& setup,
                                                      const Matrix& features,
                                                      const std::vector<std::size_t>& labels) {
    std::mt19937_64 rng(setup.seed);
    ModelParameters params = init_parameters(setup.layer_sizes, rng);
    OptimizerState state = make_optimizer_state(params);
    std::vector<ModelParameters> trajectory;
    const std::size_t n = labels.size();
    std::vector<std::size_t> order(n);
    for (std::size_t epoch = 0; epoch < setup.epochs; ++epoch) {
        double lr = setup.lr_peak;
        if (epoch < setup.warmup_epochs) {
            lr = setup.lr_init + (static_cast<double>(epoch) / static_cast<double>(setup.warmup_epochs)) *
                                     (setup.lr_peak - setup.lr_init);
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += setup.batch_size) {
            const std::size_t stop = std::min(n, start + setup.batch_size);
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(stop));
            const Matrix x = features.gather_rows(idx);
            std::vector<std::size_t> y;
            for (std::size_t i : idx) {
                y.push_back(labels[i]);
            }
            const std::vector<double> ones(idx.size(), 1.0);
            const BackwardResult r = backward(params, BatchObjective{x, y, ones});
            optimizer_step(params, state, r.gradient, lr);
        }
        trajectory.push_back(params);
    }
    return trajectory;
}

} // namespace pspd::testing
