#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pspd/curriculum.hpp"
#include "pspd/error.hpp"

namespace pspd {
namespace {

using enum RegularizerKind;

// Two-class model whose logits ignore the input: [0, logit1].
ModelParameters constant_model(std::size_t inputs, double logit0, double logit1) {
    ModelParameters p = ModelParameters::zeros(std::vector<std::size_t>{inputs, 2});
    p.layers()[0].bias = {logit0, logit1};
    return p;
}

Dataset small_dataset(std::size_t n = 60, double noise = 0.2, std::uint64_t seed = 1) {
    return generate_synthetic({n, 4, 2, 2.5, noise, seed}).data;
}

TrainConfig quick_config(Ablation ablation, std::size_t epochs) {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = 8;
    c.hidden_layers = {6};
    c.ablation = ablation;
    c.seed = 5;
    c.lr_schedule = {1e-3, 1e-2, 2};
    return c;
}

TEST(PclCurriculum, PerfectStudentSelectsEverything) {
    // One-hot inputs scaled so logits strongly favour the true class.
    Dataset d;
    d.features = Matrix(4, 2, std::vector<double>{1, 0, 0, 1, 1, 0, 0, 1});
    d.labels = {0, 1, 0, 1};
    d.class_count = 2;
    ModelParameters p = ModelParameters::zeros(std::vector<std::size_t>{2, 2});
    p.layers()[0].weight = Matrix(2, 2, std::vector<double>{60, 0, 0, 60});
    const Curriculum c = determine_pcl_curriculum(p, d, 0.01, Hard);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_LT(c.losses[i], 1e-12);
        EXPECT_EQ(c.weights[i], 1.0);
    }
}

TEST(PclCurriculum, UntrainedStudentThresholdsAtLambda) {
    const Dataset d = small_dataset(200);
    std::mt19937_64 rng(12);
    const ModelParameters p = init_parameters(std::vector<std::size_t>{4, 8, 2}, rng);
    const Curriculum c = determine_pcl_curriculum(p, d, 0.6, Hard);
    const Matrix probs = softmax_rows(forward(p, d.features));
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double ce = cross_entropy(probs.row(i), d.labels[i]);
        EXPECT_EQ(c.losses[i], ce);
        EXPECT_EQ(c.weights[i], ce < 0.6 ? 1.0 : 0.0);
        zeros += c.weights[i] == 0.0 ? 1 : 0;
    }
    EXPECT_GT(zeros, 0u);
}

TEST(PclCurriculum, HugePaceSelectsEverything) {
    // Uniform student: every loss is ln 2.
    const Dataset d = small_dataset(100);
    for (RegularizerKind kind : {Hard, Soft}) {
        for (double w : determine_pcl_curriculum(constant_model(4, 0, 0), d, 1e6, kind).weights) {
            EXPECT_NEAR(w, 1.0, 1e-6);
        }
    }
    std::mt19937_64 rng(2);
    const ModelParameters p = init_parameters(std::vector<std::size_t>{4, 8, 2}, rng);
    for (double w : determine_pcl_curriculum(p, d, 1e6, Hard).weights) {
        EXPECT_EQ(w, 1.0);
    }
}

TEST(PclCurriculum, RejectsEmptyDataset) {
    Dataset empty;
    empty.features = Matrix(0, 2);
    empty.class_count = 2;
    EXPECT_THROW(determine_pcl_curriculum(constant_model(2, 0, 0), empty, 1.0, Hard), InvalidInput);
}

TEST(PcdCurriculum, MissingTeacherIsStateError) {
    EXPECT_THROW(determine_pcd_curriculum(std::nullopt, small_dataset(), 0.8, Soft), StateError);
}

TEST(PcdCurriculum, ConfidentTeacherKeepsAllSamples) {
    Dataset d = small_dataset(30);
    std::fill(d.labels.begin(), d.labels.end(), 1);
    const std::optional<TeacherSnapshot> teacher = snapshot(constant_model(4, -40.0, 40.0), 0);
    const DistillationCurriculum c = determine_pcd_curriculum(teacher, d, 0.8, Soft);
    for (double w : c.weights) {
        EXPECT_NEAR(w, 1.0, 1e-12);
    }
    EXPECT_EQ(c.teacher_probs.rows(), d.size());
}

TEST(PcdCurriculum, TeacherLossSetsDistillationWeight) {
    Dataset d = small_dataset(10);
    std::fill(d.labels.begin(), d.labels.end(), 1);
    auto teacher_with_ce = [](double ce) {
        const double p = std::exp(-ce);
        return std::optional<TeacherSnapshot>(
            snapshot(constant_model(4, 0.0, std::log(p / (1.0 - p))), 1));
    };
    for (double w : determine_pcd_curriculum(teacher_with_ce(1.2), d, 0.8, Soft).weights) {
        EXPECT_EQ(w, 0.0);
    }
    for (double w : determine_pcd_curriculum(teacher_with_ce(1.2), d, 0.8, Hard).weights) {
        EXPECT_EQ(w, 0.0);
    }
    for (double w : determine_pcd_curriculum(teacher_with_ce(0.4), d, 0.8, Soft).weights) {
        EXPECT_NEAR(w, 0.5, 1e-12);
    }
}

TEST(EpochLoss, ZeroWeightsGiveOnlyRegularizer) {
    const Dataset d = small_dataset(6);
    const ModelParameters s = constant_model(4, 0.3, -0.2);
    const std::optional<TeacherSnapshot> t = snapshot(constant_model(4, 1.0, 0.0), 0);
    const std::vector<double> zeros(6, 0.0);
    WeightingSlice slice{{zeros, true, Hard, 0.6}, ChannelSlice{zeros, true, Soft, 0.8}};
    const LossBreakdown l = epoch_loss(s, t, d.features, d.labels, slice, 1.0);
    EXPECT_EQ(l.objective, 0.0);
    EXPECT_EQ(l.regularizer, 0.0);
}

TEST(EpochLoss, GammaZeroIsWeightedCrossEntropy) {
    const Dataset d = small_dataset(6);
    const ModelParameters s = constant_model(4, 0.3, -0.2);
    const std::optional<TeacherSnapshot> t = snapshot(constant_model(4, 1.0, 0.0), 0);
    const std::vector<double> w{1, 0.5, 0, 1, 0.25, 1};
    const std::vector<double> phi(6, 1.0);
    WeightingSlice with_teacher{{w, false}, ChannelSlice{phi, false}};
    WeightingSlice without{{w, false}, std::nullopt};
    const double a = epoch_loss(s, t, d.features, d.labels, with_teacher, 0.0).objective;
    const double b = epoch_loss(s, std::nullopt, d.features, d.labels, without, 0.0).objective;
    EXPECT_DOUBLE_EQ(a, b);
    const Matrix probs = softmax_rows(forward(s, d.features));
    double expected = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
        expected += w[i] * cross_entropy(probs.row(i), d.labels[i]);
    }
    EXPECT_NEAR(b, expected / 6.0, 1e-15);
}

TEST(EpochLoss, SingleSampleHandArithmetic) {
    // Student uniform -> CE = ln 2; teacher one-hot on class 0 -> KL = ln 2.
    Dataset d;
    d.features = Matrix(1, 1, 0.0);
    d.labels = {0};
    d.class_count = 2;
    const std::optional<TeacherSnapshot> t = snapshot(constant_model(1, 1000.0, 0.0), 0);
    const std::vector<double> w{1.0};
    const std::vector<double> phi{0.5};
    WeightingSlice slice{{w, true, Hard, 0.6}, ChannelSlice{phi, true, Soft, 0.8}};
    const LossBreakdown l = epoch_loss(constant_model(1, 0.0, 0.0), t, d.features, d.labels, slice, 1.0);
    EXPECT_NEAR(l.objective, 1.5 * std::log(2.0), 1e-12);
    EXPECT_NEAR(l.objective, 1.0397, 1e-4);
    EXPECT_NEAR(l.regularizer, -0.6 + 0.8 * (0.125 - 0.5), 1e-12);
}

TEST(EpochLoss, RejectsMisalignedSlice) {
    const Dataset d = small_dataset(6);
    const std::vector<double> w(5, 1.0);
    WeightingSlice slice{{w, false}, std::nullopt};
    EXPECT_THROW(epoch_loss(constant_model(4, 0, 0), std::nullopt, d.features, d.labels, slice, 0.0),
                 InvalidInput);
}

TEST(WStep, ClosedFormNeverLosesToRandomWeights) {
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> loss_dist(1.5);
    for (int trial = 0; trial < 300; ++trial) {
        const RegularizerKind kind = trial % 2 ? Soft : Hard;
        const double lambda = 0.1 + 2.0 * unit(rng);
        std::vector<double> losses(25), best(25), random(25);
        for (std::size_t i = 0; i < 25; ++i) {
            losses[i] = loss_dist(rng);
            best[i] = closed_form_weight(kind, losses[i], lambda).weight;
            random[i] = unit(rng);
        }
        auto objective = [&](const std::vector<double>& w) {
            double total = 0.0;
            for (std::size_t i = 0; i < 25; ++i) {
                total += w[i] * losses[i] + regularizer_value(kind, w[i], lambda);
            }
            return total / 25.0;
        };
        EXPECT_LE(objective(best), objective(random) + 1e-12);
    }
}

TEST(Train, RejectsInvalidConfigBeforeTraining) {
    const Dataset d = small_dataset();
    TrainConfig c = quick_config(Ablation::Full, 0);
    EXPECT_THROW(train(c, d), ConfigError);
    c = quick_config(Ablation::Full, 2);
    c.batch_size = 0;
    EXPECT_THROW(train(c, d), ConfigError);
    c = quick_config(Ablation::Full, 2);
    c.pcl_schedule.lambda0 = 0.0;
    EXPECT_THROW(train(c, d), ConfigError);
    c = quick_config(Ablation::Full, 2);
    c.gamma = -1.0;
    EXPECT_THROW(train(c, d), ConfigError);
}

TEST(Train, SingleEpochFullEqualsPclOnly) {
    const Dataset d = small_dataset();
    const TrainResult full = train(quick_config(Ablation::Full, 1), d);
    const TrainResult pcl = train(quick_config(Ablation::PclOnly, 1), d);
    EXPECT_TRUE(bitwise_equal(full.params, pcl.params));
    EXPECT_EQ(full.trace.epochs[0].kl_evaluations, 0u);
}

TEST(Train, TeacherAndPaceFollowEpochOrder) {
    const Dataset d = small_dataset(80);
    TrainConfig config = quick_config(Ablation::Full, 6);
    std::vector<ModelParameters> end_of_epoch;
    std::size_t checked = 0;
    TrainOptions options;
    options.on_epoch_end = [&](const EpochView& view) {
        const std::size_t t = view.weighting.epoch;
        EXPECT_EQ(view.record.lambda_w, 0.6 + 0.006 * static_cast<double>(t));
        EXPECT_EQ(view.record.lambda_phi, 0.8 + 0.003 * static_cast<double>(t));
        if (t == 0) {
            EXPECT_FALSE(view.teacher.has_value());
            EXPECT_FALSE(view.weighting.pcd.has_value());
            EXPECT_EQ(view.record.kl_evaluations, 0u);
        } else {
            ASSERT_TRUE(view.teacher.has_value());
            EXPECT_EQ(view.teacher->source_epoch(), t - 1);
            EXPECT_TRUE(bitwise_equal(view.teacher->params(), end_of_epoch.at(t - 1)));
            ASSERT_TRUE(view.weighting.pcd.has_value());
            ++checked;
        }
        // Weights reproduce the closed form exactly.
        const ChannelWeighting& w = view.weighting.pcl;
        ASSERT_EQ(w.weights.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            EXPECT_EQ(w.weights[i], closed_form_weight(Hard, w.losses[i], view.record.lambda_w).weight);
        }
        if (view.weighting.pcd) {
            const ChannelWeighting& phi = *view.weighting.pcd;
            for (std::size_t i = 0; i < d.size(); ++i) {
                EXPECT_EQ(phi.weights[i],
                          closed_form_weight(Soft, phi.losses[i], view.record.lambda_phi).weight);
                EXPECT_GE(phi.weights[i], 0.0);
                EXPECT_LE(phi.weights[i], 1.0);
            }
        }
        end_of_epoch.push_back(view.student);
    };
    train(config, d, options);
    EXPECT_EQ(checked, 5u);
}

TEST(Train, BaselineMatchesPlainTrainingLoop) {
    const Dataset d = small_dataset(90);
    const TrainConfig config = quick_config(Ablation::Baseline, 5);
    std::vector<ModelParameters> trajectory;
    TrainOptions options;
    options.on_epoch_end = [&](const EpochView& view) { trajectory.push_back(view.student); };
    train(config, d, options);

    testing::PlainTrainingSetup setup;
    setup.layer_sizes = {4, 6, 2};
    setup.epochs = 5;
    setup.batch_size = 8;
    setup.seed = 5;
    setup.lr_init = 1e-3;
    setup.lr_peak = 1e-2;
    setup.warmup_epochs = 2;
    const auto plain = testing::plain_ce_training(setup, d.features, d.labels);
    ASSERT_EQ(plain.size(), trajectory.size());
    for (std::size_t e = 0; e < plain.size(); ++e) {
        EXPECT_TRUE(bitwise_equal(plain[e], trajectory[e])) << "epoch " << e;
    }
}

TEST(Train, InfinitePacePclMatchesBaseline) {
    const Dataset d = small_dataset();
    TrainConfig pcl = quick_config(Ablation::PclOnly, 4);
    pcl.pcl_schedule = {1e12, 0.0};
    const TrainResult a = train(pcl, d);
    const TrainResult b = train(quick_config(Ablation::Baseline, 4), d);
    EXPECT_TRUE(bitwise_equal(a.params, b.params));
}

TEST(Train, IsDeterministic) {
    const Dataset d = small_dataset();
    const TrainResult a = train(quick_config(Ablation::Full, 5), d);
    const TrainResult b = train(quick_config(Ablation::Full, 5), d);
    EXPECT_TRUE(bitwise_equal(a.params, b.params));
    TrainConfig other = quick_config(Ablation::Full, 5);
    other.seed = 6;
    EXPECT_FALSE(bitwise_equal(train(other, d).params, a.params));
}

TEST(Train, FrozenModelAdmitsSamplesMonotonically) {
    const Dataset d = small_dataset(120);
    TrainConfig config = quick_config(Ablation::PclOnly, 50);
    config.freeze_model = true;
    config.pcl_schedule = {0.55, 0.2};
    std::size_t saturated = 0;
    TrainOptions options;
    options.on_epoch_end = [&](const EpochView& view) {
        const auto& losses = view.weighting.pcl.losses;
        if (view.record.lambda_w > *std::max_element(losses.begin(), losses.end())) {
            EXPECT_EQ(view.record.frac_w_nonzero, 1.0);
            ++saturated;
        }
    };
    const TrainResult r = train(config, d, options);
    for (std::size_t t = 1; t < r.trace.epochs.size(); ++t) {
        EXPECT_GE(r.trace.epochs[t].frac_w_nonzero, r.trace.epochs[t - 1].frac_w_nonzero);
    }
    EXPECT_GT(saturated, 0u);
}

TEST(Train, NllMatchesUnweightedObjective) {
    const Dataset d = small_dataset(40);
    std::mt19937_64 rng(3);
    const ModelParameters p = init_parameters(std::vector<std::size_t>{4, 5, 2}, rng);
    const std::vector<double> ones(d.size(), 1.0);
    WeightingSlice slice{{ones, false}, std::nullopt};
    const double objective = epoch_loss(p, std::nullopt, d.features, d.labels, slice, 0.0).objective;
    const Matrix probs = softmax_rows(forward(p, d.features));
    EXPECT_NEAR(nll(probs, d.labels), objective, 1e-12);
}

TEST(Trace, CsvHasDocumentedColumns) {
    const Dataset d = small_dataset(40);
    TrainOptions options;
    const Dataset val = small_dataset(30, 0.0, 9);
    options.validation = &val;
    const TrainResult r = train(quick_config(Ablation::Full, 3), d, options);
    const auto path = std::filesystem::temp_directory_path() / "pspd_trace.csv";
    const std::vector<std::string> comments{"config_hash: abc"};
    r.trace.write_csv(path, comments);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "# config_hash: abc");
    std::getline(in, line);
    EXPECT_EQ(line,
              "epoch,lambda_w,lambda_phi,frac_w_nonzero,frac_phi_nonzero,mean_w,mean_phi,"
              "train_loss,val_acc,val_auc,val_ece,val_nll");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 11);
    }
    EXPECT_EQ(rows, 3u);
    std::filesystem::remove(path);
}

} // namespace
} // namespace pspd
