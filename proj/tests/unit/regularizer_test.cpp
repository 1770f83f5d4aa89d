#include <random>

#include <gtest/gtest.h>

#include "pspd/error.hpp"
#include "pspd/regularizer.hpp"

namespace pspd {
namespace {

using enum RegularizerKind;

TEST(RegularizerValue, Examples) {
    EXPECT_DOUBLE_EQ(regularizer_value(Hard, 0.0, 3.7), 0.0);
    EXPECT_DOUBLE_EQ(regularizer_value(Hard, 1.0, 0.6), -0.6);
    EXPECT_DOUBLE_EQ(regularizer_value(Soft, 1.0, 2.0), -1.0);
}

TEST(RegularizerValue, RejectsOutOfDomain) {
    EXPECT_THROW(regularizer_value(Hard, -0.1, 1.0), InvalidInput);
    EXPECT_THROW(regularizer_value(Soft, 1.1, 1.0), InvalidInput);
    EXPECT_THROW(regularizer_value(Soft, 0.5, 0.0), InvalidInput);
    EXPECT_THROW(regularizer_value(Hard, 0.5, -1.0), InvalidInput);
}

TEST(ClosedFormWeight, Examples) {
    EXPECT_EQ(closed_form_weight(Hard, 0.5, 1.0).weight, 1.0);
    EXPECT_EQ(closed_form_weight(Hard, 1.0, 1.0).weight, 0.0);
    EXPECT_DOUBLE_EQ(closed_form_weight(Soft, 0.5, 1.0).weight, 0.5);
    const WeightSolution s = closed_form_weight(Soft, 0.25, 1.0);
    EXPECT_DOUBLE_EQ(s.weight, 0.75);
    // Frozen from a 1e5-step grid search of w*0.25 + (w^2/2 - w) on [0, 1].
    EXPECT_NEAR(s.objective_value, -0.28125, 1e-12);
    EXPECT_NEAR(oracle_weight(Soft, 0.25, 1.0).objective_value, -0.28125, 1e-9);
    EXPECT_THROW(closed_form_weight(Hard, -1e-3, 1.0), InvalidInput);
}

TEST(ClosedFormWeight, BoundaryMapsToZeroForBothKinds) {
    for (double lambda : {0.1, 0.6, 1.0, 7.5}) {
        EXPECT_EQ(closed_form_weight(Hard, lambda, lambda).weight, 0.0);
        EXPECT_EQ(closed_form_weight(Soft, lambda, lambda).weight, 0.0);
    }
}

TEST(OracleWeight, Examples) {
    const WeightSolution hard = oracle_weight(Hard, 0.5, 1.0, 10000);
    EXPECT_EQ(hard.weight, 1.0);
    EXPECT_DOUBLE_EQ(hard.objective_value, -0.5);
    EXPECT_NEAR(oracle_weight(Soft, 0.5, 1.0, 10000).weight, 0.5, 1e-4);
    EXPECT_EQ(oracle_weight(Soft, 2.0, 1.0, 10000).weight, 0.0);
    EXPECT_THROW(oracle_weight(Soft, 0.5, 1.0, 999), InvalidInput);
}

TEST(ClosedFormWeight, AgreesWithGridOracle) {
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> lam(0.05, 5.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const RegularizerKind kind = trial % 2 ? Soft : Hard;
        const double lambda = lam(rng);
        const double loss = 3.0 * lambda * unit(rng);
        const WeightSolution cf = closed_form_weight(kind, loss, lambda);
        const WeightSolution grid = oracle_weight(kind, loss, lambda, 100000);
        EXPECT_LE(std::abs(cf.weight - grid.weight), 2e-5) << "loss=" << loss << " lambda=" << lambda;
        EXPECT_LE(cf.objective_value, grid.objective_value + 1e-9);
    }
}

TEST(ClosedFormWeight, MonotoneInLossAndPace) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> pos(1e-3, 4.0);
    for (int trial = 0; trial < 5000; ++trial) {
        const RegularizerKind kind = trial % 2 ? Soft : Hard;
        double l1 = pos(rng), l2 = pos(rng), lam1 = pos(rng), lam2 = pos(rng);
        if (l1 > l2) {
            std::swap(l1, l2);
        }
        if (lam1 > lam2) {
            std::swap(lam1, lam2);
        }
        EXPECT_GE(closed_form_weight(kind, l1, lam1).weight,
                  closed_form_weight(kind, l2, lam1).weight);
        EXPECT_LE(closed_form_weight(kind, l1, lam1).weight,
                  closed_form_weight(kind, l1, lam2).weight);
    }
}

TEST(ClosedFormWeight, HardIsBinarySoftSweepsUnitInterval) {
    const double lambda = 0.8;
    for (int k = 0; k <= 100; ++k) {
        const double loss = lambda * k / 100.0;
        const double hard = closed_form_weight(Hard, loss, lambda).weight;
        EXPECT_TRUE(hard == 0.0 || hard == 1.0);
        const double soft = closed_form_weight(Soft, loss, lambda).weight;
        EXPECT_NEAR(soft, 1.0 - k / 100.0, 1e-12);
    }
}

TEST(RegularizerKind, ParseRoundTrip) {
    EXPECT_EQ(parse_regularizer_kind(to_string(Hard)), Hard);
    EXPECT_EQ(parse_regularizer_kind(to_string(Soft)), Soft);
    EXPECT_THROW(parse_regularizer_kind("log"), InvalidInput);
}

} // namespace
} // namespace pspd
