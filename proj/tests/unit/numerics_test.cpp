#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "pspd/error.hpp"
#include "pspd/numerics.hpp"

namespace pspd {
namespace {

TEST(Softmax, SymmetricInputsGiveUniform) {
    const auto p = softmax(std::vector<double>{0.0, 0.0});
    EXPECT_DOUBLE_EQ(p[0], 0.5);
    EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
    const auto p = softmax(std::vector<double>{1000.0, 1000.0});
    EXPECT_DOUBLE_EQ(p[0], 0.5);
    EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(Softmax, LogRatioGivesExactOdds) {
    const auto p = softmax(std::vector<double>{std::log(1.0), std::log(3.0)});
    EXPECT_NEAR(p[0], 0.25, 1e-15);
    EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(Softmax, RejectsEmptyAndNonFinite) {
    EXPECT_THROW(softmax(std::vector<double>{}), InvalidInput);
    EXPECT_THROW(softmax(std::vector<double>{0.0, std::numeric_limits<double>::quiet_NaN()}),
                 InvalidInput);
    EXPECT_THROW(softmax(std::vector<double>{std::numeric_limits<double>::infinity()}),
                 InvalidInput);
}

TEST(Softmax, ProbabilityInvariantsForExtremeInputs) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> mag(-1e6, 1e6);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> z(1 + trial % 7);
        for (double& v : z) {
            v = mag(rng);
        }
        const auto p = softmax(z);
        double sum = 0.0;
        for (double v : p) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
            sum += v;
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);
    }
}

TEST(CrossEntropy, Examples) {
    EXPECT_DOUBLE_EQ(cross_entropy(std::vector<double>{1.0, 0.0}, 0), 0.0);
    EXPECT_NEAR(cross_entropy(std::vector<double>{0.5, 0.5}, 1), std::log(2.0), 1e-15);
    EXPECT_DOUBLE_EQ(cross_entropy(std::vector<double>{1e-20, 1.0}, 0), -std::log(1e-12));
    EXPECT_THROW(cross_entropy(std::vector<double>{0.5, 0.5}, 2), InvalidInput);
}

TEST(CrossEntropy, MatchesLogSumExpForm) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 4.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> z(2 + trial % 5);
        for (double& v : z) {
            v = g(rng);
        }
        const std::size_t y = static_cast<std::size_t>(trial) % z.size();
        EXPECT_NEAR(cross_entropy(softmax(z), y), logsumexp(z) - z[y], 1e-9);
    }
}

TEST(KlDivergence, Examples) {
    const std::vector<double> a{0.3, 0.7};
    EXPECT_DOUBLE_EQ(kl_divergence(a, a), 0.0);
    EXPECT_NEAR(kl_divergence(std::vector<double>{1.0, 0.0}, std::vector<double>{0.5, 0.5}),
                std::log(2.0), 1e-15);
    EXPECT_NEAR(kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{0.25, 0.75}),
                0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 1e-15);
    EXPECT_NEAR(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 0.1438, 1e-4);
    EXPECT_THROW(kl_divergence(a, std::vector<double>{1.0}), InvalidInput);
}

TEST(KlDivergence, NonNegativeOnRandomPairs) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 3.0);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<double> zp(2 + trial % 6), zq(zp.size());
        for (std::size_t c = 0; c < zp.size(); ++c) {
            zp[c] = g(rng);
            zq[c] = g(rng);
        }
        const auto p = softmax(zp);
        const auto q = softmax(zq);
        EXPECT_GE(kl_divergence(p, q), -1e-9);
        EXPECT_EQ(kl_divergence(p, p), 0.0);
    }
}

TEST(Matrix, GatherRowsAndShapeChecks) {
    const Matrix m(3, 2, std::vector<double>{1, 2, 3, 4, 5, 6});
    const std::vector<std::size_t> idx{2, 0};
    const Matrix g = m.gather_rows(idx);
    EXPECT_EQ(g, Matrix(2, 2, std::vector<double>{5, 6, 1, 2}));
    EXPECT_THROW(Matrix(2, 2, std::vector<double>{1.0}), InvalidInput);
    const std::vector<std::size_t> bad{3};
    EXPECT_THROW(m.gather_rows(bad), InvalidInput);
}

} // namespace
} // namespace pspd
