#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "qiproj/problems.hpp"

using namespace qiproj;

TEST(Test1, Formulas) {
    const UrysohnProblem p = make_test1();
    EXPECT_DOUBLE_EQ((*p.exact_solution)(0.0), 1.0);
    EXPECT_DOUBLE_EQ(p.rhs(0.0), 1.0 - 2.0 / (33.0 * std::numbers::pi));
    for (double s : {0.0, 0.4, 1.0})
        for (double t : {0.1, 0.8}) EXPECT_EQ(p.kernel(s, t, 0.0), 0.0);
}

TEST(Test1, PointResidual) {
    const UrysohnProblem p = make_test1();
    const double s = 0.137;
    const double k = oracle::integrate([&](double t) { return p.kernel(s, t, (*p.exact_solution)(t)); }, 0, 1, 44);
    EXPECT_LE(std::abs((*p.exact_solution)(s) - k - p.rhs(s)), 1e-12);
}

TEST(Test2, Formulas) {
    const UrysohnProblem p = make_test2(1.0);
    EXPECT_DOUBLE_EQ((*p.exact_solution)(0.0), 1.0);
    EXPECT_DOUBLE_EQ((*p.exact_solution)(1.0), 0.5);
    EXPECT_THROW(make_test2(0.0), ParameterError);
    EXPECT_THROW(make_test2(-1.0), ParameterError);
}

TEST(Test2, ClosedFormMatchesQuadrature) {
    for (double c : {0.1, 1.0})
        for (double s : {0.0, 0.5, 1.0}) {
            const double q =
                oracle::integrate([&](double t) { return (t + c) / ((t + c) * (t + s) + 1.0); }, 0.0, 1.0, 128);
            EXPECT_NEAR(test2_integral(s, c), q, 1e-13) << "c=" << c << " s=" << s;
        }
}

TEST(Test2, DiscriminantPositive) {
    for (double c : {0.1, 1.0}) {
        double lowest = 1e300;
        for (int k = 0; k <= 1000; ++k) {
            const double s = k / 1000.0;
            lowest = std::min(lowest, 4.0 * (c * s + 1.0) - (c + s) * (c + s));
        }
        EXPECT_GT(lowest, 0.0);
        if (c == 0.1) EXPECT_NEAR(lowest, 3.19, 1e-12);
    }
}

TEST(Problems, SelfConsistency) {
    EXPECT_LE(self_consistency_residual(make_test1()), 1e-12);
    EXPECT_LE(self_consistency_residual(make_test2(1.0)), 1e-12);
    EXPECT_LE(self_consistency_residual(make_test2(0.1)), 1e-12);
}

TEST(Problems, DerivativeConsistency) {
    std::mt19937 gen(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const UrysohnProblem& p : {make_test1(), make_test2(1.0), make_test2(0.1)}) {
        for (int rep = 0; rep < 20; ++rep) {
            const double s = u(gen), t = u(gen), x = 0.2 + 2.0 * u(gen);
            double prev = 0.0;
            for (double eps : {1e-4, 1e-5}) {
                const double fd = (p.kernel(s, t, x + eps) - p.kernel(s, t, x)) / eps;
                const double err = std::abs(fd - p.kernel_du(s, t, x));
                if (prev > 0.0) EXPECT_LT(err, 0.2 * prev + 1e-9);  // O(eps)
                prev = err;
                EXPECT_LT(err, 100.0 * eps);
            }
        }
    }
}

TEST(Catalog, Entries) {
    EXPECT_FALSE(catalog_entry("test1").ill_behaved);
    EXPECT_FALSE(catalog_entry("test2", 1.0).ill_behaved);
    const ProblemCatalogEntry e = catalog_entry("test2", 0.1);
    EXPECT_TRUE(e.ill_behaved);
    EXPECT_DOUBLE_EQ(e.c, 0.1);
    EXPECT_THROW(catalog_entry("test3"), ParameterError);
    EXPECT_THROW(catalog_entry("test2", 0.0), ParameterError);
}
