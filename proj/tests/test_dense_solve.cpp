#include <gtest/gtest.h>

#include <random>

#include "qiproj/dense_solve.hpp"

using namespace qiproj;

TEST(DenseSolve, Identity) {
    const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(7, -1.0, 2.0);
    EXPECT_EQ(dense_solve(Eigen::MatrixXd::Identity(7, 7), b), b);
}

TEST(DenseSolve, RandomResidual) {
    std::mt19937 gen(21);
    std::normal_distribution<double> u;
    Eigen::MatrixXd M(50, 50);
    Eigen::VectorXd b(50);
    for (int i = 0; i < 50; ++i) {
        b(i) = u(gen);
        for (int j = 0; j < 50; ++j) M(i, j) = u(gen);
    }
    M += 10.0 * Eigen::MatrixXd::Identity(50, 50);
    const Eigen::VectorXd x = dense_solve(M, b);
    EXPECT_LE((M * x - b).cwiseAbs().maxCoeff(), 1e-11);
    const Eigen::VectorXd ref = M.fullPivLu().solve(b);
    EXPECT_LE((x - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DenseSolve, NeedsPivoting) {
    Eigen::MatrixXd M(2, 2);
    M << 0.0, 1.0, 1.0, 0.0;
    Eigen::VectorXd b(2);
    b << 3.0, 4.0;
    const Eigen::VectorXd x = dense_solve(M, b);
    EXPECT_DOUBLE_EQ(x(0), 4.0);
    EXPECT_DOUBLE_EQ(x(1), 3.0);
}

TEST(DenseSolve, Hilbert) {
    Eigen::MatrixXd H(8, 8);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) H(i, j) = 1.0 / (i + j + 1);
    Eigen::VectorXd x(8);
    for (int i = 0; i < 8; ++i) x(i) = 1.0 + i;
    const Eigen::VectorXd y = dense_solve(H, H * x);
    for (int i = 0; i < 8; ++i) EXPECT_NEAR(y(i) / x(i), 1.0, 1e-3);
}

TEST(DenseSolve, Singular) {
    Eigen::MatrixXd M(3, 3);
    M << 1, 2, 3, 2, 4, 6, 0, 0, 0;
    EXPECT_THROW(dense_solve(M, Eigen::VectorXd::Ones(3)), SingularMatrixError);
    EXPECT_THROW(dense_solve(Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Ones(2)), SingularMatrixError);
}

TEST(DenseSolve, ShapeErrors) {
    EXPECT_THROW(dense_solve(Eigen::MatrixXd::Zero(2, 3), Eigen::VectorXd::Ones(2)), ParameterError);
    EXPECT_THROW(dense_solve(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Ones(2)), ParameterError);
}
