#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ca/householder.hpp"
#include "ca/matrix.hpp"
#include "oracles.hpp"

using ca::DenseMatrix;

namespace {
constexpr double eps = 0x1p-52;
}

TEST(MatrixCore, ShapesAndIdentity) {
    DenseMatrix A(3, 2);
    EXPECT_EQ(A.data().size(), 6u);
    EXPECT_THROW(DenseMatrix(0, 2), ca::ShapeError);
    EXPECT_THROW(DenseMatrix(2, 2, std::vector<double>(3)), ca::ShapeError);
    auto I = DenseMatrix::identity(3);
    EXPECT_EQ(I(1, 1), 1.0);
    EXPECT_EQ(I(0, 1), 0.0);
}

TEST(MatrixCore, ConditionedKappaOneIsOrthonormal) {
    auto A = ca::generate_conditioned(5, 3, 1.0, 7);
    auto s = oracle::singular_values(A);
    for (double v : s) EXPECT_NEAR(v, 1.0, 1e-13);
    auto G = ca::multiply_tn(A, A);
    EXPECT_LT(ca::max_abs_diff(G, DenseMatrix::identity(3)), 1e-12);
}

TEST(MatrixCore, ConditionedHitsKappa) {
    auto A = ca::generate_conditioned(20, 5, 1e8, 1);
    auto s = oracle::singular_values(A);
    EXPECT_NEAR(s.front() / s.back(), 1e8, 1e8 * 1e-4);
}

TEST(MatrixCore, ConditionedOneByOne) {
    auto A = ca::generate_conditioned(1, 1, 1.0, 0);
    EXPECT_NEAR(std::abs(A(0, 0)), 1.0, 1e-15);
}

TEST(MatrixCore, ConditionedRejectsBadInput) {
    EXPECT_THROW(ca::generate_conditioned(3, 5, 1.0, 1), ca::ShapeError);
    EXPECT_THROW(ca::generate_conditioned(5, 3, 0.5, 1), ca::ShapeError);
}

TEST(MatrixCore, ConditionedDeterministic) {
    auto A = ca::generate_conditioned(30, 6, 1e3, 42);
    auto B = ca::generate_conditioned(30, 6, 1e3, 42);
    EXPECT_EQ(A.data(), B.data());
    auto C = ca::generate_conditioned(30, 6, 1e3, 43);
    EXPECT_NE(A.data(), C.data());
}

TEST(MatrixCore, DeviationTrivialCases) {
    EXPECT_EQ(ca::orthogonality_deviation(DenseMatrix::identity(4)), 0.0);
    auto Q = DenseMatrix::identity(2);
    Q(0, 0) = Q(1, 1) = 2;
    EXPECT_NEAR(ca::orthogonality_deviation(Q), 3.0, 1e-14);
}

TEST(MatrixCore, DeviationOfHouseholderQ) {
    auto A = ca::gaussian(50, 10, 3);
    ca::FlopCounter fc;
    auto f = ca::qr_unblocked(A, fc);
    auto Q = ca::apply_q(f, DenseMatrix::eye(50, 10), false, fc);
    EXPECT_LE(ca::orthogonality_deviation(Q), 100 * eps * std::sqrt(50.0));
}

TEST(MatrixCore, DeviationSpectralVsFrobenius) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto Q = ca::gaussian(12, 4, seed);
        double s = ca::orthogonality_deviation(Q);
        double f = ca::orthogonality_deviation_fro(Q);
        EXPECT_LE(s, f * (1 + 1e-12));
        EXPECT_LE(f, std::sqrt(4.0) * s * (1 + 1e-12));
    }
}

TEST(MatrixCore, ReconstructionError) {
    auto I = DenseMatrix::identity(3);
    EXPECT_EQ(ca::reconstruction_error(I, I, I), 0.0);
    DenseMatrix Z(3, 2), R0(2, 2);
    EXPECT_EQ(ca::reconstruction_error(Z, DenseMatrix::eye(3, 2), R0), 0.0);
    EXPECT_THROW(ca::reconstruction_error(Z, I, R0), ca::ShapeError);

    auto A = ca::gaussian(40, 8, 11);
    ca::FlopCounter fc;
    auto f = ca::qr_unblocked(A, fc);
    auto Q = ca::apply_q(f, DenseMatrix::eye(40, 8), false, fc);
    EXPECT_LE(ca::reconstruction_error(A, Q, f.R), 100 * eps * std::sqrt(40.0 * 8));
}

TEST(MatrixCore, CsvRoundTrip) {
    auto A = ca::gaussian(7, 3, 5);
    A(0, 0) = 1.0 / 3.0;
    std::stringstream ss;
    ca::write_csv(ss, A);
    std::string first;
    std::getline(std::stringstream(ss.str()), first);
    EXPECT_EQ(first, "7,3");
    auto B = ca::read_csv(ss);
    EXPECT_EQ(A.data(), B.data());
}

TEST(MatrixCore, SignNormalization) {
    DenseMatrix R(2, 2, {-2, 0, 1, 3});
    auto s = ca::normalize_signs(R);
    EXPECT_EQ(s[0], -1.0);
    EXPECT_EQ(R(0, 0), 2.0);
    EXPECT_EQ(R(0, 1), -1.0);
}
