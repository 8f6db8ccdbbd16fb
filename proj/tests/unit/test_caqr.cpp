#include <gtest/gtest.h>

#include <cmath>

#include "ca/caqr.hpp"
#include "ca/matrix.hpp"
#include "ca/tsqr.hpp"
#include "oracles.hpp"

using ca::GridLayout;
using ca::MachineModel;

namespace {

const MachineModel unit = MachineModel::unit();

ca::DenseMatrix reference_R(const ca::DenseMatrix& A) {
    ca::FlopCounter fc;
    return ca::sign_normalized(ca::qr_unblocked(A, fc).R);
}

GridLayout grid(const ca::DenseMatrix& A, std::size_t Pr, std::size_t Pc, std::size_t b) {
    return {Pr, Pc, b, A.rows(), A.cols()};
}

std::string tmp(const std::string& name) { return std::string(CAQR_TEST_TMP) + "/" + name; }

}  // namespace

TEST(CaqrParallel, SingleProcessorIsPlainQr) {
    auto A = ca::gaussian(40, 8, 1);
    auto r = ca::caqr_parallel_sim(A, grid(A, 1, 1, 8), unit);
    ca::FlopCounter fc;
    EXPECT_EQ(r.R, ca::qr_unblocked(A, fc).R);
    EXPECT_EQ(r.cost.comm.messages, 0u);
}

TEST(CaqrParallel, MessageCountExample) {
    auto A = ca::gaussian(64, 64, 2);
    auto r = ca::caqr_parallel_sim(A, grid(A, 2, 2, 8), unit);
    EXPECT_EQ(r.cost.comm.messages, 40u);
    EXPECT_EQ(ca::caqr_parallel_messages(64, 8, 2, 2), 40u);
}

TEST(CaqrParallel, MatchesOracle) {
    auto A = ca::gaussian(128, 64, 3);
    auto r = ca::caqr_parallel_sim(A, grid(A, 4, 2, 16), unit);
    const double nA = ca::frobenius_norm(A);
    EXPECT_TRUE(ca::is_upper_triangular(r.R));
    EXPECT_LT(ca::max_abs_diff(ca::sign_normalized(r.R), reference_R(A)), 1e-11 * nA);
    EXPECT_LT(ca::max_abs_diff(ca::sign_normalized(r.R), ca::sign_normalized(oracle::gram_schmidt_r(A))), 1e-11 * nA);
    auto Q = r.q.thin_q();
    EXPECT_LE(ca::orthogonality_deviation(Q), 1e-12);
    EXPECT_LE(ca::reconstruction_error(A, Q, r.R), 1e-13);
}

TEST(CaqrParallel, ExactMessageCountsAcrossGrids) {
    const std::size_t m = 128, n = 32;
    auto A = ca::gaussian(m, n, 4);
    for (std::size_t Pr : {1, 2, 4, 8})
        for (std::size_t Pc : {1, 2, 4})
            for (std::size_t b : {4, 8}) {
                auto r = ca::caqr_parallel_sim(A, grid(A, Pr, Pc, b), unit);
                EXPECT_EQ(r.cost.comm.messages, ca::caqr_parallel_messages(n, b, Pr, Pc))
                    << "Pr=" << Pr << " Pc=" << Pc << " b=" << b;
                EXPECT_LT(ca::max_abs_diff(ca::sign_normalized(r.R), reference_R(A)), 1e-11 * ca::frobenius_norm(A));
            }
}

TEST(CaqrParallel, PipelinedBroadcast) {
    auto A = ca::gaussian(64, 64, 5);
    auto r = ca::caqr_parallel_sim(A, grid(A, 2, 4, 8), unit, {.pipelined_broadcast = true});
    EXPECT_EQ(r.cost.comm.messages, 8u * (3 * 1 + 2));
}

TEST(CaqrParallel, RaggedEdges) {
    auto A = ca::gaussian(100, 36, 6);
    auto r = ca::caqr_parallel_sim(A, grid(A, 2, 2, 8), unit);
    EXPECT_LT(ca::max_abs_diff(ca::sign_normalized(r.R), reference_R(A)), 1e-11 * ca::frobenius_norm(A));
    EXPECT_LE(ca::orthogonality_deviation(r.q.thin_q()), 1e-12);
}

TEST(CaqrParallel, TimeIsSumOfParts) {
    auto A = ca::gaussian(64, 32, 7);
    auto r = ca::caqr_parallel_sim(A, grid(A, 2, 2, 8), MachineModel::peta());
    EXPECT_DOUBLE_EQ(r.cost.critical_path_time, r.cost.latency_time + r.cost.bandwidth_time + r.cost.compute_time);
    EXPECT_GT(r.cost.total_flops.mul_add(), r.cost.flops.mul_add());
}

TEST(CaqrParallel, Rejects) {
    auto A = ca::gaussian(64, 32, 8);
    EXPECT_THROW(ca::caqr_parallel_sim(A, grid(A, 3, 1, 8), unit), ca::ShapeError);
    EXPECT_THROW(ca::caqr_parallel_sim(A, grid(A, 16, 1, 8), unit), ca::ShapeError);  // b > m/Pr
    EXPECT_THROW(ca::caqr_parallel_sim(A, grid(A, 1, 8, 8), unit), ca::ShapeError);   // b > n/Pc
    EXPECT_THROW(ca::caqr_parallel_sim(A, grid(A, 1, 1, 0), unit), ca::ShapeError);
    auto W = ca::gaussian(16, 32, 8);
    EXPECT_THROW(ca::caqr_parallel_sim(W, grid(W, 1, 1, 8), unit), ca::ShapeError);
}

TEST(CaqrSequential, Plan) {
    auto p = ca::seq_caqr_plan(512, 512, 16384);
    EXPECT_EQ(p.b, 64u);
    EXPECT_EQ(p.Pr, 8u);
    EXPECT_EQ(p.Pc, 8u);
    auto q = ca::seq_caqr_plan(256, 128, 8192);
    EXPECT_EQ(q.b, 43u);
    EXPECT_EQ(q.Pc, 3u);
    EXPECT_EQ(q.Pr, 6u);
    EXPECT_THROW(ca::seq_caqr_plan(64, 64, 3), ca::ShapeError);
}

TEST(CaqrSequential, MatchesOracleRagged) {
    auto A = ca::gaussian(256, 128, 9);
    const std::size_t W = 8192;
    auto p = ca::seq_caqr_plan(256, 128, W);
    auto s = ca::BlockStore::create_2d(A, p.b, p.Pc, ca::Backend::memory());
    auto r = ca::caqr_sequential(s, W, unit);
    EXPECT_LE(r.peak_words, W);
    EXPECT_LE(r.peak_words, 3 * p.b * p.b);
    EXPECT_TRUE(ca::is_upper_triangular(r.R));
    EXPECT_LT(ca::max_abs_diff(ca::sign_normalized(r.R), reference_R(A)), 1e-11 * ca::frobenius_norm(A));
    auto Q = ca::seq_caqr_implicit_q(r.q).thin_q();
    EXPECT_LE(ca::orthogonality_deviation(Q), 1e-12);
    EXPECT_LE(ca::reconstruction_error(A, Q, r.R), 1e-13);
}

TEST(CaqrSequential, WordsNearModel) {
    const std::size_t m = 512, n = 512, W = 16384;
    auto A = ca::gaussian(m, n, 10);
    auto p = ca::seq_caqr_plan(m, n, W);
    auto s = ca::BlockStore::create_2d(A, p.b, p.Pc, ca::Backend::memory());
    auto r = ca::caqr_sequential(s, W, unit);
    const double ratio = static_cast<double>(r.cost.comm.words) / ca::seq_caqr_model_words(m, n, W);
    EXPECT_GE(ratio, 0.5);
    EXPECT_LE(ratio, 2.0);
    const double mratio = static_cast<double>(r.cost.comm.messages) / ca::seq_caqr_model_messages(m, n, W);
    EXPECT_GE(mratio, 0.5);
    EXPECT_LE(mratio, 2.0);
    EXPECT_GE(static_cast<double>(r.cost.comm.words), ca::seq_qr_words_lower_bound(m, n, W));
    EXPECT_GE(r.cost.comm.words, 2 * m * n);
    EXPECT_LE(r.peak_words, W);
}

TEST(CaqrSequential, SinglePanelIsOocTsqr) {
    const std::size_t m = 512, n = 16, W = 4096;
    auto A = ca::gaussian(m, n, 11);
    auto p = ca::seq_caqr_plan(m, n, W);
    ASSERT_EQ(p.Pc, 1u);
    auto s = ca::BlockStore::create_2d(A, p.b, p.Pc, ca::Backend::memory());
    auto r = ca::caqr_sequential(s, W, unit);
    EXPECT_EQ(r.cost.comm, ca::tsqr_ooc_model_counts(p.Pr * p.b, n, p.Pr));

    auto t = ca::BlockStore::create(A, p.b, ca::Backend::memory());
    auto o = ca::tsqr_factor_ooc(t, W, unit);
    EXPECT_EQ(r.cost.comm, o.cost.comm);
    EXPECT_EQ(r.R, o.R);
}

TEST(CaqrSequential, LeftLookingSameTraffic) {
    auto A = ca::gaussian(200, 120, 12);
    const std::size_t W = 4096;
    auto p = ca::seq_caqr_plan(200, 120, W);
    auto s1 = ca::BlockStore::create_2d(A, p.b, p.Pc, ca::Backend::memory());
    auto s2 = ca::BlockStore::create_2d(A, p.b, p.Pc, ca::Backend::memory());
    auto right = ca::caqr_sequential(s1, W, unit, ca::Looking::right);
    auto left = ca::caqr_sequential(s2, W, unit, ca::Looking::left);
    const double rw = static_cast<double>(right.cost.comm.words), lw = static_cast<double>(left.cost.comm.words);
    EXPECT_NEAR(lw / rw, 1.0, 0.01);
    EXPECT_LE(left.peak_words, W);
    EXPECT_LT(ca::max_abs_diff(ca::sign_normalized(left.R), ca::sign_normalized(right.R)),
              1e-11 * ca::frobenius_norm(A));
}

TEST(CaqrSequential, FileBackend) {
    auto A = ca::gaussian(96, 48, 13);
    const std::size_t W = 1024;
    auto p = ca::seq_caqr_plan(96, 48, W);
    auto s = ca::BlockStore::create_2d(A, p.b, p.Pc, ca::Backend::file(tmp("caqr_a.blk")));
    auto m = ca::BlockStore::create_2d(A, p.b, p.Pc, ca::Backend::memory());
    auto rf = ca::caqr_sequential(s, W, unit, ca::Looking::right, ca::Backend::file(tmp("caqr_q.blk")));
    auto rm = ca::caqr_sequential(m, W, unit);
    EXPECT_EQ(rf.R, rm.R);
    EXPECT_EQ(rf.cost.comm, rm.cost.comm);
}

TEST(CaqrSequential, LowerBoundsHold) {
    for (std::size_t m : {64, 128, 300})
        for (std::size_t n : {16, 64})
            for (std::size_t W : {256, 1024, 4096}) {
                if (n > m) continue;
                auto p = ca::seq_caqr_plan(m, n, W);
                auto s = ca::BlockStore::create_2d(ca::gaussian(m, n, m + n + W), p.b, p.Pc, ca::Backend::memory());
                auto r = ca::caqr_sequential(s, W, unit);
                EXPECT_GE(static_cast<double>(r.cost.comm.words), ca::seq_qr_words_lower_bound(m, n, W));
                EXPECT_LE(r.peak_words, W);
            }
}

TEST(CaqrSequential, RejectsNonSquareTiles) {
    auto A = ca::gaussian(64, 32, 14);
    auto s = ca::BlockStore::create_2d(A, 8, 2, ca::Backend::memory());
    EXPECT_THROW(ca::caqr_sequential(s, 4096, unit), ca::ShapeError);
    auto t = ca::BlockStore::create_2d(A, 16, 2, ca::Backend::memory());
    EXPECT_THROW(ca::caqr_sequential(t, 100, unit), ca::ShapeError);
}
