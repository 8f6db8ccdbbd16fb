#include <gtest/gtest.h>

#include <cmath>

#include "ca/matrix.hpp"
#include "ca/tsqr.hpp"
#include "oracles.hpp"

using ca::MachineModel;
using ca::TreeShape;

namespace {

const MachineModel unit = MachineModel::unit();

ca::DenseMatrix reference_R(const ca::DenseMatrix& A) {
    ca::FlopCounter fc;
    return ca::sign_normalized(ca::qr_unblocked(A, fc).R);
}

ca::TsqrResult run(const ca::DenseMatrix& A, std::size_t P, TreeShape s, ca::TsqrOptions o = {}) {
    return ca::tsqr_factor(A, P, ca::make_tree(s, P), unit, o);
}

std::string tmp(const std::string& name) { return std::string(CAQR_TEST_TMP) + "/" + name; }

}  // namespace

TEST(Tsqr, SingleLeafIsPlainQr) {
    auto A = ca::gaussian(40, 5, 1);
    auto r = run(A, 1, TreeShape::binary());
    ca::FlopCounter fc;
    EXPECT_EQ(r.R, ca::qr_unblocked(A, fc).R);
    EXPECT_EQ(r.cost.comm.messages, 0u);
    EXPECT_EQ(r.cost.total_comm.messages, 0u);
}

TEST(Tsqr, BinarySixteenCounts) {
    auto r = run(ca::gaussian(64, 4, 2), 16, TreeShape::binary());
    EXPECT_EQ(r.cost.comm.messages, 4u);
    EXPECT_EQ(r.cost.comm.words, 40u);
    EXPECT_EQ(r.cost.total_comm.messages, 15u);
}

TEST(Tsqr, MatchesOracleAndAcrossShapes) {
    auto A = ca::gaussian(256, 8, 3);
    auto ref = reference_R(A);
    auto gs = ca::sign_normalized(oracle::gram_schmidt_r(A));
    EXPECT_LT(ca::max_abs_diff(ref, gs), 1e-12);
    std::vector<ca::DenseMatrix> all;
    for (std::size_t P : {2, 4, 8})
        for (auto s : {TreeShape::flat(), TreeShape::binary(), TreeShape::qary(4)}) {
            auto R = ca::sign_normalized(run(A, P, s).R);
            EXPECT_TRUE(ca::is_upper_triangular(R));
            EXPECT_LT(ca::max_abs_diff(R, ref), 1e-12 * ca::frobenius_norm(A));
            all.push_back(R);
        }
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j) EXPECT_LT(ca::max_abs_diff(all[i], all[j]), 1e-12);
}

TEST(Tsqr, ExactBinaryMessageCounts) {
    for (std::size_t L = 1; L <= 6; ++L) {
        const std::size_t P = std::size_t{1} << L;
        for (std::size_t n = 2; n <= 16; n += 7) {
            auto r = run(ca::gaussian(P * n, n, L * 100 + n), P, TreeShape::binary());
            const std::size_t w = n * (n + 1) / 2;
            EXPECT_EQ(r.cost.comm.messages, L);
            EXPECT_EQ(r.cost.comm.words, L * w);
            EXPECT_EQ(r.cost.total_comm.messages, P - 1);
            EXPECT_EQ(r.cost.total_comm.words, (P - 1) * w);
        }
    }
}

TEST(Tsqr, FlatTreeChainsAllMessages) {
    auto r = run(ca::gaussian(80, 4, 5), 8, TreeShape::flat());
    EXPECT_EQ(r.cost.comm.messages, 7u);
}

TEST(Tsqr, CriticalPathFlops) {
    const std::size_t P = 8, n = 8, m = P * 1024;
    auto r = run(ca::gaussian(m, n, 6), P, TreeShape::binary());
    const double model = 2.0 * m * n * n / P + (2.0 / 3.0) * n * n * n * 3;
    EXPECT_NEAR(static_cast<double>(r.cost.flops.mul_add()) / model, 1.0, 0.10);
    EXPECT_GT(r.cost.total_flops.mul_add(), r.cost.flops.mul_add());
}

TEST(Tsqr, TimeBreakdown) {
    auto r = ca::tsqr_factor(ca::gaussian(128, 4, 7), 8, ca::make_tree(TreeShape::binary(), 8), MachineModel::power5());
    EXPECT_DOUBLE_EQ(r.cost.critical_path_time, r.cost.latency_time + r.cost.bandwidth_time + r.cost.compute_time);
    EXPECT_DOUBLE_EQ(r.cost.latency_time, 3 * 5e-6);
    EXPECT_DOUBLE_EQ(r.cost.bandwidth_time, 3 * 10 * 2.5e-9);
    auto j = r.cost.to_json();
    for (const char* k : {"messages", "words", "multiplies", "adds", "divides", "latency_time", "bandwidth_time",
                          "compute_time", "total_time", "schema_version"})
        EXPECT_TRUE(j.contains(k)) << k;
}

TEST(Tsqr, Deterministic) {
    auto A = ca::gaussian(200, 6, 8);
    auto a = run(A, 4, TreeShape::qary(3));
    auto b = run(A, 4, TreeShape::qary(3));
    EXPECT_EQ(a.R, b.R);
    EXPECT_EQ(a.cost.to_json(), b.cost.to_json());
    for (std::size_t p = 0; p < 4; ++p) EXPECT_EQ(a.q.leaf_factors[p].Y, b.q.leaf_factors[p].Y);
}

TEST(Tsqr, AllReduceDoublesMessages) {
    auto A = ca::gaussian(64, 4, 9);
    auto a = run(A, 8, TreeShape::binary());
    auto b = run(A, 8, TreeShape::binary(), {.all_reduce = true});
    EXPECT_EQ(b.cost.comm.messages, 2 * a.cost.comm.messages);
    EXPECT_EQ(a.R, b.R);
}

TEST(Tsqr, Rejects) {
    EXPECT_THROW(run(ca::gaussian(12, 4, 1), 4, TreeShape::binary()), ca::ShapeError);
    EXPECT_THROW(ca::tsqr_factor(ca::gaussian(64, 4, 1), 8, ca::make_tree(TreeShape::binary(), 4), unit),
                 ca::ShapeError);
    auto bad = ca::make_tree(TreeShape::binary(), 4);
    bad.levels[1][0].survivor = 3;
    EXPECT_THROW(ca::tsqr_factor(ca::gaussian(64, 4, 1), 4, bad, unit), ca::ShapeError);
}

TEST(Tsqr, UnevenRows) {
    auto A = ca::gaussian(103, 5, 10);
    auto r = run(A, 4, TreeShape::binary());
    EXPECT_LT(ca::max_abs_diff(ca::sign_normalized(r.R), reference_R(A)), 1e-12);
    EXPECT_EQ(ca::leaf_offsets(103, 4), (std::vector<std::size_t>{0, 26, 52, 78, 103}));
}

TEST(TsqrApply, ZeroStaysZero) {
    auto r = run(ca::gaussian(64, 4, 11), 4, TreeShape::binary());
    auto out = ca::tsqr_apply(r.q, ca::DenseMatrix(64, 3), true, unit);
    EXPECT_EQ(ca::max_abs(out.C), 0.0);
}

TEST(TsqrApply, ExplicitThinQ) {
    auto A = ca::gaussian(128, 6, 12);
    for (auto s : {TreeShape::flat(), TreeShape::binary(), TreeShape::qary(4)}) {
        auto r = run(A, 8, s);
        auto Q = ca::tsqr_apply(r.q, ca::DenseMatrix::identity(6), false, unit).C;
        ASSERT_EQ(Q.rows(), 128u);
        EXPECT_LE(ca::orthogonality_deviation(Q), 1e-12);
        EXPECT_LE(ca::reconstruction_error(A, Q, r.R), 1e-13);
    }
}

TEST(TsqrApply, QtAGivesR) {
    auto A = ca::gaussian(96, 5, 13);
    auto r = run(A, 4, TreeShape::binary());
    auto B = ca::tsqr_apply(r.q, A, true, unit).C;
    EXPECT_LT(ca::max_abs_diff(B.block(0, 0, 5, 5), r.R), 1e-12);
    EXPECT_LT(ca::max_abs(B.block(5, 0, 91, 5)), 1e-12);
}

TEST(TsqrApply, RoundTripInColumnSpace) {
    auto A = ca::gaussian(96, 5, 14);
    auto r = run(A, 4, TreeShape::qary(3));
    auto x = ca::multiply(A, ca::gaussian(5, 2, 15));
    auto y = ca::tsqr_apply(r.q, x, true, unit).C;
    auto back = ca::tsqr_apply(r.q, y, false, unit).C;
    EXPECT_LT(ca::max_abs_diff(back, x), 1e-12 * ca::frobenius_norm(x));
}

TEST(TsqrApply, MessageCounts) {
    const std::size_t n = 4, c = 3;
    auto r = run(ca::gaussian(64, n, 16), 8, TreeShape::binary());
    auto t = ca::tsqr_apply(r.q, ca::gaussian(64, c, 17), true, unit);
    EXPECT_EQ(t.cost.comm.messages, 6u);
    EXPECT_EQ(t.cost.comm.words, 6 * n * c);
    EXPECT_EQ(t.cost.total_comm.messages, 14u);
    auto f = ca::tsqr_apply(r.q, ca::gaussian(n, c, 18), false, unit);
    EXPECT_EQ(f.cost.comm.messages, 3u);
    EXPECT_EQ(f.cost.total_comm.messages, 7u);
    EXPECT_THROW(ca::tsqr_apply(r.q, ca::gaussian(10, 2, 1), true, unit), ca::ShapeError);
    EXPECT_THROW(ca::tsqr_apply(r.q, ca::gaussian(n, 2, 1), true, unit), ca::ShapeError);
}

TEST(TsqrApply, PassThroughCostsNothing) {
    // P=5: leaf 4 idles through the first two levels
    auto r = run(ca::gaussian(50, 3, 19), 5, TreeShape::binary());
    auto t = ca::tsqr_apply(r.q, ca::gaussian(50, 2, 20), true, unit);
    EXPECT_EQ(t.cost.total_comm.messages, 2u * 4u);
}

TEST(TsqrOoc, Plan) {
    EXPECT_EQ(ca::tsqr_ooc_min_words(8), 100u);
    EXPECT_EQ(ca::tsqr_ooc_min_words(3), 15u);
    auto p = ca::tsqr_ooc_plan(1024, 8, 548);
    EXPECT_EQ(p.P, 16u);
    EXPECT_EQ(p.block_rows, 64u);
    auto big = ca::tsqr_ooc_plan(std::size_t{1} << 20, 16, 65536);
    EXPECT_EQ(big.P, 257u);
    EXPECT_EQ(big.block_rows, 4081u);
    EXPECT_THROW(ca::tsqr_ooc_plan(1024, 8, 99), ca::ShapeError);
}

TEST(TsqrOoc, ModelCountsExample) {
    auto A = ca::gaussian(1024, 8, 21);
    auto s = ca::BlockStore::create(A, 64, ca::Backend::memory());
    auto r = ca::tsqr_factor_ooc(s, 548, unit);
    EXPECT_EQ(r.cost.comm.messages, 32u);
    EXPECT_EQ(r.cost.comm.words, 16484u);
    EXPECT_EQ(r.cost.comm, ca::tsqr_ooc_model_counts(1024, 8, 16));
    EXPECT_LE(r.peak_words, 548u);
    EXPECT_LT(ca::max_abs_diff(ca::sign_normalized(r.R), reference_R(A)), 1e-12 * ca::frobenius_norm(A));
}

TEST(TsqrOoc, MatchesInMemory) {
    auto A = ca::gaussian(4096, 16, 22);
    auto plan = ca::tsqr_ooc_plan(4096, 16, 1024);
    auto s = ca::BlockStore::create(A, plan.block_rows, ca::Backend::memory());
    auto r = ca::tsqr_factor_ooc(s, 1024, unit);
    EXPECT_LE(r.peak_words, 1024u);
    EXPECT_EQ(r.cost.comm, ca::tsqr_ooc_model_counts(plan.P * plan.block_rows, 16, plan.P));
    EXPECT_LT(ca::max_abs_diff(ca::sign_normalized(r.R), reference_R(A)), 1e-12 * ca::frobenius_norm(A));
}

TEST(TsqrOoc, SingleBlock) {
    const std::size_t m = 64, n = 4;
    auto s = ca::BlockStore::create(ca::gaussian(m, n, 23), m, ca::Backend::memory());
    auto r = ca::tsqr_factor_ooc(s, 10000, unit);
    EXPECT_EQ(r.cost.comm.messages, 2u);
    EXPECT_EQ(r.cost.comm.words, 2 * m * n + n - n * (n - 1) / 2);
}

TEST(TsqrOoc, RejectsInfeasible) {
    auto s = ca::BlockStore::create(ca::gaussian(64, 8, 1), 16, ca::Backend::memory());
    try {
        ca::tsqr_factor_ooc(s, 99, unit);
        FAIL();
    } catch (const ca::ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("100"), std::string::npos);
    }
    // block too tall for W
    auto t = ca::BlockStore::create(ca::gaussian(256, 8, 1), 128, ca::Backend::memory());
    EXPECT_THROW(ca::tsqr_factor_ooc(t, 548, unit), ca::ShapeError);
}

TEST(TsqrOoc, FileSpillMatchesMemory) {
    auto A = ca::gaussian(300, 5, 24);
    auto a = ca::BlockStore::create(A, 40, ca::Backend::memory());
    auto b = ca::BlockStore::create(A, 40, ca::Backend::file(tmp("ooc_a.blk")));
    auto ra = ca::tsqr_factor_ooc(a, 400, unit);
    auto rb = ca::tsqr_factor_ooc(b, 400, unit, ca::Backend::file(tmp("ooc_q.blk")));
    EXPECT_EQ(ra.R, rb.R);
    EXPECT_EQ(ra.cost.to_json(), rb.cost.to_json());
}

TEST(TsqrOoc, ApplyCountsExample) {
    const std::size_t m = 64, n = 4, c = 2;
    auto s = ca::BlockStore::create(ca::gaussian(m, n, 25), 16, ca::Backend::memory());
    auto f = ca::tsqr_factor_ooc(s, 74, unit);
    auto C = ca::BlockStore::create(ca::gaussian(m, c, 26), 16, ca::Backend::memory());
    auto r = ca::tsqr_apply_ooc(f.factors, C, true, 256, unit);
    EXPECT_EQ(r.cost.comm.messages, 12u);
    EXPECT_EQ(r.cost.comm.words, 518u);
    EXPECT_EQ(r.cost.comm, ca::tsqr_apply_ooc_model_counts(m, n, c, 4));
    auto g = ca::tsqr_apply_ooc(f.factors, C, false, 256, unit);
    EXPECT_EQ(g.cost.comm.messages, 12u);
    EXPECT_EQ(g.cost.comm.words, 518u);
}

TEST(TsqrOoc, ApplyRoundTripAndQtA) {
    const std::size_t m = 200, n = 5;
    auto A = ca::gaussian(m, n, 27);
    auto s = ca::BlockStore::create(A, 25, ca::Backend::memory());
    auto f = ca::tsqr_factor_ooc(s, 200, unit);

    auto I = ca::BlockStore::create(ca::DenseMatrix::eye(m, n), 25, ca::Backend::memory());
    ca::tsqr_apply_ooc(f.factors, I, false, 1000, unit);
    auto Q = I.snapshot();
    EXPECT_LE(ca::orthogonality_deviation(Q), 1e-12);
    ca::tsqr_apply_ooc(f.factors, I, true, 1000, unit);
    EXPECT_LT(ca::max_abs_diff(I.snapshot(), ca::DenseMatrix::eye(m, n)), 1e-12);

    auto B = ca::BlockStore::create(A, 25, ca::Backend::memory());
    ca::tsqr_apply_ooc(f.factors, B, true, 1000, unit);
    auto QtA = B.snapshot();
    EXPECT_LT(ca::max_abs_diff(QtA.block(0, 0, n, n), f.R), 1e-12);
    EXPECT_LT(ca::max_abs(QtA.block(n, 0, m - n, n)), 1e-12);
    EXPECT_LE(ca::reconstruction_error(A, Q, f.R), 1e-13);
}

TEST(TsqrOoc, ApplyRejectsShapeMismatch) {
    auto s = ca::BlockStore::create(ca::gaussian(64, 4, 1), 16, ca::Backend::memory());
    auto f = ca::tsqr_factor_ooc(s, 74, unit);
    auto C = ca::BlockStore::create(ca::gaussian(64, 2, 1), 8, ca::Backend::memory());
    EXPECT_THROW(ca::tsqr_apply_ooc(f.factors, C, true, 1000, unit), ca::ShapeError);
    auto D = ca::BlockStore::create(ca::gaussian(64, 2, 1), 16, ca::Backend::memory());
    EXPECT_THROW(ca::tsqr_apply_ooc(f.factors, D, true, 50, unit), ca::ShapeError);
}
