#include "ca/tsqr.hpp"

#include <algorithm>
#include <cmath>

namespace ca {

namespace {

std::size_t tri(std::size_t n) { return n * (n + 1) / 2; }

DenseMatrix top_rows(const DenseMatrix& C, std::size_t n) { return C.block(0, 0, n, C.cols()); }

}  // namespace

std::vector<std::size_t> leaf_offsets(std::size_t m, std::size_t P) {
    if (P == 0) throw ShapeError("need at least one leaf");
    std::vector<std::size_t> off(P + 1, 0);
    const std::size_t base = m / P, extra = m % P;
    for (std::size_t p = 0; p < P; ++p) off[p + 1] = off[p] + base + (p < extra ? 1 : 0);
    return off;
}

TsqrResult tsqr_factor(const DenseMatrix& A, std::size_t P, const ReductionTree& tree, const MachineModel& machine,
                       TsqrOptions opts) {
    const std::size_t m = A.rows(), n = A.cols();
    if (P == 0 || m / P < n)
        throw ShapeError("TSQR needs m/P >= n (m=" + std::to_string(m) + ", n=" + std::to_string(n) +
                         ", P=" + std::to_string(P) + ")");
    if (tree.leaf_count != P)
        throw ShapeError("tree has " + std::to_string(tree.leaf_count) + " leaves, expected " + std::to_string(P));
    validate(tree);

    TsqrResult res;
    TreeQ& q = res.q;
    q.tree = tree;
    q.m = m;
    q.n = n;
    q.row_offset = leaf_offsets(m, P);

    VirtualMachine vm(P, machine);
    std::vector<DenseMatrix> R(P);
    for (std::size_t p = 0; p < P; ++p) {
        FlopCounter fc;
        auto f = qr_unblocked(A.block(q.row_offset[p], 0, q.row_offset[p + 1] - q.row_offset[p], n), fc);
        vm.compute(p, fc);
        R[p] = f.R;
        q.leaf_factors.push_back(std::move(f));
    }

    for (std::size_t l = 0; l < tree.levels.size(); ++l) {
        for (const auto& step : tree.levels[l]) {
            const std::size_t s = step.survivor;
            std::vector<DenseMatrix> blocks;
            for (auto p : step.participants) {
                if (p != s) vm.send(p, s, tri(n));
                blocks.push_back(R[p]);
            }
            FlopCounter fc;
            auto g = qr_stacked_triangles(blocks, fc);
            vm.compute(s, fc);
            R[s] = g.R;
            if (opts.all_reduce)
                for (auto p : step.participants)
                    if (p != s) {
                        vm.send(s, p, tri(n));
                        R[p] = g.R;
                    }
            q.node_factors.emplace(std::make_pair(l, s), std::move(g));
        }
    }
    res.R = R[tree.root()];
    res.cost = vm.report();
    if (opts.all_reduce) res.cost.notes.push_back("all-reduction: result returned to every participant");
    return res;
}

ApplyResult tsqr_apply(const TreeQ& q, const DenseMatrix& C, bool transpose, const MachineModel& machine) {
    const std::size_t P = q.leaf_factors.size(), n = q.n, c = C.cols();
    const bool thin = !transpose && C.rows() == n && q.m != n;
    if (C.rows() != q.m && !thin)
        throw ShapeError("apply expects " + std::to_string(q.m) + (transpose ? "" : " or " + std::to_string(n)) +
                         " rows, got " + std::to_string(C.rows()));

    std::vector<DenseMatrix> local(P);
    const std::size_t root = q.tree.root();
    for (std::size_t p = 0; p < P; ++p) {
        const std::size_t r0 = q.row_offset[p], rows = q.row_offset[p + 1] - r0;
        if (thin) {
            local[p] = DenseMatrix(rows, c);
            if (p == root) local[p].set_block(0, 0, C);
        } else {
            local[p] = C.block(r0, 0, rows, c);
        }
    }

    VirtualMachine vm(P, machine);
    auto combine = [&](std::size_t l, const CombineStep& step, bool gather) {
        const std::size_t s = step.survivor;
        std::vector<DenseMatrix> pieces;
        for (auto p : step.participants) {
            if (p != s && gather) vm.send(p, s, n * c);
            pieces.push_back(top_rows(local[p], n));
        }
        FlopCounter fc;
        auto out = apply_q(q.node_factors.at({l, s}), vstack(pieces), transpose, fc);
        vm.compute(s, fc);
        for (std::size_t k = 0; k < step.participants.size(); ++k) {
            const auto p = step.participants[k];
            if (p != s) vm.send(s, p, n * c);
            local[p].set_block(0, 0, out.block(k * n, 0, n, c));
        }
    };
    auto leaves = [&] {
        for (std::size_t p = 0; p < P; ++p) {
            FlopCounter fc;
            local[p] = apply_q(q.leaf_factors[p], std::move(local[p]), transpose, fc);
            vm.compute(p, fc);
        }
    };

    if (transpose) {
        leaves();
        for (std::size_t l = 0; l < q.tree.levels.size(); ++l)
            for (const auto& step : q.tree.levels[l]) combine(l, step, true);
    } else {
        // With a thin C every non-survivor's piece is still zero when its
        // step runs, so only the scatter back is needed.
        for (std::size_t l = q.tree.levels.size(); l-- > 0;)
            for (const auto& step : q.tree.levels[l]) combine(l, step, !thin);
        leaves();
    }

    ApplyResult res;
    res.C = DenseMatrix(q.m, c);
    for (std::size_t p = 0; p < P; ++p) res.C.set_block(q.row_offset[p], 0, local[p]);
    res.cost = vm.report();
    res.cost.notes.push_back("levels where a node has no combine step send no messages");
    return res;
}

// ---- out of core ----

std::size_t tsqr_ooc_min_words(std::size_t n) {
    // ceil(3n^2/2 + n/2) = ceil(n(3n+1)/2)
    return (n * (3 * n + 1) + 1) / 2;
}

OocPlan tsqr_ooc_plan(std::size_t m, std::size_t n, std::size_t W) {
    const std::size_t need = tsqr_ooc_min_words(n);
    if (W < need)
        throw ShapeError("fast memory W=" + std::to_string(W) + " is below the minimum " + std::to_string(need) +
                         " words for n=" + std::to_string(n));
    const std::size_t room = W - tri(n);
    OocPlan p;
    p.P = std::max<std::size_t>(1, (m * n + room - 1) / room);
    for (;;) {
        p.block_rows = (m + p.P - 1) / p.P;
        if (p.block_rows * n <= room || p.block_rows <= n) break;
        ++p.P;
    }
    p.block_rows = std::max(p.block_rows, n);
    return p;
}

TransferCounters tsqr_ooc_model_counts(std::size_t m, std::size_t n, std::size_t P) {
    return {2 * P, 2 * m * n + n * P - n * (n - 1) / 2};
}

TransferCounters tsqr_apply_ooc_model_counts(std::size_t m, std::size_t n, std::size_t c, std::size_t P) {
    return {3 * P, (2 * c + n) * m + n * P - tri(n)};
}

OocTsqrResult tsqr_factor_ooc(BlockStore& A, std::size_t W, const MachineModel& machine, const Backend& spill) {
    const std::size_t n = A.n(), br = A.block_rows(), P = A.row_blocks();
    if (A.col_blocks() != 1 || A.has_tau()) throw ShapeError("out-of-core TSQR needs a plain 1-D block store");
    const std::size_t need = tsqr_ooc_min_words(n);
    if (W < need)
        throw ShapeError("fast memory W=" + std::to_string(W) + " is below the minimum " + std::to_string(need) +
                         " words for n=" + std::to_string(n));
    if (br < n) throw ShapeError("block_rows must be >= n for out-of-core TSQR");
    if (br * n + tri(n) > W)
        throw ShapeError("a block of " + std::to_string(br) + " rows plus R needs " + std::to_string(br * n + tri(n)) +
                         " words, W=" + std::to_string(W));

    const std::size_t start = A.transfer_log().size();
    OocTsqrResult res{{BlockStore::empty(A.m(), n, br, 1, true, spill), A.m(), n}, {}, {}, 0};
    BlockStore& q = res.factors.q;
    FastMemory fast(W);
    FlopCounter fc;

    FastMemory::Hold r_hold;
    {
        auto blk = fast.hold(br * n);
        auto f = qr_unblocked(A.read_block(0), fc);
        q.write_factor(0, 0, f.Y, f.tau, Part::lower_with_diag);
        res.R = f.R;
        r_hold = fast.hold(tri(n));
    }
    for (std::size_t k = 1; k < P; ++k) {
        auto blk = fast.hold(br * n);
        auto g = qr_triangle_plus_dense(res.R, A.read_block(k), fc);
        q.write_factor(k, 0, g.Y.block(n, 0, br, n), g.tau, Part::full);
        res.R = g.R;
    }

    auto comm = A.counters_since(start);
    comm += q.counters();
    res.cost = sequential_report(fc, comm, machine);
    res.cost.notes.push_back("tau words are not counted against fast memory");
    res.peak_words = fast.peak();
    return res;
}

OocApplyResult tsqr_apply_ooc(OocFactors& f, BlockStore& C, bool transpose, std::size_t W,
                              const MachineModel& machine) {
    BlockStore& q = f.q;
    const std::size_t n = f.n, br = q.block_rows(), P = q.row_blocks(), c = C.n();
    if (C.m() != f.m || C.block_rows() != br || C.col_blocks() != 1)
        throw ShapeError("C must have " + std::to_string(f.m) + " rows in blocks of " + std::to_string(br));
    const std::size_t need = br * (2 * c + n);
    if (W < need)
        throw ShapeError("applying Q needs W >= " + std::to_string(need) + " words, got " + std::to_string(W));

    const std::size_t c_start = C.transfer_log().size(), q_start = q.transfer_log().size();
    FastMemory fast(W);
    FlopCounter fc;

    auto c0_hold = fast.hold(br * c);
    DenseMatrix C0 = C.read_block(0);
    auto first = [&] {
        auto h = fast.hold(br * n);
        auto [Y, tau] = q.read_factor(0, 0, Part::strict_lower);
        C0 = apply_q(factor_from_trapezoid(std::move(Y), std::move(tau)), std::move(C0), transpose, fc);
    };
    auto step = [&](std::size_t k) {
        auto h = fast.hold(br * (n + c));
        DenseMatrix Ck = C.read_block(k);
        auto [Ylow, tau] = q.read_factor(k, 0, Part::full);
        auto out = apply_q(factor_from_lower_block(Ylow, std::move(tau)), vstack({top_rows(C0, n), Ck}), transpose, fc);
        C0.set_block(0, 0, out.block(0, 0, n, c));
        C.write_block(k, out.block(n, 0, br, c));
    };

    if (transpose) {
        first();
        for (std::size_t k = 1; k < P; ++k) step(k);
    } else {
        for (std::size_t k = P; k-- > 1;) step(k);
        first();
    }
    C.write_block(0, C0);

    auto comm = C.counters_since(c_start);
    comm += q.counters_since(q_start);
    OocApplyResult res;
    res.cost = sequential_report(fc, comm, machine);
    res.peak_words = fast.peak();
    return res;
}

}  // namespace ca
