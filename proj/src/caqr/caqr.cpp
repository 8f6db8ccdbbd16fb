#include "ca/caqr.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "ca/tree.hpp"

namespace ca {

namespace {

constexpr std::size_t V = PlacedFactor::virtual_row;

std::size_t tri(std::size_t n) { return n * (n + 1) / 2; }
bool is_pow2(std::size_t x) { return x && !(x & (x - 1)); }
std::size_t log2_exact(std::size_t x) {
    std::size_t l = 0;
    while ((std::size_t{1} << l) < x) ++l;
    return l;
}
std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

DenseMatrix gather(const DenseMatrix& G, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
    DenseMatrix X(rows.size(), cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j)
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i] != V) X(i, j) = G(rows[i], cols[j]);
    return X;
}

void scatter(DenseMatrix& G, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols,
             const DenseMatrix& X) {
    for (std::size_t j = 0; j < cols.size(); ++j)
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i] != V) G(rows[i], cols[j]) = X(i, j);
}

std::vector<std::size_t> range(std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> r;
    for (std::size_t i = lo; i < hi; ++i) r.push_back(i);
    return r;
}

// rows lo.., count of them, with indices >= m marked virtual
std::vector<std::size_t> padded_rows(std::size_t lo, std::size_t count, std::size_t m) {
    std::vector<std::size_t> r(count);
    for (std::size_t i = 0; i < count; ++i) r[i] = lo + i < m ? lo + i : V;
    return r;
}

}  // namespace

DenseMatrix ImplicitQ::apply(DenseMatrix C, bool transpose) const {
    if (C.rows() != m) throw ShapeError("implicit Q expects " + std::to_string(m) + " rows");
    const auto cols = range(0, C.cols());
    FlopCounter fc;
    auto one = [&](const PlacedFactor& s) {
        auto X = apply_q(s.f, gather(C, s.rows, cols), transpose, fc);
        scatter(C, s.rows, cols, X);
    };
    if (transpose)
        for (const auto& s : steps) one(s);
    else
        for (auto it = steps.rbegin(); it != steps.rend(); ++it) one(*it);
    return C;
}

DenseMatrix ImplicitQ::thin_q() const { return apply(DenseMatrix::eye(m, n), false); }

void GridLayout::check() const {
    if (m < n) throw ShapeError("CAQR needs m >= n");
    if (!is_pow2(Pr) || !is_pow2(Pc)) throw ShapeError("Pr and Pc must be powers of two");
    if (b == 0) throw ShapeError("block size b must be >= 1");
    if (b * Pr > m) throw ShapeError("need b <= m/Pr (b=" + std::to_string(b) + ", m/Pr=" + std::to_string(m / Pr) + ")");
    if (b * Pc > n) throw ShapeError("need b <= n/Pc (b=" + std::to_string(b) + ", n/Pc=" + std::to_string(n / Pc) + ")");
}

std::size_t caqr_parallel_messages(std::size_t n, std::size_t b, std::size_t Pr, std::size_t Pc) {
    return ceil_div(n, b) * (3 * log2_exact(Pr) + 2 * log2_exact(Pc));
}

CaqrResult caqr_parallel_sim(const DenseMatrix& A, const GridLayout& L, const MachineModel& machine,
                             CaqrOptions opts) {
    if (L.m != A.rows() || L.n != A.cols()) throw ShapeError("layout dimensions do not match A");
    L.check();
    const std::size_t m = L.m, n = L.n, b = L.b, Pr = L.Pr, Pc = L.Pc;
    const std::size_t panels = ceil_div(n, b), row_blocks = ceil_div(m, b);

    CaqrResult res;
    res.q.m = m;
    res.q.n = n;
    DenseMatrix G = A;
    VirtualMachine vm(Pr * Pc, machine);
    const auto tree = make_tree(TreeShape::binary(), Pr);

    for (std::size_t j = 0; j < panels; ++j) {
        const std::size_t c0 = j * b, w = std::min(b, n - c0), pcj = j % Pc, prj = j % Pr;
        const auto pcols = range(c0, c0 + w);

        // active rows held by each processor row, in increasing order
        std::vector<std::vector<std::size_t>> rows(Pr);
        for (std::size_t I = j; I < row_blocks; ++I)
            for (std::size_t r = I * b; r < std::min(m, (I + 1) * b); ++r) rows[I % Pr].push_back(r);
        auto top = [&](std::size_t pr) {
            std::vector<std::size_t> t(w, V);
            for (std::size_t i = 0; i < std::min(w, rows[pr].size()); ++i) t[i] = rows[pr][i];
            return t;
        };

        // leaf QR in the panel's processor column
        std::vector<DenseMatrix> R(Pr, DenseMatrix(w, w));
        std::vector<std::optional<HouseholderFactor>> leaf(Pr);
        std::vector<std::size_t> y_words(Pr, 0), tau_words(Pr, 0);
        for (std::size_t pr = 0; pr < Pr; ++pr) {
            if (rows[pr].empty()) continue;
            FlopCounter fc;
            auto f = qr_dense_any(gather(G, rows[pr], pcols), fc);
            vm.compute(L.proc(pr, pcj), fc);
            DenseMatrix X(rows[pr].size(), w);
            X.set_block(0, 0, f.R.block(0, 0, std::min(w, rows[pr].size()), w));
            scatter(G, rows[pr], pcols, X);
            R[pr] = f.R;
            y_words[pr] += region_words(rows[pr].size(), f.reflectors(), Part::strict_lower);
            tau_words[pr] += f.reflectors();
            res.q.steps.push_back({rows[pr], f});
            leaf[pr] = std::move(f);
        }

        // binary tree down the column, rotated so the root owns block row j
        std::vector<std::size_t> order(Pr);
        for (std::size_t i = 0; i < Pr; ++i) order[i] = (prj + i) % Pr;
        struct Node {
            std::size_t s, p;
            HouseholderFactor g;
        };
        std::vector<Node> nodes;
        for (const auto& level : tree.levels)
            for (const auto& step : level) {
                const std::size_t s = order[step.participants[0]], p = order[step.participants[1]];
                vm.send(L.proc(p, pcj), L.proc(s, pcj), tri(w));
                FlopCounter fc;
                auto g = qr_stacked_triangles({R[s], R[p]}, fc);
                vm.compute(L.proc(s, pcj), fc);
                R[s] = g.R;
                auto ts = top(s), tp = top(p);
                scatter(G, ts, pcols, g.R);
                scatter(G, tp, pcols, DenseMatrix(w, w));
                std::vector<std::size_t> placed = ts;
                placed.insert(placed.end(), tp.begin(), tp.end());
                res.q.steps.push_back({placed, g});
                for (auto x : {s, p}) {
                    y_words[x] += tri(w);
                    tau_words[x] += w;
                }
                nodes.push_back({s, p, std::move(g)});
            }

        // Householder data along each processor row
        if (Pc > 1)
            for (std::size_t pr = 0; pr < Pr; ++pr) {
                std::vector<std::size_t> members(Pc);
                for (std::size_t pc = 0; pc < Pc; ++pc) members[pc] = L.proc(pr, pc);
                if (opts.pipelined_broadcast) {
                    vm.multicast(members, pcj, y_words[pr]);
                    vm.multicast(members, pcj, tau_words[pr]);
                } else {
                    vm.broadcast(members, pcj, y_words[pr]);
                    vm.broadcast(members, pcj, tau_words[pr]);
                }
            }

        // trailing update, one processor column at a time
        for (std::size_t pc = 0; pc < Pc; ++pc) {
            std::vector<std::size_t> cols;
            for (std::size_t J = j + 1; J < panels; ++J)
                if (J % Pc == pc)
                    for (std::size_t c = J * b; c < std::min(n, (J + 1) * b); ++c) cols.push_back(c);
            const std::size_t nc = cols.size();
            for (std::size_t pr = 0; pr < Pr; ++pr) {
                if (!leaf[pr] || nc == 0) continue;
                FlopCounter fc;
                DenseMatrix T = form_T(*leaf[pr], &fc);
                auto X = apply_compact(*leaf[pr], T, gather(G, rows[pr], cols), true, fc);
                scatter(G, rows[pr], cols, X);
                vm.compute(L.proc(pr, pc), fc);
            }
            for (const auto& nd : nodes) {
                // the survivor computes; the partner ships its rows and gets them back
                vm.send(L.proc(nd.p, pc), L.proc(nd.s, pc), w * nc);
                if (nc > 0) {
                    const auto ts = top(nd.s), tp = top(nd.p);
                    FlopCounter fc;
                    auto [C0, C1] = update_pair(lower_block(nd.g), nd.g.tau, gather(G, ts, cols), gather(G, tp, cols), fc);
                    vm.compute(L.proc(nd.s, pc), fc);
                    scatter(G, ts, cols, C0);
                    scatter(G, tp, cols, C1);
                }
                vm.send(L.proc(nd.s, pc), L.proc(nd.p, pc), w * nc);
            }
        }
    }

    res.R = G.block(0, 0, n, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = j + 1; i < n; ++i) res.R(i, j) = 0.0;
    res.cost = vm.report();
    if (opts.pipelined_broadcast) res.cost.notes.push_back("row broadcasts charged as one pipelined step each");
    return res;
}

// ---- sequential ----

SeqCaqrPlan seq_caqr_plan(std::size_t m, std::size_t n, std::size_t W) {
    if (m < n) throw ShapeError("CAQR needs m >= n");
    const std::size_t q = W / 4;
    auto b0 = static_cast<std::size_t>(std::sqrt(static_cast<double>(q)));
    while ((b0 + 1) * (b0 + 1) <= q) ++b0;
    while (b0 * b0 > q) --b0;
    if (b0 == 0) throw ShapeError("fast memory W=" + std::to_string(W) + " is too small (need W >= 4)");
    SeqCaqrPlan p;
    p.Pc = ceil_div(n, b0);
    p.b = ceil_div(n, p.Pc);
    p.Pr = ceil_div(m, p.b);
    return p;
}

SeqCaqrResult caqr_sequential(BlockStore& A, std::size_t W, const MachineModel& machine, Looking looking,
                              const Backend& spill) {
    const std::size_t m = A.m(), n = A.n(), b = A.block_rows(), Pr = A.row_blocks(), Pc = A.col_blocks();
    if (m < n) throw ShapeError("CAQR needs m >= n");
    if (A.has_tau()) throw ShapeError("CAQR input must be a plain matrix store");
    if (Pc > 1 ? A.block_cols() != b : A.block_cols() > b)
        throw ShapeError("sequential CAQR needs square tiles (block_rows=" + std::to_string(b) +
                         ", block_cols=" + std::to_string(A.block_cols()) + ")");
    const std::size_t bc = A.block_cols();
    if (W < 3 * b * bc)
        throw ShapeError("sequential CAQR with " + std::to_string(b) + "-row tiles needs W >= " +
                         std::to_string(3 * b * bc) + ", got " + std::to_string(W));

    SeqCaqrResult res{{}, BlockStore::empty(m, n, b, Pc, true, spill, true), {}, 0};
    BlockStore& q = res.q;
    const std::size_t a_start = A.transfer_log().size();
    FastMemory fast(W);
    FlopCounter fc;
    DenseMatrix R_last;

    auto factor_panel = [&](std::size_t J) {
        const std::size_t w = A.col_width(J);
        auto tile_hold = fast.hold(b * w);
        auto f = qr_unblocked(A.read_tile(J, J), fc);
        q.write_factor(J, J, f.Y, f.tau, Part::lower_with_diag);
        DenseMatrix R = f.R;
        auto r_hold = fast.hold(tri(w));
        tile_hold.release();
        for (std::size_t I = J + 1; I < Pr; ++I) {
            auto h = fast.hold(b * w);
            auto g = qr_triangle_plus_dense(R, A.read_tile(I, J), fc);
            q.write_factor(I, J, g.Y.block(w, 0, b, w), g.tau, Part::full);
            R = g.R;
        }
        if (J + 1 < Pc) {
            DenseMatrix Rt(b, w);
            Rt.set_block(0, 0, R);
            A.write_tile(J, J, Rt, Part::upper);
        } else {
            R_last = R;
        }
    };

    // apply panel J's Q^T to tile column K
    auto update = [&](std::size_t J, std::size_t K) {
        const std::size_t w = A.col_width(J), c = A.col_width(K);
        auto c0_hold = fast.hold(b * c);
        DenseMatrix C0;
        {
            auto h = fast.hold(b * w);
            auto [Y, tau] = q.read_factor(J, J, Part::strict_lower);
            C0 = apply_q(factor_from_trapezoid(std::move(Y), std::move(tau)), A.read_tile(J, K), true, fc);
        }
        for (std::size_t I = J + 1; I < Pr; ++I) {
            auto h = fast.hold(b * w + b * c);
            auto [Ylow, tau] = q.read_factor(I, J, Part::full);
            DenseMatrix Ck = A.read_tile(I, K);
            // only the top w rows of the leading tile take part
            auto out = apply_q(factor_from_lower_block(Ylow, std::move(tau)), vstack({C0.block(0, 0, w, c), Ck}),
                               true, fc);
            C0.set_block(0, 0, out.block(0, 0, w, c));
            A.write_tile(I, K, out.block(w, 0, b, c));
        }
        A.write_tile(J, K, C0);
    };

    if (looking == Looking::right) {
        for (std::size_t J = 0; J < Pc; ++J) {
            factor_panel(J);
            for (std::size_t K = J + 1; K < Pc; ++K) update(J, K);
        }
    } else {
        for (std::size_t K = 0; K < Pc; ++K) {
            for (std::size_t J = 0; J < K; ++J) update(J, K);
            factor_panel(K);
        }
    }

    // assemble R from the tile rows that now hold it
    res.R = DenseMatrix(n, n);
    for (std::size_t J = 0; J < Pc; ++J)
        for (std::size_t K = J; K < Pc; ++K) {
            const std::size_t w = A.col_width(J);
            if (J == K && J + 1 == Pc) {
                res.R.set_block(J * bc, K * bc, R_last);
                continue;
            }
            res.R.set_block(J * bc, K * bc, A.peek_tile(J, K).block(0, 0, w, A.col_width(K)));
        }
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = j + 1; i < n; ++i) res.R(i, j) = 0.0;

    auto comm = A.counters_since(a_start);
    comm += q.counters();
    res.cost = sequential_report(fc, comm, machine);
    res.cost.notes.push_back(looking == Looking::right ? "right-looking" : "left-looking");
    res.cost.notes.push_back("tau words are not counted against fast memory");
    res.peak_words = fast.peak();
    return res;
}

ImplicitQ seq_caqr_implicit_q(BlockStore& q) {
    ImplicitQ iq;
    iq.m = q.m();
    iq.n = q.n();
    const std::size_t b = q.block_rows(), bc = q.block_cols();
    for (std::size_t J = 0; J < q.col_blocks(); ++J) {
        const std::size_t w = q.col_width(J);
        auto [Y, tau] = q.peek_factor(J, J);
        iq.steps.push_back({padded_rows(J * bc, b, iq.m), factor_from_trapezoid(std::move(Y), std::move(tau))});
        for (std::size_t I = J + 1; I < q.row_blocks(); ++I) {
            auto [Ylow, t] = q.peek_factor(I, J);
            auto rows = padded_rows(J * bc, w, iq.m);
            auto below = padded_rows(I * b, b, iq.m);
            rows.insert(rows.end(), below.begin(), below.end());
            iq.steps.push_back({rows, factor_from_lower_block(Ylow, std::move(t))});
        }
    }
    return iq;
}

double seq_caqr_model_words(std::size_t m, std::size_t n, std::size_t W) {
    return 3.0 * m * n * static_cast<double>(n) / std::sqrt(static_cast<double>(W));
}

double seq_caqr_model_messages(std::size_t m, std::size_t n, std::size_t W) {
    return 12.0 * m * n * static_cast<double>(n) / std::pow(static_cast<double>(W), 1.5);
}

double seq_qr_words_lower_bound(std::size_t m, std::size_t n, std::size_t W) {
    const double md = static_cast<double>(m), nd = static_cast<double>(n);
    const double F = md * nd * nd / 4 - nd * nd / 8 * (nd / 2 + 1);
    return F / std::sqrt(8.0 * static_cast<double>(W)) - static_cast<double>(W);
}

}  // namespace ca
