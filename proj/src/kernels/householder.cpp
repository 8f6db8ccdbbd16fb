#include "ca/householder.hpp"

#include <cmath>

namespace ca {

std::vector<std::size_t> HouseholderFactor::pattern(std::size_t j) const {
    std::vector<std::size_t> idx{j};
    const std::size_t n = cols();
    switch (sparsity) {
        case Sparsity::dense:
            for (std::size_t i = j + 1; i < rows(); ++i) idx.push_back(i);
            break;
        case Sparsity::stacked_triangles:
            for (std::size_t b = 1; b < q; ++b)
                for (std::size_t i = 0; i <= j; ++i) idx.push_back(b * n + i);
            break;
        case Sparsity::triangle_plus_dense:
            for (std::size_t i = n; i < rows(); ++i) idx.push_back(i);
            break;
    }
    return idx;
}

Reflector house(const std::vector<double>& w, FlopCounter* counter) {
    FlopCounter local;
    FlopCounter& fc = counter ? *counter : local;
    const std::size_t k = w.size();
    if (k == 0) throw ShapeError("house: empty vector");
    Reflector h;
    h.v.assign(k, 0.0);
    h.v[0] = 1.0;
    const double alpha = w[0];
    double xnorm2 = 0;
    for (std::size_t i = 1; i < k; ++i) xnorm2 += w[i] * w[i];
    fc.multiplies += k - 1;
    fc.adds += k - 1;
    if (xnorm2 == 0 && alpha >= 0) {
        h.beta = alpha;
        return h;
    }
    const double norm = std::sqrt(alpha * alpha + xnorm2);
    const double beta = alpha >= 0 ? -norm : norm;
    const double d = alpha - beta;
    for (std::size_t i = 1; i < k; ++i) h.v[i] = w[i] / d;
    h.tau = (beta - alpha) / beta;
    h.beta = beta;
    fc.multiplies += 1;
    fc.adds += 3;
    fc.divides += 1 + (k - 1) + 1;
    return h;
}

namespace {

std::size_t struct_nnz(const HouseholderFactor& f, std::size_t j) { return f.pattern(j).size(); }

// Factor S in place following f's declared pattern. f.Y/tau/R are filled.
void factor_pattern(DenseMatrix& S, HouseholderFactor& f, std::size_t nref, FlopCounter& fc, AccessMap* access) {
    const std::size_t n = S.cols();
    f.Y = DenseMatrix(S.rows(), n);
    f.tau.assign(nref, 0.0);
    std::vector<double> w;
    for (std::size_t j = 0; j < nref; ++j) {
        auto idx = f.pattern(j);
        w.resize(idx.size());
        for (std::size_t t = 0; t < idx.size(); ++t) {
            w[t] = S(idx[t], j);
            if (access) access->mark(idx[t], j);
        }
        Reflector h = house(w, &fc);
        f.tau[j] = h.tau;
        for (std::size_t t = 0; t < idx.size(); ++t) f.Y(idx[t], j) = h.v[t];
        S(idx[0], j) = h.beta;
        for (std::size_t t = 1; t < idx.size(); ++t) S(idx[t], j) = 0.0;
        if (h.tau == 0) continue;
        const std::size_t k = idx.size();
        for (std::size_t l = j + 1; l < n; ++l) {
            // v[0] == 1 is used implicitly
            double s = S(idx[0], l);
            for (std::size_t t = 1; t < k; ++t) s += h.v[t] * S(idx[t], l);
            s *= h.tau;
            S(idx[0], l) -= s;
            if (access) access->mark(idx[0], l);
            for (std::size_t t = 1; t < k; ++t) {
                S(idx[t], l) -= s * h.v[t];
                if (access) access->mark(idx[t], l);
            }
        }
        fc.multiplies += (n - j - 1) * (2 * k - 1);
        fc.adds += (n - j - 1) * (2 * k - 1);
    }
    f.R = DenseMatrix(n, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i <= std::min(j, S.rows() - 1); ++i) f.R(i, j) = S(i, j);
}

void require_upper(const DenseMatrix& B, const char* what) {
    if (!is_upper_triangular(B)) throw ShapeError(std::string(what) + ": block is not upper triangular");
}

}  // namespace

HouseholderFactor qr_unblocked(const DenseMatrix& A, FlopCounter& counter) {
    if (A.rows() < A.cols()) throw ShapeError("qr_unblocked: rows < cols");
    return qr_dense_any(A, counter);
}

HouseholderFactor qr_dense_any(const DenseMatrix& A, FlopCounter& counter) {
    HouseholderFactor f;
    f.sparsity = Sparsity::dense;
    DenseMatrix S = A;
    // R's shape is needed by pattern(); give it the right column count first
    f.R = DenseMatrix(A.cols(), A.cols());
    f.Y = DenseMatrix(A.rows(), A.cols());
    factor_pattern(S, f, std::min(A.rows(), A.cols()), counter, nullptr);
    if (A.rows() < A.cols()) {
        // reflectors only need min(m, n) columns of Y
        f.Y = f.Y.block(0, 0, A.rows(), A.rows());
    }
    return f;
}

HouseholderFactor qr_stacked_triangles(const std::vector<DenseMatrix>& blocks, FlopCounter& counter,
                                       AccessMap* access) {
    if (blocks.empty()) throw ShapeError("qr_stacked_triangles: no blocks");
    const std::size_t n = blocks[0].cols();
    for (auto& b : blocks) {
        if (b.rows() != n || b.cols() != n) throw ShapeError("qr_stacked_triangles: blocks must be n x n");
        require_upper(b, "qr_stacked_triangles");
    }
    HouseholderFactor f;
    f.sparsity = Sparsity::stacked_triangles;
    f.q = blocks.size();
    f.R = DenseMatrix(n, n);
    f.Y = DenseMatrix(f.q * n, n);
    DenseMatrix S = vstack(blocks);
    factor_pattern(S, f, n, counter, access);
    return f;
}

HouseholderFactor qr_triangle_plus_dense(const DenseMatrix& R_top, const DenseMatrix& B, FlopCounter& counter,
                                         AccessMap* access) {
    const std::size_t n = R_top.cols();
    if (R_top.rows() != n || B.cols() != n) throw ShapeError("qr_triangle_plus_dense: shapes do not conform");
    require_upper(R_top, "qr_triangle_plus_dense");
    HouseholderFactor f;
    f.sparsity = Sparsity::triangle_plus_dense;
    f.R = DenseMatrix(n, n);
    f.Y = DenseMatrix(n + B.rows(), n);
    DenseMatrix S = vstack({R_top, B});
    factor_pattern(S, f, n, counter, access);
    return f;
}

DenseMatrix form_T(const HouseholderFactor& f, FlopCounter* counter) {
    FlopCounter local;
    FlopCounter& fc = counter ? *counter : local;
    const std::size_t k = f.reflectors();
    DenseMatrix T(k, k);
    std::vector<double> y(k), z(k);
    for (std::size_t j = 0; j < k; ++j) {
        T(j, j) = -f.tau[j];
        if (j == 0 || f.tau[j] == 0) continue;
        auto idx = f.pattern(j);
        // y = Y(:, 0:j)^T v_j over the rows v_j can be nonzero on
        for (std::size_t i = 0; i < j; ++i) {
            double s = 0;
            for (std::size_t r : idx) s += f.Y(r, i) * f.Y(r, j);
            y[i] = s;
        }
        fc.multiplies += j * idx.size();
        fc.adds += j * idx.size();
        // z = -tau_j T(0:j, 0:j) y, T upper triangular
        for (std::size_t i = 0; i < j; ++i) {
            double s = 0;
            for (std::size_t l = i; l < j; ++l) s += T(i, l) * y[l];
            z[i] = -f.tau[j] * s;
            fc.multiplies += (j - i) + 1;
            fc.adds += (j - i);
        }
        for (std::size_t i = 0; i < j; ++i) T(i, j) = z[i];
    }
    return T;
}

namespace {

void apply_one(const HouseholderFactor& f, std::size_t j, const std::vector<std::size_t>& idx, DenseMatrix& C,
               std::size_t c0, std::size_t c1) {
    const double tau = f.tau[j];
    const std::size_t k = idx.size();
    for (std::size_t c = c0; c < c1; ++c) {
        double* col = C.col(c);
        double s = col[idx[0]];
        for (std::size_t t = 1; t < k; ++t) s += f.Y(idx[t], j) * col[idx[t]];
        s *= tau;
        col[idx[0]] -= s;
        for (std::size_t t = 1; t < k; ++t) col[idx[t]] -= s * f.Y(idx[t], j);
    }
}

void charge_apply(const HouseholderFactor& f, std::size_t ncols, FlopCounter& fc) {
    for (std::size_t j = 0; j < f.reflectors(); ++j) {
        if (f.tau[j] == 0) continue;
        const std::size_t k = struct_nnz(f, j);
        fc.multiplies += ncols * (2 * k - 1);
        fc.adds += ncols * (2 * k - 1);
    }
}

void check_apply_shape(const HouseholderFactor& f, const DenseMatrix& C) {
    if (C.rows() != f.rows()) throw ShapeError("apply_q: C has " + std::to_string(C.rows()) + " rows, factor has " +
                                               std::to_string(f.rows()));
}

}  // namespace

DenseMatrix apply_q(const HouseholderFactor& f, DenseMatrix C, bool transpose, FlopCounter& counter) {
    check_apply_shape(f, C);
    const std::size_t k = f.reflectors();
    for (std::size_t s = 0; s < k; ++s) {
        const std::size_t j = transpose ? s : k - 1 - s;
        if (f.tau[j] == 0) continue;
        apply_one(f, j, f.pattern(j), C, 0, C.cols());
    }
    charge_apply(f, C.cols(), counter);
    return C;
}

DenseMatrix apply_q_omp(const HouseholderFactor& f, DenseMatrix C, bool transpose, FlopCounter& counter) {
    check_apply_shape(f, C);
    const std::size_t k = f.reflectors();
    std::vector<std::vector<std::size_t>> pats(k);
    for (std::size_t j = 0; j < k; ++j) pats[j] = f.pattern(j);
    const long ncols = static_cast<long>(C.cols());
    // columns are independent; each thread sweeps all reflectors over its columns
#pragma omp parallel for schedule(static)
    for (long c = 0; c < ncols; ++c) {
        for (std::size_t s = 0; s < k; ++s) {
            const std::size_t j = transpose ? s : k - 1 - s;
            if (f.tau[j] == 0) continue;
            apply_one(f, j, pats[j], C, static_cast<std::size_t>(c), static_cast<std::size_t>(c) + 1);
        }
    }
    charge_apply(f, C.cols(), counter);
    return C;
}

DenseMatrix apply_compact(const HouseholderFactor& f, const DenseMatrix& T, DenseMatrix C, bool transpose,
                          FlopCounter& counter) {
    check_apply_shape(f, C);
    const std::size_t k = f.reflectors(), nc = C.cols();
    if (k == 0) return C;
    // M = Y^T C
    DenseMatrix M(k, nc);
    for (std::size_t j = 0; j < k; ++j) {
        auto idx = f.pattern(j);
        for (std::size_t c = 0; c < nc; ++c) {
            double s = 0;
            for (std::size_t r : idx) s += f.Y(r, j) * C(r, c);
            M(j, c) = s;
        }
        counter.multiplies += nc * idx.size();
        counter.adds += nc * idx.size();
    }
    // M := op(T) M, Q = I + Y T Y^T and Q^T = I + Y T^T Y^T
    DenseMatrix N(k, nc);
    for (std::size_t c = 0; c < nc; ++c)
        for (std::size_t i = 0; i < k; ++i) {
            double s = 0;
            if (!transpose)
                for (std::size_t l = i; l < k; ++l) s += T(i, l) * M(l, c);
            else
                for (std::size_t l = 0; l <= i; ++l) s += T(l, i) * M(l, c);
            N(i, c) = s;
            counter.multiplies += transpose ? i + 1 : k - i;
            counter.adds += transpose ? i + 1 : k - i;
        }
    // C += Y N
    for (std::size_t j = 0; j < k; ++j) {
        auto idx = f.pattern(j);
        for (std::size_t c = 0; c < nc; ++c) {
            const double s = N(j, c);
            for (std::size_t r : idx) C(r, c) += f.Y(r, j) * s;
        }
        counter.multiplies += nc * idx.size();
        counter.adds += nc * idx.size();
    }
    return C;
}

DenseMatrix lower_block(const HouseholderFactor& pair) {
    if (pair.sparsity != Sparsity::stacked_triangles || pair.q != 2)
        throw ShapeError("lower_block: factor is not a two-block stack");
    const std::size_t n = pair.cols();
    return pair.Y.block(n, 0, n, n);
}

std::pair<DenseMatrix, DenseMatrix> update_pair(const DenseMatrix& Y1, const std::vector<double>& tau,
                                                DenseMatrix C0, DenseMatrix C1, FlopCounter& counter) {
    const std::size_t n = Y1.rows(), c = C0.cols();
    if (Y1.cols() != n || tau.size() != n || C0.rows() != n || C1.rows() != n || C1.cols() != c)
        throw ShapeError("update_pair: shapes do not conform");
    if (!is_upper_triangular(Y1)) throw ShapeError("update_pair: Y1 must be upper triangular");

    HouseholderFactor f;
    f.sparsity = Sparsity::stacked_triangles;
    f.q = 2;
    f.tau = tau;
    f.R = DenseMatrix(n, n);
    f.Y = vstack({DenseMatrix::identity(n), Y1});
    // T in the I - Y T Y^T convention is the negated form_T result
    DenseMatrix T = form_T(f, &counter);
    for (double& x : T.data()) x = -x;

    // D = C0 + Y1^T C1, Y1 upper triangular
    DenseMatrix D = C0;
    for (std::size_t col = 0; col < c; ++col)
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0;
            for (std::size_t r = 0; r <= i; ++r) s += Y1(r, i) * C1(r, col);
            D(i, col) += s;
            counter.multiplies += i + 1;
            counter.adds += i + 1;
        }
    // W = T^T D
    DenseMatrix W(n, c);
    for (std::size_t col = 0; col < c; ++col)
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0;
            for (std::size_t l = 0; l <= i; ++l) s += T(l, i) * D(l, col);
            W(i, col) = s;
            counter.multiplies += i + 1;
            counter.adds += i;
        }
    // C0 -= W, C1 -= Y1 W
    for (std::size_t col = 0; col < c; ++col)
        for (std::size_t i = 0; i < n; ++i) {
            C0(i, col) -= W(i, col);
            double s = 0;
            for (std::size_t l = i; l < n; ++l) s += Y1(i, l) * W(l, col);
            C1(i, col) -= s;
            counter.multiplies += n - i;
            counter.adds += n - i + 1;
        }
    return {std::move(C0), std::move(C1)};
}

double factor_flop_formula(const std::vector<double>& k) {
    const double n = static_cast<double>(k.size());
    double total = 0;
    for (std::size_t idx = 0; idx < k.size(); ++idx) {
        const double j = static_cast<double>(idx + 1);
        total += 4 * (n - j) * k[idx] + 4 * k[idx] + (n - j);
    }
    return total;
}

HouseholderFactor factor_from_trapezoid(DenseMatrix Y, std::vector<double> tau) {
    const std::size_t n = Y.cols();
    if (Y.rows() < n || tau.size() != n) throw ShapeError("factor_from_trapezoid: bad shapes");
    for (std::size_t j = 0; j < n; ++j) Y(j, j) = 1.0;
    HouseholderFactor h;
    h.Y = std::move(Y);
    h.tau = std::move(tau);
    h.R = DenseMatrix(n, n);
    return h;
}

HouseholderFactor factor_from_lower_block(const DenseMatrix& Ylow, std::vector<double> tau) {
    const std::size_t n = Ylow.cols();
    if (tau.size() != n) throw ShapeError("factor_from_lower_block: bad shapes");
    HouseholderFactor h;
    h.Y = DenseMatrix(n + Ylow.rows(), n);
    for (std::size_t j = 0; j < n; ++j) h.Y(j, j) = 1.0;
    h.Y.set_block(n, 0, Ylow);
    h.tau = std::move(tau);
    h.R = DenseMatrix(n, n);
    h.sparsity = Sparsity::triangle_plus_dense;
    return h;
}

}  // namespace ca
