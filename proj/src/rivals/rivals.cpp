#include "ca/rivals.hpp"

#include <algorithm>
#include <cmath>

namespace ca {

namespace {

double dot(const double* x, const double* y, std::size_t m, FlopCounter& fc) {
    double s = 0;
    for (std::size_t i = 0; i < m; ++i) s += x[i] * y[i];
    fc.multiplies += m;
    fc.adds += m - 1;
    return s;
}

void axpy(double a, const double* x, double* y, std::size_t m, FlopCounter& fc) {
    for (std::size_t i = 0; i < m; ++i) y[i] -= a * x[i];
    fc.multiplies += m;
    fc.adds += m;
}

// R(k,k) = ||v||, Q(:,k) = v / R(k,k)
void normalize(const double* v, std::size_t m, std::size_t k, DenseMatrix& Q, DenseMatrix& R, FlopCounter& fc) {
    double nrm = 0;
    for (std::size_t i = 0; i < m; ++i) nrm = std::hypot(nrm, v[i]);
    fc.multiplies += m;
    fc.adds += m;
    ++fc.divides;
    if (!(nrm > 0)) throw NumericError("zero norm at column " + std::to_string(k));
    R(k, k) = nrm;
    for (std::size_t i = 0; i < m; ++i) Q.col(k)[i] = v[i] / nrm;
    fc.divides += m;
}

void check_shape(const DenseMatrix& A) {
    if (A.rows() < A.cols()) throw ShapeError("need m >= n");
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::cholesky_qr: return "choleskyqr";
        case Method::cgs_l: return "cgs_l";
        case Method::cgs_r: return "cgs_r";
        case Method::mgs_l: return "mgs_l";
        case Method::mgs_r: return "mgs_r";
        case Method::cgs2: return "cgs2";
    }
    return "?";
}

RivalResult cholesky_qr(const DenseMatrix& A) {
    check_shape(A);
    const std::size_t m = A.rows(), n = A.cols();
    RivalResult r;
    r.method = Method::cholesky_qr;
    FlopCounter& fc = r.flops;

    // lower triangle of A^T A
    DenseMatrix W(n, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = j; i < n; ++i) W(i, j) = dot(A.col(i), A.col(j), m, fc);

    // right-looking column Cholesky, W = L L^T in place
    for (std::size_t k = 0; k < n; ++k) {
        if (!(W(k, k) > 0))
            throw NumericError("Cholesky breakdown: non-positive pivot at column " + std::to_string(k) +
                               " (A^T A is not numerically positive definite)");
        const double d = std::sqrt(W(k, k));
        ++fc.divides;
        W(k, k) = d;
        for (std::size_t i = k + 1; i < n; ++i) W(i, k) /= d;
        fc.divides += n - k - 1;
        for (std::size_t j = k + 1; j < n; ++j)
            for (std::size_t i = j; i < n; ++i) {
                W(i, j) -= W(i, k) * W(j, k);
                ++fc.multiplies;
                ++fc.adds;
            }
    }

    r.R = DenseMatrix(n, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i <= j; ++i) r.R(i, j) = W(j, i);

    // Q = A R^{-1}, column by column
    r.Q = A;
    for (std::size_t j = 0; j < n; ++j) {
        double* q = r.Q.col(j);
        for (std::size_t k = 0; k < j; ++k) axpy(r.R(k, j), r.Q.col(k), q, m, fc);
        for (std::size_t i = 0; i < m; ++i) q[i] /= r.R(j, j);
        fc.divides += m;
    }
    return r;
}

RivalResult mgs(const DenseMatrix& A, Looking looking) {
    check_shape(A);
    const std::size_t m = A.rows(), n = A.cols();
    RivalResult r;
    r.method = looking == Looking::right ? Method::mgs_r : Method::mgs_l;
    r.Q = DenseMatrix(m, n);
    r.R = DenseMatrix(n, n);
    FlopCounter& fc = r.flops;
    if (looking == Looking::right) {
        DenseMatrix V = A;
        for (std::size_t k = 0; k < n; ++k) {
            normalize(V.col(k), m, k, r.Q, r.R, fc);
            for (std::size_t j = k + 1; j < n; ++j) {
                r.R(k, j) = dot(r.Q.col(k), V.col(j), m, fc);
                axpy(r.R(k, j), r.Q.col(k), V.col(j), m, fc);
            }
        }
    } else {
        std::vector<double> v(m);
        for (std::size_t k = 0; k < n; ++k) {
            std::copy_n(A.col(k), m, v.data());
            for (std::size_t j = 0; j < k; ++j) {
                r.R(j, k) = dot(r.Q.col(j), v.data(), m, fc);
                axpy(r.R(j, k), r.Q.col(j), v.data(), m, fc);
            }
            normalize(v.data(), m, k, r.Q, r.R, fc);
        }
    }
    return r;
}

RivalResult cgs(const DenseMatrix& A, Looking looking) {
    check_shape(A);
    const std::size_t m = A.rows(), n = A.cols();
    RivalResult r;
    r.method = looking == Looking::right ? Method::cgs_r : Method::cgs_l;
    r.Q = DenseMatrix(m, n);
    r.R = DenseMatrix(n, n);
    FlopCounter& fc = r.flops;
    if (looking == Looking::right) {
        // projections use the original columns, updates go to the copy
        DenseMatrix V = A;
        for (std::size_t k = 0; k < n; ++k) {
            normalize(V.col(k), m, k, r.Q, r.R, fc);
            for (std::size_t j = k + 1; j < n; ++j) r.R(k, j) = dot(r.Q.col(k), A.col(j), m, fc);
            for (std::size_t j = k + 1; j < n; ++j) axpy(r.R(k, j), r.Q.col(k), V.col(j), m, fc);
        }
    } else {
        std::vector<double> v(m);
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t j = 0; j < k; ++j) r.R(j, k) = dot(r.Q.col(j), A.col(k), m, fc);
            std::copy_n(A.col(k), m, v.data());
            for (std::size_t j = 0; j < k; ++j) axpy(r.R(j, k), r.Q.col(j), v.data(), m, fc);
            normalize(v.data(), m, k, r.Q, r.R, fc);
        }
    }
    return r;
}

RivalResult cgs2(const DenseMatrix& A) {
    check_shape(A);
    const std::size_t m = A.rows(), n = A.cols();
    RivalResult r;
    r.method = Method::cgs2;
    r.Q = DenseMatrix(m, n);
    r.R = DenseMatrix(n, n);
    FlopCounter& fc = r.flops;
    std::vector<double> v(m), s(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::copy_n(A.col(k), m, v.data());
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < k; ++j) s[j] = dot(r.Q.col(j), v.data(), m, fc);
            for (std::size_t j = 0; j < k; ++j) {
                axpy(s[j], r.Q.col(j), v.data(), m, fc);
                r.R(j, k) += s[j];
            }
            fc.adds += k;
        }
        normalize(v.data(), m, k, r.Q, r.R, fc);
    }
    return r;
}

RivalResult run_rival(const DenseMatrix& A, Method m) {
    switch (m) {
        case Method::cholesky_qr: return cholesky_qr(A);
        case Method::cgs_l: return cgs(A, Looking::left);
        case Method::cgs_r: return cgs(A, Looking::right);
        case Method::mgs_l: return mgs(A, Looking::left);
        case Method::mgs_r: return mgs(A, Looking::right);
        case Method::cgs2: return cgs2(A);
    }
    throw ShapeError("unknown method");
}

}  // namespace ca
