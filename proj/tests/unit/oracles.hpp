#pragma once

// Independent reference computations used only by tests. Nothing here calls
// into the library's factorization kernels.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ca/matrix.hpp"

namespace oracle {

// One-sided Jacobi SVD; returns singular values sorted descending.
inline std::vector<double> singular_values(ca::DenseMatrix A) {
    const std::size_t m = A.rows(), n = A.cols();
    for (int sweep = 0; sweep < 80; ++sweep) {
        double off = 0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double a = 0, b = 0, g = 0;
                for (std::size_t i = 0; i < m; ++i) {
                    a += A(i, p) * A(i, p);
                    b += A(i, q) * A(i, q);
                    g += A(i, p) * A(i, q);
                }
                if (g == 0) continue;
                off = std::max(off, std::abs(g) / std::sqrt(a * b));
                double zeta = (b - a) / (2 * g);
                double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1 + zeta * zeta));
                double c = 1 / std::sqrt(1 + t * t), s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    double x = A(i, p), y = A(i, q);
                    A(i, p) = c * x - s * y;
                    A(i, q) = s * x + c * y;
                }
            }
        }
        if (off < 1e-15) break;
    }
    std::vector<double> s(n);
    for (std::size_t j = 0; j < n; ++j) {
        double t = 0;
        for (std::size_t i = 0; i < m; ++i) t += A(i, j) * A(i, j);
        s[j] = std::sqrt(t);
    }
    std::sort(s.rbegin(), s.rend());
    return s;
}

// Product H_1 H_2 ... H_k of reflectors H_j = I - tau_j v_j v_j^T, formed
// by explicit dense matrix multiplication. Column j of V is v_j in full.
inline ca::DenseMatrix reflector_product(const ca::DenseMatrix& V, const std::vector<double>& tau) {
    const std::size_t m = V.rows();
    ca::DenseMatrix Q = ca::DenseMatrix::identity(m);
    for (std::size_t j = 0; j < tau.size(); ++j) {
        ca::DenseMatrix H = ca::DenseMatrix::identity(m);
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < m; ++c) H(r, c) -= tau[j] * V(r, j) * V(c, j);
        Q = ca::multiply(Q, H);
    }
    return Q;
}

// Modified Gram-Schmidt with a second pass; a QR oracle that shares no
// code with the Householder kernels. Returns R with positive diagonal.
inline ca::DenseMatrix gram_schmidt_r(const ca::DenseMatrix& A) {
    const std::size_t m = A.rows(), n = A.cols();
    ca::DenseMatrix Q = A, R(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < k; ++j) {
                double d = 0;
                for (std::size_t i = 0; i < m; ++i) d += Q(i, j) * Q(i, k);
                R(j, k) += d;
                for (std::size_t i = 0; i < m; ++i) Q(i, k) -= d * Q(i, j);
            }
        }
        double nrm = 0;
        for (std::size_t i = 0; i < m; ++i) nrm += Q(i, k) * Q(i, k);
        nrm = std::sqrt(nrm);
        R(k, k) = nrm;
        for (std::size_t i = 0; i < m; ++i) Q(i, k) /= nrm;
    }
    return R;
}

inline ca::DenseMatrix random_upper(std::size_t n, std::uint64_t seed) {
    ca::DenseMatrix G = ca::gaussian(n, n, seed);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = j + 1; i < n; ++i) G(i, j) = 0;
    return G;
}

}  // namespace oracle
