#include "ca/matrix.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace ca {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
    if (rows == 0 || cols == 0) throw ShapeError("matrix dimensions must be positive");
    data_.assign(rows * cols, 0.0);
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> colmajor)
    : rows_(rows), cols_(cols), data_(std::move(colmajor)) {
    if (rows == 0 || cols == 0) throw ShapeError("matrix dimensions must be positive");
    if (data_.size() != rows * cols) throw ShapeError("data length does not match rows*cols");
}

DenseMatrix DenseMatrix::identity(std::size_t n) { return eye(n, n); }

DenseMatrix DenseMatrix::eye(std::size_t m, std::size_t n) {
    DenseMatrix I(m, n);
    for (std::size_t i = 0; i < std::min(m, n); ++i) I(i, i) = 1.0;
    return I;
}

DenseMatrix DenseMatrix::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_) throw ShapeError("block out of range");
    DenseMatrix B(nr, nc);
    for (std::size_t j = 0; j < nc; ++j)
        std::copy_n(col(c0 + j) + r0, nr, B.col(j));
    return B;
}

void DenseMatrix::set_block(std::size_t r0, std::size_t c0, const DenseMatrix& B) {
    if (r0 + B.rows() > rows_ || c0 + B.cols() > cols_) throw ShapeError("set_block out of range");
    for (std::size_t j = 0; j < B.cols(); ++j)
        std::copy_n(B.col(j), B.rows(), col(c0 + j) + r0);
}

DenseMatrix DenseMatrix::transpose() const {
    DenseMatrix T(cols_, rows_);
    for (std::size_t j = 0; j < cols_; ++j)
        for (std::size_t i = 0; i < rows_; ++i) T(j, i) = (*this)(i, j);
    return T;
}

DenseMatrix multiply(const DenseMatrix& A, const DenseMatrix& B) {
    if (A.cols() != B.rows()) throw ShapeError("multiply: inner dimensions differ");
    DenseMatrix C(A.rows(), B.cols());
    for (std::size_t j = 0; j < B.cols(); ++j)
        for (std::size_t k = 0; k < A.cols(); ++k) {
            double b = B(k, j);
            if (b == 0) continue;
            const double* a = A.col(k);
            double* c = C.col(j);
            for (std::size_t i = 0; i < A.rows(); ++i) c[i] += a[i] * b;
        }
    return C;
}

DenseMatrix multiply_tn(const DenseMatrix& A, const DenseMatrix& B) {
    if (A.rows() != B.rows()) throw ShapeError("multiply_tn: row counts differ");
    DenseMatrix C(A.cols(), B.cols());
    for (std::size_t j = 0; j < B.cols(); ++j)
        for (std::size_t i = 0; i < A.cols(); ++i) {
            double s = 0;
            const double* a = A.col(i);
            const double* b = B.col(j);
            for (std::size_t k = 0; k < A.rows(); ++k) s += a[k] * b[k];
            C(i, j) = s;
        }
    return C;
}

DenseMatrix subtract(const DenseMatrix& A, const DenseMatrix& B) {
    if (A.rows() != B.rows() || A.cols() != B.cols()) throw ShapeError("subtract: shapes differ");
    DenseMatrix C = A;
    for (std::size_t k = 0; k < C.data().size(); ++k) C.data()[k] -= B.data()[k];
    return C;
}

DenseMatrix vstack(const std::vector<DenseMatrix>& parts) {
    if (parts.empty()) throw ShapeError("vstack of nothing");
    std::size_t rows = 0, cols = parts[0].cols();
    for (auto& p : parts) {
        if (p.cols() != cols) throw ShapeError("vstack: column counts differ");
        rows += p.rows();
    }
    DenseMatrix S(rows, cols);
    std::size_t r = 0;
    for (auto& p : parts) {
        S.set_block(r, 0, p);
        r += p.rows();
    }
    return S;
}

double frobenius_norm(const DenseMatrix& A) {
    // scaled sum of squares, same idea as LAPACK's dnrm2
    double scale = 0, ssq = 1;
    for (double x : A.data()) {
        if (x == 0) continue;
        double ax = std::abs(x);
        if (scale < ax) {
            ssq = 1 + ssq * (scale / ax) * (scale / ax);
            scale = ax;
        } else {
            ssq += (ax / scale) * (ax / scale);
        }
    }
    return scale * std::sqrt(ssq);
}

double max_abs(const DenseMatrix& A) {
    double m = 0;
    for (double x : A.data()) m = std::max(m, std::abs(x));
    return m;
}

double max_abs_diff(const DenseMatrix& A, const DenseMatrix& B) {
    if (A.rows() != B.rows() || A.cols() != B.cols()) throw ShapeError("max_abs_diff: shapes differ");
    double m = 0;
    for (std::size_t k = 0; k < A.data().size(); ++k) m = std::max(m, std::abs(A.data()[k] - B.data()[k]));
    return m;
}

bool is_upper_triangular(const DenseMatrix& A) {
    for (std::size_t j = 0; j < A.cols(); ++j)
        for (std::size_t i = j + 1; i < A.rows(); ++i)
            if (A(i, j) != 0) return false;
    return true;
}

std::vector<double> normalize_signs(DenseMatrix& R) {
    std::vector<double> s(R.rows(), 1.0);
    for (std::size_t i = 0; i < std::min(R.rows(), R.cols()); ++i) {
        if (R(i, i) < 0) {
            s[i] = -1.0;
            for (std::size_t j = 0; j < R.cols(); ++j) R(i, j) = -R(i, j);
        }
    }
    return s;
}

DenseMatrix sign_normalized(DenseMatrix R) {
    normalize_signs(R);
    return R;
}

void apply_column_signs(DenseMatrix& Q, const std::vector<double>& signs) {
    for (std::size_t j = 0; j < std::min(Q.cols(), signs.size()); ++j)
        if (signs[j] < 0)
            for (std::size_t i = 0; i < Q.rows(); ++i) Q(i, j) = -Q(i, j);
}

std::vector<double> symmetric_eigenvalues(DenseMatrix S, double tol, int max_sweeps) {
    const std::size_t n = S.rows();
    if (S.cols() != n) throw ShapeError("symmetric_eigenvalues: matrix not square");
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0, diag = 0;
        for (std::size_t j = 0; j < n; ++j) {
            diag += S(j, j) * S(j, j);
            for (std::size_t i = 0; i < j; ++i) off += 2 * S(i, j) * S(i, j);
        }
        if (off <= tol * tol * (diag + off) || off == 0) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = S(p, q);
                if (apq == 0) continue;
                double theta = (S(q, q) - S(p, p)) / (2 * apq);
                double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1));
                double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double skp = S(k, p), skq = S(k, q);
                    S(k, p) = c * skp - s * skq;
                    S(k, q) = s * skp + c * skq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double spk = S(p, k), sqk = S(q, k);
                    S(p, k) = c * spk - s * sqk;
                    S(q, k) = s * spk + c * sqk;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = S(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

namespace {
DenseMatrix gram_deviation(const DenseMatrix& Q) {
    if (Q.rows() < Q.cols()) throw ShapeError("orthogonality_deviation: Q must have rows >= cols");
    DenseMatrix G = multiply_tn(Q, Q);
    for (std::size_t k = 0; k < G.data().size(); ++k) G.data()[k] = -G.data()[k];
    for (std::size_t i = 0; i < G.rows(); ++i) G(i, i) += 1.0;
    // symmetrize away rounding asymmetry from the two dot products
    for (std::size_t j = 0; j < G.cols(); ++j)
        for (std::size_t i = 0; i < j; ++i) G(i, j) = G(j, i) = 0.5 * (G(i, j) + G(j, i));
    return G;
}
}  // namespace

double orthogonality_deviation(const DenseMatrix& Q) {
    auto ev = symmetric_eigenvalues(gram_deviation(Q));
    return std::max(std::abs(ev.front()), std::abs(ev.back()));
}

double orthogonality_deviation_fro(const DenseMatrix& Q) { return frobenius_norm(gram_deviation(Q)); }

double reconstruction_error(const DenseMatrix& A, const DenseMatrix& Q, const DenseMatrix& R) {
    if (Q.rows() != A.rows() || Q.cols() != R.rows() || R.cols() != A.cols() || R.rows() != R.cols())
        throw ShapeError("reconstruction_error: shapes do not conform");
    double num = frobenius_norm(subtract(A, multiply(Q, R)));
    double den = frobenius_norm(A);
    return den == 0 ? num : num / den;
}

double NormalSource::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    auto unit = [this] { return static_cast<double>(eng_() >> 11) * 0x1p-53; };
    double u1;
    do u1 = unit(); while (u1 == 0.0);
    double u2 = unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
}

DenseMatrix gaussian(std::size_t m, std::size_t n, std::uint64_t seed) {
    NormalSource g(seed);
    DenseMatrix A(m, n);
    for (double& x : A.data()) x = g.next();
    return A;
}

namespace {
// Orthonormalize columns in place, two Gram-Schmidt passes per column.
void orthonormalize(DenseMatrix& U) {
    for (std::size_t k = 0; k < U.cols(); ++k) {
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t j = 0; j < k; ++j) {
                double d = 0;
                for (std::size_t i = 0; i < U.rows(); ++i) d += U(i, j) * U(i, k);
                for (std::size_t i = 0; i < U.rows(); ++i) U(i, k) -= d * U(i, j);
            }
        double nrm = 0;
        for (std::size_t i = 0; i < U.rows(); ++i) nrm += U(i, k) * U(i, k);
        nrm = std::sqrt(nrm);
        if (nrm == 0) throw NumericError("orthonormalize: dependent random columns");
        for (std::size_t i = 0; i < U.rows(); ++i) U(i, k) /= nrm;
    }
}
}  // namespace

DenseMatrix generate_conditioned(std::size_t m, std::size_t n, double kappa, std::uint64_t seed) {
    if (n == 0 || m < n) throw ShapeError("generate_conditioned: need m >= n >= 1");
    if (!(kappa >= 1)) throw ShapeError("generate_conditioned: kappa must be >= 1");
    DenseMatrix U = gaussian(m, n, seed);
    DenseMatrix V = gaussian(n, n, seed ^ 0x9e3779b97f4a7c15ULL);
    orthonormalize(U);
    orthonormalize(V);
    std::vector<double> sigma(n, 1.0);
    for (std::size_t i = 1; i < n; ++i)
        sigma[i] = std::pow(kappa, -static_cast<double>(i) / static_cast<double>(n - 1));
    if (n > 1) sigma[n - 1] = 1.0 / kappa;
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i) U(i, j) *= sigma[j];
    return multiply(U, V.transpose());
}

void write_csv(std::ostream& os, const DenseMatrix& A) {
    os << A.rows() << ',' << A.cols() << '\n';
    char buf[64];
    for (std::size_t i = 0; i < A.rows(); ++i) {
        for (std::size_t j = 0; j < A.cols(); ++j) {
            auto res = std::to_chars(buf, buf + sizeof buf, A(i, j));
            if (j) os << ',';
            os.write(buf, res.ptr - buf);
        }
        os << '\n';
    }
}

DenseMatrix read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ShapeError("csv: missing header");
    std::size_t m = 0, n = 0;
    {
        auto comma = line.find(',');
        if (comma == std::string::npos) throw ShapeError("csv: header must be m,n");
        m = std::stoull(line.substr(0, comma));
        n = std::stoull(line.substr(comma + 1));
    }
    DenseMatrix A(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        if (!std::getline(is, line)) throw ShapeError("csv: too few rows");
        const char* p = line.data();
        const char* end = p + line.size();
        for (std::size_t j = 0; j < n; ++j) {
            double v;
            auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc()) throw ShapeError("csv: bad number in row " + std::to_string(i));
            A(i, j) = v;
            p = res.ptr;
            if (j + 1 < n) {
                if (p == end || *p != ',') throw ShapeError("csv: too few columns in row " + std::to_string(i));
                ++p;
            }
        }
    }
    return A;
}

void save_csv(const std::string& path, const DenseMatrix& A) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    write_csv(f, A);
}

DenseMatrix load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    return read_csv(f);
}

}  // namespace ca
