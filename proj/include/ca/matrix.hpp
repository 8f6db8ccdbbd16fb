#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ca {

// Thrown on bad shapes or arguments. The CLI maps it to exit code 2.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// File-system and format failures. Exit code 4.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numeric precondition failures (breakdown, rank loss). Exit code 3.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Loop order for column-oriented factorizations.
enum class Looking { right, left };

class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> colmajor);

    static DenseMatrix identity(std::size_t n);
    // first n columns of the m x m identity
    static DenseMatrix eye(std::size_t m, std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

    double* col(std::size_t j) { return data_.data() + j * rows_; }
    const double* col(std::size_t j) const { return data_.data() + j * rows_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    DenseMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
    void set_block(std::size_t r0, std::size_t c0, const DenseMatrix& B);

    DenseMatrix transpose() const;

    bool operator==(const DenseMatrix& o) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix multiply(const DenseMatrix& A, const DenseMatrix& B);
// A^T B without forming the transpose
DenseMatrix multiply_tn(const DenseMatrix& A, const DenseMatrix& B);
DenseMatrix subtract(const DenseMatrix& A, const DenseMatrix& B);
DenseMatrix vstack(const std::vector<DenseMatrix>& parts);

double frobenius_norm(const DenseMatrix& A);
double max_abs(const DenseMatrix& A);
double max_abs_diff(const DenseMatrix& A, const DenseMatrix& B);
bool is_upper_triangular(const DenseMatrix& A);

// Flip row signs of R so its diagonal is >= 0. Returns the sign vector applied.
std::vector<double> normalize_signs(DenseMatrix& R);
DenseMatrix sign_normalized(DenseMatrix R);
// Matching column flips for an explicit Q.
void apply_column_signs(DenseMatrix& Q, const std::vector<double>& signs);

// Symmetric eigenvalues by cyclic Jacobi. Input must be square and symmetric.
std::vector<double> symmetric_eigenvalues(DenseMatrix S, double tol = 1e-15, int max_sweeps = 100);

struct OrthogonalityReport {
    double deviation = 0;
    double reconstruction_error = 0;
};

// ||I - Q^T Q||_2
double orthogonality_deviation(const DenseMatrix& Q);
// ||I - Q^T Q||_F, used as a cross-check
double orthogonality_deviation_fro(const DenseMatrix& Q);
// ||A - QR||_F / ||A||_F, or the absolute value when A == 0
double reconstruction_error(const DenseMatrix& A, const DenseMatrix& Q, const DenseMatrix& R);

// Seeded standard normals: mt19937_64 feeding a Box-Muller transform.
// std::normal_distribution is avoided because it differs between standard libraries.
class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed) : eng_(seed) {}
    double next();
    static constexpr const char* name = "mt19937_64+box-muller";

private:
    std::mt19937_64 eng_;
    double spare_ = 0;
    bool has_spare_ = false;
};

DenseMatrix gaussian(std::size_t m, std::size_t n, std::uint64_t seed);
// A = U diag(sigma) V^T with sigma log-spaced from 1 down to 1/kappa.
DenseMatrix generate_conditioned(std::size_t m, std::size_t n, double kappa, std::uint64_t seed);

// CSV: first line "m,n", then m rows of n values with round-trip precision.
void write_csv(std::ostream& os, const DenseMatrix& A);
DenseMatrix read_csv(std::istream& is);
void save_csv(const std::string& path, const DenseMatrix& A);
DenseMatrix load_csv(const std::string& path);

}  // namespace ca
