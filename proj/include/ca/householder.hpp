#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ca/matrix.hpp"

namespace ca {

// One multiply and one add per fused multiply-add. Square roots are charged
// as divides since both run at the slower gamma_d rate.
struct FlopCounter {
    std::uint64_t multiplies = 0;
    std::uint64_t adds = 0;
    std::uint64_t divides = 0;

    std::uint64_t mul_add() const { return multiplies + adds; }
    FlopCounter& operator+=(const FlopCounter& o) {
        multiplies += o.multiplies;
        adds += o.adds;
        divides += o.divides;
        return *this;
    }
    bool operator==(const FlopCounter&) const = default;
};

enum class Sparsity { dense, stacked_triangles, triangle_plus_dense };

// Y holds the Householder vectors column by column; the pivot entry of each
// column is stored as an explicit 1 and everything outside the structural
// pattern is zero. R is always n x n (zero rows pad a wide dense factor).
struct HouseholderFactor {
    DenseMatrix Y;
    std::vector<double> tau;
    DenseMatrix R;
    Sparsity sparsity = Sparsity::dense;
    std::size_t q = 1;  // block count for stacked_triangles

    std::size_t rows() const { return Y.rows(); }
    std::size_t cols() const { return R.cols(); }
    std::size_t reflectors() const { return tau.size(); }
    // Row indices that reflector j may touch, pivot first.
    std::vector<std::size_t> pattern(std::size_t j) const;
};

struct Reflector {
    std::vector<double> v;  // v[0] == 1
    double tau = 0;
    double beta = 0;  // the surviving leading entry
};

Reflector house(const std::vector<double>& w, FlopCounter* counter = nullptr);

// Records every (row, col) a structured kernel reads or writes.
struct AccessMap {
    std::size_t rows = 0, cols = 0;
    std::vector<char> touched;
    void mark(std::size_t i, std::size_t j) { touched[j * rows + i] = 1; }
};

HouseholderFactor qr_unblocked(const DenseMatrix& A, FlopCounter& counter);
// Like qr_unblocked but accepts rows < cols; only min(rows, cols) reflectors.
HouseholderFactor qr_dense_any(const DenseMatrix& A, FlopCounter& counter);
HouseholderFactor qr_stacked_triangles(const std::vector<DenseMatrix>& blocks, FlopCounter& counter,
                                       AccessMap* access = nullptr);
HouseholderFactor qr_triangle_plus_dense(const DenseMatrix& R_top, const DenseMatrix& B, FlopCounter& counter,
                                         AccessMap* access = nullptr);

// T with H_1 ... H_k = I + Y T Y^T.
DenseMatrix form_T(const HouseholderFactor& f, FlopCounter* counter = nullptr);

// Q*C or Q^T*C, one reflector at a time over its structural rows.
DenseMatrix apply_q(const HouseholderFactor& f, DenseMatrix C, bool transpose, FlopCounter& counter);
// Same arithmetic with the columns of C split across OpenMP threads.
// Results are bit-identical to apply_q.
DenseMatrix apply_q_omp(const HouseholderFactor& f, DenseMatrix C, bool transpose, FlopCounter& counter);
// Q*C or Q^T*C through the compact form I + Y T Y^T.
DenseMatrix apply_compact(const HouseholderFactor& f, const DenseMatrix& T, DenseMatrix C, bool transpose,
                          FlopCounter& counter);

// Y1 = lower block of a two-block stacked factor, i.e. Y = [I; Y1].
DenseMatrix lower_block(const HouseholderFactor& pair);

// Q^T [C0; C1] for the factor of two stacked n x n triangles:
//   D = C0 + Y1^T C1,  W = T^T D,  C0' = C0 - W,  C1' = C1 - Y1 W
// where T is the compact factor in the I - Y T Y^T convention.
std::pair<DenseMatrix, DenseMatrix> update_pair(const DenseMatrix& Y1, const std::vector<double>& tau,
                                                DenseMatrix C0, DenseMatrix C1, FlopCounter& counter);

// Rebuild factors from spilled pieces. The pivot entries are reset to 1.
// A dense factor from its lower trapezoid (rows >= cols):
HouseholderFactor factor_from_trapezoid(DenseMatrix Y, std::vector<double> tau);
// A triangle_plus_dense factor from the dense rows below the n x n triangle:
HouseholderFactor factor_from_lower_block(const DenseMatrix& Ylow, std::vector<double> tau);

// Closed-form operation count sum_j [4(n-j)k_j + 4k_j + (n-j)], 1-based j.
double factor_flop_formula(const std::vector<double>& k);

}  // namespace ca
