#pragma once

#include <string>

#include "ca/householder.hpp"
#include "ca/matrix.hpp"

namespace ca {

enum class Method { cholesky_qr, cgs_l, cgs_r, mgs_l, mgs_r, cgs2 };

std::string method_name(Method m);

struct RivalResult {
    DenseMatrix Q;  // explicit, m x n
    DenseMatrix R;  // n x n upper triangular
    Method method = Method::mgs_r;
    FlopCounter flops;
};

// R = L^T from the Cholesky factor of A^T A, Q = A L^{-T}.
// Throws NumericError naming the column whose pivot is not positive.
RivalResult cholesky_qr(const DenseMatrix& A);
// Throw NumericError when a column norm vanishes.
RivalResult mgs(const DenseMatrix& A, Looking looking);
RivalResult cgs(const DenseMatrix& A, Looking looking);
// Left-looking CGS with a second, unconditional orthogonalization pass.
RivalResult cgs2(const DenseMatrix& A);

RivalResult run_rival(const DenseMatrix& A, Method m);

}  // namespace ca
