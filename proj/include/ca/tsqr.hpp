#pragma once

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "ca/cost.hpp"
#include "ca/householder.hpp"
#include "ca/store.hpp"
#include "ca/tree.hpp"

namespace ca {

// Implicit Q of a tree reduction. Leaf p owns rows [row_offset[p], row_offset[p+1]).
struct TreeQ {
    std::vector<HouseholderFactor> leaf_factors;
    std::map<std::pair<std::size_t, std::size_t>, HouseholderFactor> node_factors;  // (level, survivor)
    ReductionTree tree;
    std::vector<std::size_t> row_offset;
    std::size_t m = 0, n = 0;
};

struct TsqrOptions {
    // Leave R on every participant. Doubles the messages of each step; the
    // numerics are unchanged.
    bool all_reduce = false;
};

struct TsqrResult {
    TreeQ q;
    DenseMatrix R;
    CostReport cost;
};

struct ApplyResult {
    DenseMatrix C;
    CostReport cost;
};

// Row split used by tsqr_factor: floor(m/P) each, the first m mod P leaves get one more.
std::vector<std::size_t> leaf_offsets(std::size_t m, std::size_t P);

TsqrResult tsqr_factor(const DenseMatrix& A, std::size_t P, const ReductionTree& tree, const MachineModel& machine,
                       TsqrOptions opts = {});

// transpose: Q^T C, leaves first then up the tree. Otherwise Q C, root first.
// C has m rows, or n rows for the forward product with the thin Q (C is then
// zero-extended below and the result has m rows).
ApplyResult tsqr_apply(const TreeQ& q, const DenseMatrix& C, bool transpose, const MachineModel& machine);

// ---- out of core, flat tree over a block store ----

struct OocPlan {
    std::size_t P = 0;
    std::size_t block_rows = 0;
};

// Smallest fast memory that can run the out-of-core factorization.
std::size_t tsqr_ooc_min_words(std::size_t n);
// P = ceil(mn / (W - n(n+1)/2)), block_rows = ceil(m/P). P is bumped while a
// block plus R would not fit, which only happens through the rounding of block_rows.
OocPlan tsqr_ooc_plan(std::size_t m, std::size_t n, std::size_t W);

// Spilled Householder vectors: one tile per row block, tau in the trailer.
struct OocFactors {
    BlockStore q;
    std::size_t m = 0, n = 0;
};

struct OocTsqrResult {
    OocFactors factors;
    DenseMatrix R;
    CostReport cost;
    std::size_t peak_words = 0;
};

OocTsqrResult tsqr_factor_ooc(BlockStore& A, std::size_t W, const MachineModel& machine,
                              const Backend& spill = Backend::memory());

// Closed-form transfer counts of the schedule above for P blocks of block_rows rows.
TransferCounters tsqr_ooc_model_counts(std::size_t m_stored, std::size_t n, std::size_t P);
TransferCounters tsqr_apply_ooc_model_counts(std::size_t m_stored, std::size_t n, std::size_t c, std::size_t P);

struct OocApplyResult {
    CostReport cost;
    std::size_t peak_words = 0;
};

// Overwrites C (same block_rows as the factors) with Q^T C or Q C.
OocApplyResult tsqr_apply_ooc(OocFactors& f, BlockStore& C, bool transpose, std::size_t W,
                              const MachineModel& machine);

}  // namespace ca
