#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "ca/cost.hpp"
#include "ca/householder.hpp"
#include "ca/store.hpp"

namespace ca {

// A factor acting on selected rows of an m-row matrix. Rows marked
// `virtual_row` are zero padding: they read as zero and are never written.
struct PlacedFactor {
    static constexpr std::size_t virtual_row = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> rows;
    HouseholderFactor f;
};

// Q = F_0 F_1 ... F_{k-1} as a sequence of placed factors.
struct ImplicitQ {
    std::size_t m = 0, n = 0;
    std::vector<PlacedFactor> steps;

    DenseMatrix apply(DenseMatrix C, bool transpose) const;
    // First n columns of Q.
    DenseMatrix thin_q() const;
};

struct GridLayout {
    std::size_t Pr = 1, Pc = 1, b = 1;
    std::size_t m = 0, n = 0;
    // Throws ShapeError naming the violated constraint.
    void check() const;
    std::size_t proc(std::size_t pr, std::size_t pc) const { return pr * Pc + pc; }
};

struct CaqrOptions {
    // Charge the row broadcasts as 2 messages per panel instead of 2 log2(Pc).
    bool pipelined_broadcast = false;
};

struct CaqrResult {
    DenseMatrix R;
    ImplicitQ q;
    CostReport cost;
};

// Right-looking CAQR on a Pr x Pc grid with b x b blocks dealt out block-cyclically.
CaqrResult caqr_parallel_sim(const DenseMatrix& A, const GridLayout& layout, const MachineModel& machine,
                             CaqrOptions opts = {});

// Critical-path message count of the schedule above.
std::size_t caqr_parallel_messages(std::size_t n, std::size_t b, std::size_t Pr, std::size_t Pc);

// ---- sequential, out of core ----

struct SeqCaqrPlan {
    std::size_t b = 0;   // square tile edge
    std::size_t Pr = 0;  // tile rows
    std::size_t Pc = 0;  // tile columns
};

// b <= floor(sqrt(W/4)), shrunk so that ceil(n/b) tiles split n evenly.
SeqCaqrPlan seq_caqr_plan(std::size_t m, std::size_t n, std::size_t W);

struct SeqCaqrResult {
    DenseMatrix R;
    BlockStore q;  // Householder tiles, tau trailers
    CostReport cost;
    std::size_t peak_words = 0;
};

// A must be a 2-D store with square tiles (block_rows == block_cols).
SeqCaqrResult caqr_sequential(BlockStore& A, std::size_t W, const MachineModel& machine,
                              Looking looking = Looking::right, const Backend& spill = Backend::memory());

// Reads the spilled tiles back without logging.
ImplicitQ seq_caqr_implicit_q(BlockStore& q);

// Leading terms of the optimized sequential model.
double seq_caqr_model_words(std::size_t m, std::size_t n, std::size_t W);
double seq_caqr_model_messages(std::size_t m, std::size_t n, std::size_t W);
// Lower bound on words moved by any sequential QR of this shape.
double seq_qr_words_lower_bound(std::size_t m, std::size_t n, std::size_t W);

}  // namespace ca
