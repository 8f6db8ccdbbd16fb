#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ca/cost.hpp"

namespace ca {

enum class Algorithm {
    tsqr_par,
    tsqr_seq,
    caqr_par,
    caqr_seq,
    pdgeqrf,
    pdgeqrf_square,
    pfdgeqrf,
    cholesky_qr_par,
    cholesky_qr_seq,
    mgs_par,
    mgs_seq_left,
    cgs_seq_left,
};

std::string algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& s);

// Unused fields are ignored. For the sequential algorithms that have both a
// blocked form and a form in terms of fast memory, P (tsqr_seq), Pr/Pc
// (caqr_seq) or c (pfdgeqrf) selects the blocked form when nonzero and W is
// used otherwise.
struct ModelParams {
    double m = 0, n = 0;
    std::size_t P = 0;
    double W = 0;
    double b = 1;
    std::size_t Pr = 0, Pc = 0;
    double c = 0;  // current panel width of the out-of-DRAM left-looking QR
};

struct ModelPrediction {
    Algorithm algorithm = Algorithm::tsqr_par;
    ModelParams params;
    bool feasible = true;
    double messages = 0, words = 0, flops = 0, divides = 0;
    double latency = 0, bandwidth = 0, compute = 0;

    double time() const { return latency + bandwidth + compute; }
    double frac_latency() const { return latency / time(); }
    double frac_bandwidth() const { return bandwidth / time(); }
    double frac_compute() const { return 1.0 - frac_latency() - frac_bandwidth(); }
};

// Throws ShapeError naming the violated inequality.
ModelPrediction evaluate(Algorithm a, const ModelParams& p, const MachineModel& machine);

// Square matrix on a square grid with lower-order terms dropped.
ModelPrediction caqr_par_square(double n, std::size_t P, double b, const MachineModel& machine);

// Block sizes tried by the optimizer: 1, 5, 10, ..., 50, 60, ..., 200, capped at limit.
std::vector<double> block_size_grid(double limit);

// Exhaustive search over power-of-two grids and block_size_grid for
// caqr_par or pdgeqrf. Ties go to smaller b, then smaller Pr. Infeasible
// (feasible == false) when m*n/P exceeds the per-processor memory.
ModelPrediction optimize(Algorithm a, double m, double n, std::size_t P, const MachineModel& machine);

struct SpeedupCell {
    double n = 0;
    std::size_t P = 0;
    bool feasible = false;
    ModelPrediction pdgeqrf, caqr;
    double ratio() const { return pdgeqrf.time() / caqr.time(); }
};

struct BestRow {
    double n = 0;
    bool feasible = false;
    std::size_t P = 0;  // where PDGEQRF is fastest
    double ratio = 0;
};

struct SpeedupTable {
    std::string machine;
    std::vector<SpeedupCell> cells;  // sorted by (n, P)
    std::vector<BestRow> best;       // one per n

    const SpeedupCell& at(double n, std::size_t P) const;
};

SpeedupTable speedup_table(const MachineModel& machine, const std::vector<double>& n_grid,
                           const std::vector<std::size_t>& P_grid);

// Default sweep ranges for the named machines: log10 n in half steps and
// every power of two up to P_max.
std::vector<double> default_n_grid(const MachineModel& machine);
std::vector<std::size_t> default_P_grid(const MachineModel& machine);

extern const char* const prediction_csv_header;
std::string prediction_csv_row(const std::string& machine, const ModelPrediction& p);

}  // namespace ca
