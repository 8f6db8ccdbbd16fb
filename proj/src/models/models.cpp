#include "ca/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

namespace ca {

namespace {

double lg(double x) { return std::log2(x); }

bool power_of_two(std::size_t x) { return x && !(x & (x - 1)); }

void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeError("model constraint violated: " + what);
}

struct Row {
    Algorithm a;
    const char* name;
};

const Row names[] = {
    {Algorithm::tsqr_par, "tsqr_par"},
    {Algorithm::tsqr_seq, "tsqr_seq"},
    {Algorithm::caqr_par, "caqr_par"},
    {Algorithm::caqr_seq, "caqr_seq"},
    {Algorithm::pdgeqrf, "pdgeqrf"},
    {Algorithm::pdgeqrf_square, "pdgeqrf_square"},
    {Algorithm::pfdgeqrf, "pfdgeqrf"},
    {Algorithm::cholesky_qr_par, "cholesky_qr_par"},
    {Algorithm::cholesky_qr_seq, "cholesky_qr_seq"},
    {Algorithm::mgs_par, "mgs_par"},
    {Algorithm::mgs_seq_left, "mgs_seq_left"},
    {Algorithm::cgs_seq_left, "cgs_seq_left"},
};

void check_grid(const ModelParams& p) {
    require(p.Pr >= 1 && p.Pc >= 1 && p.Pr * p.Pc == p.P, "Pr*Pc = P");
    require(p.b >= 1, "b >= 1");
    require(p.b <= p.m / double(p.Pr), "b <= m/Pr");
    require(p.b <= p.n / double(p.Pc), "b <= n/Pc");
}

}  // namespace

std::string algorithm_name(Algorithm a) {
    for (const auto& r : names)
        if (r.a == a) return r.name;
    return "?";
}

Algorithm parse_algorithm(const std::string& s) {
    for (const auto& r : names)
        if (s == r.name) return r.a;
    throw ShapeError("unknown algorithm '" + s + "'");
}

ModelPrediction evaluate(Algorithm a, const ModelParams& p, const MachineModel& mm) {
    const double m = p.m, n = p.n, b = p.b;
    const double P = double(p.P), Pr = double(p.Pr), Pc = double(p.Pc);
    require(m >= n && n >= 1, "m >= n >= 1");

    ModelPrediction r;
    r.algorithm = a;
    r.params = p;
    switch (a) {
        case Algorithm::tsqr_par:
            require(p.P >= 1 && m / P >= n, "m/P >= n");
            r.messages = lg(P);
            r.words = n * (n + 1) / 2 * lg(P);
            r.flops = 2 * m * n * n / P - n * n * n / 3 + 2.0 / 3.0 * n * n * n * lg(P);
            break;
        case Algorithm::tsqr_seq:
            if (p.P > 0) {
                require(m / P >= n, "m/P >= n");
                r.messages = 2 * P;
                r.words = 2 * m * n + n * P - n * (n - 1) / 2;
            } else {
                const double room = p.W - n * (n + 1) / 2;
                require(room > 0, "W > n(n+1)/2");
                r.messages = 2 * m * n / room;
                r.words = 2 * m * n - n * (n + 1) / 2 + m * n * n / room;
            }
            r.flops = 2 * m * n * n - 2 * n * n * n / 3;
            break;
        case Algorithm::caqr_par:
            check_grid(p);
            r.flops = 2 * n * n * (3 * m - n) / (3 * P) + b * n * n / (2 * Pc) + 3 * b * n * (2 * m - n) / (2 * Pr) +
                      (4 * b * b * n / 3 + n * n * (3 * b + 5) / (2 * Pc)) * lg(Pr) - b * b * n;
            r.divides = (m * n - n * n / 2) / Pr + b * n / 2 * (lg(Pr) - 1);
            r.messages = 3 * n / b * lg(Pr) + 2 * n / b * lg(Pc);
            r.words = (n * n / Pc + b * n / 2) * lg(Pr) + ((m * n - n * n / 2) / Pr + 2 * n) * lg(Pc);
            break;
        case Algorithm::caqr_seq:
            r.flops = 2 * n * n * m - 2 * n * n * n / 3;
            if (p.Pr > 0 && p.Pc > 0) {
                require(m / Pr >= n / Pc, "m/Pr >= n/Pc");
                r.messages = 1.5 * Pr * Pc * (Pc - 1);
                r.words = 1.5 * m * n * (Pc + 4.0 / 3.0) - 0.5 * n * n * Pc;
            } else {
                require(p.W > 0, "W > 0");
                r.messages = 12 * m * n * n / std::pow(p.W, 1.5);
                r.words = 3 * m * n * n / std::sqrt(p.W);
            }
            break;
        case Algorithm::pdgeqrf:
            check_grid(p);
            r.flops = 2 * n * n / (3 * P) * (3 * m - n) + 3 * (b + 1) * n * (m - n / 2) / Pr + b * n * n / (2 * Pc) -
                      b * n * (b / 3 + 1.5);
            r.divides = (m * n - n * n / 2) / Pr;
            r.messages = 3 * n * (1 + 1 / b) * lg(Pr) + 2 * n / b * lg(Pc);
            r.words = (n * n / Pc + n * (b + 2)) * lg(Pr) + ((m * n - n * n / 2) / Pr + n * b / 2) * lg(Pc);
            break;
        case Algorithm::pdgeqrf_square:
            require(p.P >= 1 && b >= 1, "P >= 1, b >= 1");
            r.flops = 4.0 / 3.0 * n * n * n / P;
            r.messages = (1.5 + 2.5 / b) * n * lg(P);
            r.words = 0.75 * lg(P) * n * n / std::sqrt(P);
            break;
        case Algorithm::pfdgeqrf:
            r.flops = 2 * m * n * n - 2 * n * n * n / 3;
            if (p.c > 0) {
                const double c = p.c;
                require(b >= 1 && b <= c, "1 <= b <= c");
                r.messages = n / (2 * b * c) + 2 * n / c - n / (2 * b);
                r.words = (1.5 * m * n - 0.75 * n * n + 1.5 * n) + b * n / 4 - 13 * c * n / 12 +
                          (m * n * n / 2 - n * n * n / 6 + n * n / 2 - b * n * n / 4) / c;
            } else {
                require(p.W > 0, "W > 0");
                const double W = p.W;
                r.messages = 2 * m * n / W + m * n * n / (2 * W) - n / 2;
                r.words = 1.5 * m * n - 0.75 * n * n + m * n / W * (m * n / 2 - n * n / 6);
            }
            break;
        case Algorithm::cholesky_qr_par:
            require(p.P >= 1, "P >= 1");
            r.flops = 2 * m * n * n / P + n * n * n / 3;
            r.messages = lg(P);
            r.words = n * n / 2 * lg(P);
            break;
        case Algorithm::cholesky_qr_seq: {
            // fast memory holds two blocks: W = 2mn/P
            const double W = p.W > 0 ? p.W : (p.P > 0 ? 2 * m * n / P : 0);
            require(W > 0, "W > 0 or P >= 1");
            r.flops = 2 * m * n * n + n * n * n / 3;
            r.messages = 6 * m * n / W;
            r.words = 3 * m * n;
            break;
        }
        case Algorithm::mgs_par:
            require(p.P >= 1, "P >= 1");
            r.flops = 2 * m * n * n / P;
            r.messages = 2 * n * lg(P);
            r.words = n * n / 2 * lg(P);
            break;
        case Algorithm::mgs_seq_left:
        case Algorithm::cgs_seq_left: {
            const double d = 2 * p.W - n * (n + 1);
            require(d > 0, "W > n(n+1)/2");
            r.flops = 2 * m * n * n;
            r.messages = m * n * n / d;
            r.words = 1.5 * m * n + m * m * n * n / d;
            break;
        }
    }
    r.latency = mm.alpha * r.messages;
    r.bandwidth = mm.beta * r.words;
    r.compute = mm.gamma * r.flops + mm.gamma_d * r.divides;
    return r;
}

ModelPrediction caqr_par_square(double n, std::size_t P, double b, const MachineModel& mm) {
    require(P >= 1 && b >= 1, "P >= 1, b >= 1");
    const double sP = std::sqrt(double(P)), L = lg(double(P));
    ModelPrediction r;
    r.algorithm = Algorithm::caqr_par;
    r.params.m = r.params.n = n;
    r.params.P = P;
    r.params.b = b;
    r.params.Pr = r.params.Pc = static_cast<std::size_t>(std::lround(sP));
    r.flops = 4 * n * n * n / (3 * double(P)) + 3 * n * n * b / (4 * sP) * L;
    r.words = 3 * n * n / (4 * sP) * L;
    r.messages = 5 * n / (2 * b) * L;
    r.latency = mm.alpha * r.messages;
    r.bandwidth = mm.beta * r.words;
    r.compute = mm.gamma * r.flops;
    return r;
}

std::vector<double> block_size_grid(double limit) {
    std::vector<double> g{1};
    for (int b = 5; b <= 50; b += 5) g.push_back(b);
    for (int b = 60; b <= 200; b += 10) g.push_back(b);
    g.erase(std::remove_if(g.begin(), g.end(), [&](double b) { return b > limit; }), g.end());
    return g;
}

ModelPrediction optimize(Algorithm a, double m, double n, std::size_t P, const MachineModel& mm) {
    if (a != Algorithm::caqr_par && a != Algorithm::pdgeqrf)
        throw ShapeError("only caqr_par and pdgeqrf have tunable layouts");
    if (!power_of_two(P)) throw ShapeError("P=" + std::to_string(P) + " is not a power of two");
    if (P > mm.P_max && mm.P_max > 1)
        throw ShapeError("P=" + std::to_string(P) + " exceeds P_max=" + std::to_string(mm.P_max));

    ModelPrediction best;
    best.algorithm = a;
    best.params.m = m;
    best.params.n = n;
    best.params.P = P;
    best.feasible = false;
    if (mm.mem_words > 0 && m * n / double(P) > mm.mem_words) return best;

    std::tuple<double, double, std::size_t> key{};
    for (std::size_t Pr = 1; Pr <= P; Pr *= 2) {
        const std::size_t Pc = P / Pr;
        const auto bs = P == 1 ? std::vector<double>{1} : block_size_grid(std::min({200.0, m / Pr, n / Pc}));
        for (double b : bs) {
            ModelParams p;
            p.m = m;
            p.n = n;
            p.P = P;
            p.Pr = Pr;
            p.Pc = Pc;
            p.b = b;
            auto r = evaluate(a, p, mm);
            std::tuple<double, double, std::size_t> k{r.time(), b, Pr};
            if (!best.feasible || k < key) {
                best = r;
                key = k;
            }
        }
    }
    return best;
}

const SpeedupCell& SpeedupTable::at(double n, std::size_t P) const {
    for (const auto& c : cells)
        if (std::abs(c.n - n) <= 1e-9 * n && c.P == P) return c;
    throw ShapeError("no cell for n=" + std::to_string(n) + ", P=" + std::to_string(P));
}

SpeedupTable speedup_table(const MachineModel& mm, const std::vector<double>& n_grid,
                           const std::vector<std::size_t>& P_grid) {
    auto ns = n_grid;
    auto Ps = P_grid;
    std::sort(ns.begin(), ns.end());
    std::sort(Ps.begin(), Ps.end());

    SpeedupTable t;
    t.machine = mm.name;
    t.cells.resize(ns.size() * Ps.size());
    const long total = static_cast<long>(t.cells.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < total; ++i) {
        auto& c = t.cells[static_cast<std::size_t>(i)];
        c.n = ns[static_cast<std::size_t>(i) / Ps.size()];
        c.P = Ps[static_cast<std::size_t>(i) % Ps.size()];
        c.pdgeqrf = optimize(Algorithm::pdgeqrf, c.n, c.n, c.P, mm);
        c.caqr = optimize(Algorithm::caqr_par, c.n, c.n, c.P, mm);
        c.feasible = c.pdgeqrf.feasible && c.caqr.feasible;
    }

    for (std::size_t i = 0; i < ns.size(); ++i) {
        BestRow row;
        row.n = ns[i];
        double tbest = 0;
        for (std::size_t j = 0; j < Ps.size(); ++j) {
            const auto& c = t.cells[i * Ps.size() + j];
            if (!c.feasible) continue;
            if (!row.feasible || c.pdgeqrf.time() < tbest) {
                row.feasible = true;
                row.P = c.P;
                row.ratio = c.ratio();
                tbest = c.pdgeqrf.time();
            }
        }
        t.best.push_back(row);
    }
    return t;
}

std::vector<double> default_n_grid(const MachineModel& mm) {
    double lo = 3, hi = 5.5;
    if (mm.name == "peta") hi = 6;
    if (mm.name == "grid") {
        lo = 6;
        hi = 7.5;
    }
    std::vector<double> g;
    for (double e = lo; e <= hi + 1e-9; e += 0.5) g.push_back(std::pow(10.0, e));
    return g;
}

std::vector<std::size_t> default_P_grid(const MachineModel& mm) {
    std::vector<std::size_t> g;
    for (std::size_t P = 1; P <= std::max<std::size_t>(mm.P_max, 1); P *= 2) g.push_back(P);
    return g;
}

const char* const prediction_csv_header = "machine,algorithm,n,P,b,Pr,Pc,time,frac_latency,frac_bandwidth,frac_compute";

std::string prediction_csv_row(const std::string& machine, const ModelPrediction& p) {
    char buf[256];
    if (!p.feasible) {
        std::snprintf(buf, sizeof buf, "%s,%s,%.10g,%zu,,,,infeasible,,,", machine.c_str(),
                      algorithm_name(p.algorithm).c_str(), p.params.n, p.params.P);
        return buf;
    }
    std::snprintf(buf, sizeof buf, "%s,%s,%.10g,%zu,%.10g,%zu,%zu,%.6e,%.6f,%.6f,%.6f", machine.c_str(),
                  algorithm_name(p.algorithm).c_str(), p.params.n, p.params.P, p.params.b, p.params.Pr, p.params.Pc,
                  p.time(), p.frac_latency(), p.frac_bandwidth(), p.frac_compute());
    return buf;
}

}  // namespace ca
