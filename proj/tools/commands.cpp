#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include "ca/caqr.hpp"
#include "ca/householder.hpp"
#include "ca/models.hpp"
#include "ca/rivals.hpp"
#include "ca/tsqr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Every factorization the CLI knows, with an explicit Q so the report can
// measure orthogonality.
struct Factored {
    ca::DenseMatrix Q, R;
    ca::CostReport cost;
};

struct FactorFlags {
    std::string method = "householder";
    std::string tree = "binary";
    std::size_t P = 4, b = 8, Pr = 1, Pc = 1;
};

Factored run_method(const ca::DenseMatrix& A, const FactorFlags& f, const ca::MachineModel& mm) {
    const std::size_t m = A.rows(), n = A.cols();
    if (m < n) throw ca::ShapeError("need m >= n (m=" + std::to_string(m) + ", n=" + std::to_string(n) + ")");
    Factored out;
    if (f.method == "tsqr") {
        auto tree = ca::make_tree(ca::TreeShape::parse(f.tree), f.P);
        auto r = ca::tsqr_factor(A, f.P, tree, mm);
        out.R = r.R;
        out.cost = r.cost;
        out.Q = ca::tsqr_apply(r.q, ca::DenseMatrix::eye(m, n), false, mm).C;
    } else if (f.method == "caqr") {
        ca::GridLayout g;
        g.Pr = f.Pr;
        g.Pc = f.Pc;
        g.b = f.b;
        g.m = m;
        g.n = n;
        g.check();
        auto r = ca::caqr_parallel_sim(A, g, mm);
        out.R = r.R;
        out.cost = r.cost;
        out.Q = r.q.thin_q();
    } else if (f.method == "householder") {
        ca::FlopCounter fc;
        auto h = ca::qr_unblocked(A, fc);
        out.R = h.R;
        out.cost = ca::sequential_report(fc, {}, mm);
        ca::FlopCounter ignore;
        out.Q = ca::apply_q(h, ca::DenseMatrix::eye(m, n), false, ignore);
    } else {
        static const std::pair<const char*, ca::Method> rivals[] = {
            {"choleskyqr", ca::Method::cholesky_qr}, {"mgs", ca::Method::mgs_r}, {"mgs_r", ca::Method::mgs_r},
            {"mgs_l", ca::Method::mgs_l},            {"cgs", ca::Method::cgs_l}, {"cgs_l", ca::Method::cgs_l},
            {"cgs_r", ca::Method::cgs_r},            {"cgs2", ca::Method::cgs2},
        };
        for (const auto& [name, method] : rivals)
            if (f.method == name) {
                auto r = ca::run_rival(A, method);
                out.Q = std::move(r.Q);
                out.R = std::move(r.R);
                out.cost = ca::sequential_report(r.flops, {}, mm);
                return out;
            }
        throw ca::ShapeError("unknown method '" + f.method + "'");
    }
    return out;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream os(p);
    if (!os) throw ca::IoError("cannot write " + p.string());
    os << text;
    if (!os) throw ca::IoError("write failed: " + p.string());
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
    if (path.empty() || path == "-") return std::cout;
    file.open(path);
    if (!file) throw ca::IoError("cannot write " + path);
    return file;
}

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

// ---- factor ----

struct FactorCmd {
    std::size_t m = 0, n = 0;
    std::uint64_t seed = 1;
    double kappa = 0;
    std::string input, out, machine = "unit";
    FactorFlags f;
};

int cmd_factor(const FactorCmd& c) {
    ca::DenseMatrix A;
    if (!c.input.empty()) {
        std::ifstream is(c.input);
        if (!is) throw ca::IoError("cannot read " + c.input);
        A = ca::read_csv(is);
    } else {
        if (c.m < c.n || c.n == 0)
            throw ca::ShapeError("need m >= n >= 1 (m=" + std::to_string(c.m) + ", n=" + std::to_string(c.n) + ")");
        A = c.kappa > 0 ? ca::generate_conditioned(c.m, c.n, c.kappa, c.seed) : ca::gaussian(c.m, c.n, c.seed);
    }
    const auto mm = ca::MachineModel::resolve(c.machine);
    auto r = run_method(A, c.f, mm);

    json report = {
        {"schema_version", ca::CostReport::schema_version},
        {"method", c.f.method},
        {"m", A.rows()},
        {"n", A.cols()},
        {"orthogonality_deviation", ca::orthogonality_deviation(r.Q)},
        {"reconstruction_error", ca::reconstruction_error(A, r.Q, r.R)},
    };
    json cost = r.cost.to_json();
    json both = report;
    both.update(cost);
    std::cout << both.dump(2) << "\n";

    if (!c.out.empty()) {
        const fs::path dir(c.out);
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw ca::IoError("cannot create " + dir.string() + ": " + ec.message());
        std::ostringstream csv;
        ca::write_csv(csv, ca::sign_normalized(r.R));
        write_file(dir / "R.csv", csv.str());
        write_file(dir / "report.json", report.dump(2) + "\n");
        write_file(dir / "cost.json", cost.dump(2) + "\n");
    }
    return 0;
}

// ---- stability ----

struct StabilityCmd {
    std::size_t m = 500, n = 50, P = 4;
    std::vector<double> kappas;
    std::vector<std::string> methods{"householder", "tsqr", "cgs2", "mgs", "choleskyqr", "cgs"};
    std::uint64_t seed = 1;
    std::string tree = "binary", out;
};

int cmd_stability(const StabilityCmd& c) {
    if (c.kappas.empty()) throw ca::ShapeError("--kappas needs at least one value");
    for (double k : c.kappas)
        if (!(k >= 1)) throw ca::ShapeError("condition numbers must be >= 1");
    const std::size_t cells = c.kappas.size() * c.methods.size();
    std::vector<std::string> rows(cells);
    std::vector<int> broke(cells, 0);
    std::vector<std::string> errors(cells);
    std::vector<ca::DenseMatrix> inputs(c.kappas.size());
    for (std::size_t i = 0; i < c.kappas.size(); ++i)
        inputs[i] = ca::generate_conditioned(c.m, c.n, c.kappas[i], c.seed);

    static const std::set<std::string> known{"householder", "tsqr", "caqr", "choleskyqr", "mgs", "mgs_l",
                                             "mgs_r",       "cgs",  "cgs_l", "cgs_r",      "cgs2"};
    for (const auto& name : c.methods)
        if (!known.count(name)) throw ca::ShapeError("unknown method '" + name + "'");

    const long total = static_cast<long>(cells);
#pragma omp parallel for schedule(dynamic)
    for (long idx = 0; idx < total; ++idx) {
        const std::size_t ik = static_cast<std::size_t>(idx) / c.methods.size();
        const std::size_t im = static_cast<std::size_t>(idx) % c.methods.size();
        FactorFlags f;
        f.method = c.methods[im];
        f.P = c.P;
        f.tree = c.tree;
        const std::string head = c.methods[im] + "," + fmt("%g", c.kappas[ik]) + ",";
        try {
            auto r = run_method(inputs[ik], f, ca::MachineModel::unit());
            rows[idx] = head + fmt("%.6e", ca::orthogonality_deviation(r.Q)) + "," +
                        fmt("%.6e", ca::reconstruction_error(inputs[ik], r.Q, r.R));
        } catch (const ca::NumericError& e) {
            rows[idx] = head + "nan,nan";
            broke[idx] = 1;
            errors[idx] = e.what();
        } catch (const std::exception& e) {
            broke[idx] = 2;
            errors[idx] = e.what();
        }
    }
    for (std::size_t i = 0; i < cells; ++i)
        if (broke[i] == 2) throw ca::ShapeError(errors[i]);

    std::ofstream file;
    std::ostream& os = open_out(c.out, file);
    os << "method,kappa,deviation,reconstruction\n";
    for (std::size_t im = 0; im < c.methods.size(); ++im)
        for (std::size_t ik = 0; ik < c.kappas.size(); ++ik) os << rows[ik * c.methods.size() + im] << "\n";
    os.flush();
    int status = 0;
    for (std::size_t i = 0; i < cells; ++i)
        if (broke[i]) {
            std::cerr << "breakdown: " << rows[i].substr(0, rows[i].find(",nan")) << ": " << errors[i] << "\n";
            status = 3;
        }
    return status;
}

// ---- costs ----

struct CostsCmd {
    std::string algorithm = "caqr_par", machine = "power5";
    ca::ModelParams p;
    bool optimize = false, as_json = false;
};

int cmd_costs(CostsCmd c) {
    const auto mm = ca::MachineModel::resolve(c.machine);
    const auto a = ca::parse_algorithm(c.algorithm);
    if (c.p.m == 0) c.p.m = c.p.n;
    ca::ModelPrediction r =
        c.optimize ? ca::optimize(a, c.p.m, c.p.n, c.p.P, mm) : ca::evaluate(a, c.p, mm);
    if (c.as_json) {
        json j = {{"schema_version", ca::CostReport::schema_version},
                  {"machine", mm.name},
                  {"algorithm", ca::algorithm_name(a)},
                  {"feasible", r.feasible},
                  {"m", r.params.m},
                  {"n", r.params.n},
                  {"P", r.params.P},
                  {"W", r.params.W},
                  {"b", r.params.b},
                  {"Pr", r.params.Pr},
                  {"Pc", r.params.Pc},
                  {"messages", r.messages},
                  {"words", r.words},
                  {"flops", r.flops},
                  {"divides", r.divides},
                  {"latency_time", r.latency},
                  {"bandwidth_time", r.bandwidth},
                  {"compute_time", r.compute},
                  {"total_time", r.time()}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << ca::prediction_csv_header << "\n" << ca::prediction_csv_row(mm.name, r) << "\n";
    }
    return 0;
}

// ---- predict ----

struct PredictCmd {
    std::string machine = "power5", out, best, predictions;
    std::vector<double> log10_n;
    std::vector<std::size_t> P;
};

int cmd_predict(const PredictCmd& c) {
    const auto mm = ca::MachineModel::resolve(c.machine);
    std::vector<double> ns;
    for (double e : c.log10_n) ns.push_back(std::pow(10.0, e));
    if (ns.empty()) ns = ca::default_n_grid(mm);
    auto Ps = c.P.empty() ? ca::default_P_grid(mm) : c.P;
    auto t = ca::speedup_table(mm, ns, Ps);

    std::ofstream f1, f2;
    std::ostream& os = open_out(c.out, f1);
    os << "machine,n,log10n,P,log2P,t_pdgeqrf,t_caqr,ratio\n";
    for (const auto& cell : t.cells) {
        os << mm.name << "," << fmt("%.10g", cell.n) << "," << fmt("%.2f", std::log10(cell.n)) << "," << cell.P
           << "," << fmt("%.0f", std::log2(double(cell.P))) << ",";
        if (cell.feasible)
            os << fmt("%.6e", cell.pdgeqrf.time()) << "," << fmt("%.6e", cell.caqr.time()) << ","
               << fmt("%.4f", cell.ratio()) << "\n";
        else
            os << "infeasible,infeasible,\n";
    }
    os.flush();

    std::ostream& bs = c.best.empty() && c.out.empty() ? std::cout : open_out(c.best, f2);
    if (&bs == &std::cout && c.out.empty()) std::cout << "\n";
    bs << "machine,log10n,best_log2P,best_P,speedup\n";
    for (const auto& row : t.best) {
        bs << mm.name << "," << fmt("%.2f", std::log10(row.n)) << ",";
        if (row.feasible)
            bs << fmt("%.0f", std::log2(double(row.P))) << "," << row.P << "," << fmt("%.2f", row.ratio) << "\n";
        else
            bs << ",,infeasible\n";
    }
    bs.flush();

    if (!c.predictions.empty()) {
        std::ofstream pf(c.predictions);
        if (!pf) throw ca::IoError("cannot write " + c.predictions);
        pf << ca::prediction_csv_header << "\n";
        for (const auto& cell : t.cells) {
            pf << ca::prediction_csv_row(mm.name, cell.pdgeqrf) << "\n";
            pf << ca::prediction_csv_row(mm.name, cell.caqr) << "\n";
        }
    }
    return 0;
}

// ---- ooc ----

struct OocCmd {
    std::string file;
    std::size_t gen = 0, n = 0, W = 0;
    std::uint64_t seed = 1;
    bool verify = false, keep_spill = false;
};

// Generated matrices are written one block at a time so they never need to
// fit in memory; block k is gaussian(rows_k, n, seed + k).
ca::DenseMatrix generated_block(std::size_t k, std::size_t rows, std::size_t br, std::size_t n, std::uint64_t seed) {
    ca::DenseMatrix B(br, n);
    B.set_block(0, 0, ca::gaussian(rows, n, seed + k));
    return B;
}

int cmd_ooc(const OocCmd& c) {
    if (c.file.empty()) throw ca::ShapeError("--file is required");
    if (c.gen > 0) {
        if (c.n == 0) throw ca::ShapeError("--gen needs --n");
        const auto plan = ca::tsqr_ooc_plan(c.gen, c.n, c.W);
        auto out = ca::BlockStore::empty(c.gen, c.n, plan.block_rows, 1, false, ca::Backend::file(c.file));
        for (std::size_t k = 0; k < out.row_blocks(); ++k) {
            const std::size_t rows = std::min(plan.block_rows, c.gen - k * plan.block_rows);
            out.write_block(k, generated_block(k, rows, plan.block_rows, c.n, c.seed));
        }
        std::cout << "generated " << c.gen << "x" << c.n << " in " << out.row_blocks() << " blocks of "
                  << plan.block_rows << " rows: " << c.file << "\n";
    }

    auto A = ca::BlockStore::open(c.file);
    if (c.n != 0 && c.n != A.n())
        throw ca::ShapeError("--n " + std::to_string(c.n) + " does not match the file (n=" + std::to_string(A.n()) +
                             ")");
    const std::size_t m = A.m(), n = A.n(), P = A.row_blocks();
    const std::string spill = c.file + ".q";
    ca::DenseMatrix R;
    ca::TransferCounters measured;
    std::size_t peak = 0;
    {
        auto res = ca::tsqr_factor_ooc(A, c.W, ca::MachineModel::unit(), ca::Backend::file(spill));
        R = res.R;
        measured = res.cost.comm;
        peak = res.peak_words;
    }
    if (!c.keep_spill) fs::remove(spill);

    const auto model = ca::tsqr_ooc_model_counts(P * A.block_rows(), n, P);
    std::cout << "matrix      " << m << " x " << n << ", " << P << " blocks of " << A.block_rows() << " rows\n";
    std::cout << "fast memory " << c.W << " words, peak " << peak << "\n";
    std::cout << "measured    messages " << measured.messages << "  words " << measured.words << "\n";
    std::cout << "model       messages " << model.messages << "  words " << model.words << "\n";
    int status = 0;
    if (!(measured == model)) {
        std::cerr << "measured transfers differ from the model\n";
        status = 3;
    }

    if (c.verify) {
        // needs the whole matrix in memory
        if (m * n > (std::size_t{1} << 28)) {
            std::cout << "verify      skipped, " << m * n << " words will not fit\n";
        } else {
            auto full = A.snapshot();
            ca::FlopCounter fc;
            auto ref = ca::qr_unblocked(full, fc).R;
            const double diff = ca::max_abs_diff(ca::sign_normalized(R), ca::sign_normalized(ref));
            const double tol = 1e-12 * ca::frobenius_norm(full);
            std::cout << "verify      max |dR| " << fmt("%.3e", diff) << "  tolerance " << fmt("%.3e", tol) << "  "
                      << (diff <= tol ? "ok" : "FAILED") << "\n";
            if (diff > tol) status = 3;
        }
    }
    return status;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"communication-avoiding QR: factorizations, counters and cost models"};
    app.require_subcommand(1);

    FactorCmd fc;
    auto* factor = app.add_subcommand("factor", "factor a generated or CSV matrix and report costs");
    factor->add_option("--m", fc.m, "rows");
    factor->add_option("--n", fc.n, "columns");
    factor->add_option("--input", fc.input, "read A from CSV instead of generating it");
    factor->add_option("--kappa", fc.kappa, "generate with this condition number (default: gaussian)");
    factor->add_option("--method", fc.f.method, "tsqr, caqr, householder, choleskyqr, mgs, cgs, cgs2")
        ->check(CLI::IsMember({"tsqr", "caqr", "householder", "choleskyqr", "mgs", "mgs_l", "mgs_r", "cgs", "cgs_l",
                               "cgs_r", "cgs2"}));
    factor->add_option("--tree", fc.f.tree, "flat, binary or qary:Q");
    factor->add_option("--P", fc.f.P, "TSQR leaves");
    factor->add_option("--b", fc.f.b, "CAQR block size");
    factor->add_option("--Pr", fc.f.Pr, "CAQR grid rows");
    factor->add_option("--Pc", fc.f.Pc, "CAQR grid columns");
    factor->add_option("--seed", fc.seed);
    factor->add_option("--machine", fc.machine, "power5, peta, grid, unit or file:<path>");
    factor->add_option("--out", fc.out, "directory for R.csv, report.json and cost.json");

    StabilityCmd sc;
    auto* stability = app.add_subcommand("stability", "orthogonality loss against condition number");
    stability->add_option("--m", sc.m);
    stability->add_option("--n", sc.n);
    stability->add_option("--kappas", sc.kappas, "comma separated")->delimiter(',')->required();
    stability->add_option("--methods", sc.methods, "comma separated")->delimiter(',');
    stability->add_option("--P", sc.P, "TSQR leaves");
    stability->add_option("--tree", sc.tree);
    stability->add_option("--seed", sc.seed);
    stability->add_option("--out", sc.out, "CSV path (default stdout)");

    CostsCmd cc;
    auto* costs = app.add_subcommand("costs", "evaluate one closed-form model");
    costs->add_option("--algorithm", cc.algorithm);
    costs->add_option("--machine", cc.machine);
    costs->add_option("--m", cc.p.m, "rows (default n)");
    costs->add_option("--n", cc.p.n)->required();
    costs->add_option("--P", cc.p.P);
    costs->add_option("--W", cc.p.W, "fast memory words");
    costs->add_option("--b", cc.p.b);
    costs->add_option("--Pr", cc.p.Pr);
    costs->add_option("--Pc", cc.p.Pc);
    costs->add_option("--c", cc.p.c, "left-looking panel width");
    costs->add_flag("--optimize", cc.optimize, "search b, Pr, Pc");
    costs->add_flag("--json", cc.as_json);

    PredictCmd pc;
    auto* predict = app.add_subcommand("predict", "PDGEQRF / CAQR speedup tables");
    predict->add_option("--machine", pc.machine);
    predict->add_option("--n-grid", pc.log10_n, "log10 n values, comma separated")->delimiter(',');
    predict->add_option("--P-grid", pc.P, "processor counts, comma separated")->delimiter(',');
    predict->add_option("--out", pc.out, "speedup CSV (default stdout)");
    predict->add_option("--best", pc.best, "best-P CSV (default stdout)");
    predict->add_option("--predictions", pc.predictions, "per-algorithm prediction CSV");

    OocCmd oc;
    auto* ooc = app.add_subcommand("ooc", "out-of-core TSQR against a block file");
    ooc->add_option("--file", oc.file, "block file")->required();
    ooc->add_option("--gen", oc.gen, "first write a generated matrix with this many rows");
    ooc->add_option("--n", oc.n);
    ooc->add_option("--fast-words", oc.W, "fast memory W in words")->required();
    ooc->add_option("--seed", oc.seed);
    ooc->add_flag("--verify", oc.verify, "compare R with an in-memory factorization");
    ooc->add_flag("--keep-spill", oc.keep_spill, "keep the spilled Q factor next to the file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        if (*factor) return cmd_factor(fc);
        if (*stability) return cmd_stability(sc);
        if (*costs) return cmd_costs(cc);
        if (*predict) return cmd_predict(pc);
        if (*ooc) return cmd_ooc(oc);
    } catch (const ca::ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ca::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const ca::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 2;
}
