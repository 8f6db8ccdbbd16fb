#include "ca/cost.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace ca {

MachineModel MachineModel::from_peak(std::string name, std::size_t P_max, double peak, double alpha, double beta,
                                     double mem) {
    MachineModel m;
    m.name = std::move(name);
    m.P_max = P_max;
    m.peak_flops = peak;
    m.gamma = 1.0 / (0.8 * peak);
    m.gamma_d = m.gamma;
    m.alpha = alpha;
    m.beta = beta;
    m.mem_words = mem;
    m.check();
    return m;
}

MachineModel MachineModel::power5() { return from_peak("power5", 888, 7.6e9, 5e-6, 2.5e-9, 5e8); }
MachineModel MachineModel::peta() { return from_peak("peta", 8192, 500e9, 1e-5, 2e-9, 62.5e9); }
MachineModel MachineModel::grid() { return from_peak("grid", 128, 10e12, 1e-1, 25e-9, 1e14); }

MachineModel MachineModel::resolve(const std::string& s) {
    if (s == "power5") return power5();
    if (s == "peta") return peta();
    if (s == "grid") return grid();
    if (s == "unit") return unit();
    if (s.rfind("file:", 0) == 0) return load(s.substr(5));
    throw ShapeError("unknown machine '" + s + "' (power5, peta, grid, unit, file:<path>)");
}

MachineModel MachineModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open machine file '" + path + "'");
    std::string name = "custom";
    double P_max = 0, peak = 0, alpha = 0, beta = 0, mem = 0, gamma = 0, gamma_d = 0;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = line.substr(0, line.find('#'));
        std::replace(line.begin(), line.end(), '=', ' ');
        std::istringstream ls(line);
        std::string key, value;
        if (!(ls >> key)) continue;
        if (!(ls >> value)) throw IoError(path + ":" + std::to_string(lineno) + ": missing value for '" + key + "'");
        if (key == "name") {
            name = value;
            continue;
        }
        double v = 0;
        try {
            std::size_t used = 0;
            v = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument(value);
        } catch (const std::exception&) {
            throw IoError(path + ":" + std::to_string(lineno) + ": bad number '" + value + "'");
        }
        if (key == "P_max") P_max = v;
        else if (key == "peak_flops") peak = v;
        else if (key == "alpha") alpha = v;
        else if (key == "beta") beta = v;
        else if (key == "mem_words") mem = v;
        else if (key == "gamma") gamma = v;
        else if (key == "gamma_d") gamma_d = v;
        else throw IoError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (P_max < 1 || peak <= 0 || alpha <= 0 || beta <= 0 || mem <= 0)
        throw IoError(path + ": need positive name, P_max, peak_flops, alpha, beta, mem_words");
    auto m = from_peak(name, static_cast<std::size_t>(P_max), peak, alpha, beta, mem);
    if (gamma > 0) m.gamma = gamma;
    if (gamma_d > 0) m.gamma_d = gamma_d;
    else if (gamma > 0) m.gamma_d = gamma;
    return m;
}

void MachineModel::check() const {
    if (!(alpha > 0 && beta > 0 && gamma > 0 && gamma_d > 0 && peak_flops > 0) || P_max < 1 || mem_words < 0)
        throw ShapeError("machine '" + name + "' needs positive rates");
}

nlohmann::json CostReport::to_json() const {
    return {
        {"schema_version", schema_version},
        {"messages", comm.messages},
        {"words", comm.words},
        {"multiplies", flops.multiplies},
        {"adds", flops.adds},
        {"divides", flops.divides},
        {"latency_time", latency_time},
        {"bandwidth_time", bandwidth_time},
        {"compute_time", compute_time},
        {"total_time", critical_path_time},
        {"total_messages", total_comm.messages},
        {"total_words", total_comm.words},
        {"notes", notes},
    };
}

CostReport sequential_report(const FlopCounter& flops, const TransferCounters& comm, const MachineModel& m) {
    CostReport r;
    r.flops = r.total_flops = flops;
    r.comm = r.total_comm = comm;
    r.latency_time = m.alpha * static_cast<double>(comm.messages);
    r.bandwidth_time = m.beta * static_cast<double>(comm.words);
    r.compute_time = m.gamma * static_cast<double>(flops.mul_add()) + m.gamma_d * static_cast<double>(flops.divides);
    r.critical_path_time = r.latency_time + r.bandwidth_time + r.compute_time;
    return r;
}

VirtualMachine::VirtualMachine(std::size_t P, const MachineModel& machine)
    : machine_(machine), clocks_(P), depth_(P) {
    if (P == 0) throw ShapeError("virtual machine needs at least one processor");
}

void VirtualMachine::compute(std::size_t p, const FlopCounter& f) {
    auto& c = clocks_.at(p);
    c.compute += machine_.gamma * static_cast<double>(f.mul_add()) + machine_.gamma_d * static_cast<double>(f.divides);
    c.flops += f;
    total_flops_ += f;
}

void VirtualMachine::send(std::size_t from, std::size_t to, std::size_t words) {
    auto& a = clocks_.at(from);
    auto& b = clocks_.at(to);
    // ties go to the receiver so repeated runs pick the same chain
    Chain c = a.total() > b.total() ? a : b;
    c.latency += machine_.alpha;
    c.bandwidth += machine_.beta * static_cast<double>(words);
    a = b = c;

    Depth d = depth_[to] < depth_[from] ? depth_[from] : depth_[to];
    ++d.messages;
    d.words += words;
    depth_[from] = depth_[to] = d;

    ++total_comm_.messages;
    total_comm_.words += words;
}

void VirtualMachine::broadcast(const std::vector<std::size_t>& members, std::size_t root, std::size_t words) {
    const std::size_t k = members.size();
    for (std::size_t s = 1; s < k; s <<= 1)
        for (std::size_t r = 0; r < s && r + s < k; ++r)
            send(members[(root + r) % k], members[(root + r + s) % k], words);
}

void VirtualMachine::multicast(const std::vector<std::size_t>& members, std::size_t root, std::size_t words) {
    if (members.size() < 2) return;
    Chain c = clocks_.at(members[root]);
    Depth d = depth_[members[root]];
    for (auto p : members) {
        if (clocks_.at(p).total() > c.total()) c = clocks_[p];
        if (d < depth_[p]) d = depth_[p];
    }
    c.latency += machine_.alpha;
    c.bandwidth += machine_.beta * static_cast<double>(words);
    ++d.messages;
    d.words += words;
    for (auto p : members) {
        clocks_[p] = c;
        depth_[p] = d;
    }
    total_comm_.messages += members.size() - 1;
    total_comm_.words += (members.size() - 1) * words;
}

double VirtualMachine::time(std::size_t p) const { return clocks_.at(p).total(); }

CostReport VirtualMachine::report() const {
    std::size_t slow = 0;
    for (std::size_t p = 1; p < clocks_.size(); ++p)
        if (clocks_[p].total() > clocks_[slow].total()) slow = p;
    const Chain& c = clocks_[slow];
    Depth d;
    for (const auto& x : depth_) d = d < x ? x : d;

    CostReport r;
    r.flops = c.flops;
    r.comm = {d.messages, d.words};
    r.total_flops = total_flops_;
    r.total_comm = total_comm_;
    r.latency_time = c.latency;
    r.bandwidth_time = c.bandwidth;
    r.compute_time = c.compute;
    r.critical_path_time = c.total();
    return r;
}

}  // namespace ca
