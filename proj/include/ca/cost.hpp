#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "ca/householder.hpp"
#include "ca/store.hpp"

namespace ca {

struct MachineModel {
    std::string name = "unit";
    std::size_t P_max = 1;
    double alpha = 1;       // seconds per message
    double beta = 1;        // seconds per word
    double gamma = 1;       // seconds per multiply or add
    double gamma_d = 1;     // seconds per divide or square root
    double mem_words = 0;   // per processor; 0 means unlimited
    double peak_flops = 1;  // per processor

    // gamma is set so the modeled rate is 80% of peak; gamma_d = gamma.
    static MachineModel from_peak(std::string name, std::size_t P_max, double peak_flops, double alpha, double beta,
                                  double mem_words);
    static MachineModel power5();
    static MachineModel peta();
    static MachineModel grid();
    // alpha = beta = gamma = gamma_d = 1, handy when only counts matter
    static MachineModel unit() { return {}; }
    // "power5", "peta", "grid" or "file:<path>"
    static MachineModel resolve(const std::string& spec);
    // Lines of "key = value" (or "key value"); '#' starts a comment.
    // Keys: name, P_max, peak_flops, alpha, beta, mem_words, and optionally gamma, gamma_d.
    static MachineModel load(const std::string& path);
    void check() const;
};

struct CostReport {
    FlopCounter flops;             // along the critical path
    TransferCounters comm;         // along the critical path
    FlopCounter total_flops;       // summed over all processors
    TransferCounters total_comm;   // every message sent
    double latency_time = 0;
    double bandwidth_time = 0;
    double compute_time = 0;
    double critical_path_time = 0;
    std::vector<std::string> notes;

    nlohmann::json to_json() const;
    static constexpr int schema_version = 1;
};

// A single-processor run: counts are totals, time is the plain sum.
CostReport sequential_report(const FlopCounter& flops, const TransferCounters& comm, const MachineModel& machine);

// Per-processor clocks for simulated message passing. Each processor carries
// the costs of the most expensive chain of work ending at it (max rule at
// every message) and, separately, the longest chain of messages, which is
// what "critical-path messages" means for a reduction tree.
class VirtualMachine {
public:
    VirtualMachine(std::size_t P, const MachineModel& machine);

    std::size_t size() const { return clocks_.size(); }
    void compute(std::size_t p, const FlopCounter& f);
    // A message is a synchronization of the two parties followed by alpha + beta*w.
    void send(std::size_t from, std::size_t to, std::size_t words);
    // Binomial-tree broadcast from root to all members, in the given order.
    void broadcast(const std::vector<std::size_t>& members, std::size_t root_index, std::size_t words);
    // Pipelined broadcast: every member waits for the slowest, then one
    // message step. Counts k-1 messages in the totals.
    void multicast(const std::vector<std::size_t>& members, std::size_t root_index, std::size_t words);

    double time(std::size_t p) const;
    CostReport report() const;

private:
    struct Chain {
        double latency = 0, bandwidth = 0, compute = 0;
        FlopCounter flops;
        double total() const { return latency + bandwidth + compute; }
    };
    struct Depth {
        std::size_t messages = 0, words = 0;
        bool operator<(const Depth& o) const {
            return messages != o.messages ? messages < o.messages : words < o.words;
        }
    };
    MachineModel machine_;
    std::vector<Chain> clocks_;
    std::vector<Depth> depth_;
    FlopCounter total_flops_;
    TransferCounters total_comm_;
};

}  // namespace ca
