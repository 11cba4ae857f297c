// Centralized channel access: the coordinator tracks reported buffer levels,
// estimates current buffers and broadcasts one action per node each
// superframe, chosen by a sorted-prefix search over slot, CAP and sleep
// classes. The exact joint MDP is available for small instances.
#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hybridmac/core.hpp"
#include "hybridmac/csma_analytics.hpp"
#include "hybridmac/mdp.hpp"
#include "hybridmac/traffic.hpp"

namespace hybridmac {

struct LedgerEntry {
    int reported = 0;   ///< Q, last piggybacked buffer level
    int age = 0;        ///< F, superframes since that report
    double rate = 0.0;  ///< lambda_n, packets per beacon interval
};

class BufferLedger {
public:
    BufferLedger(std::vector<double> rates, int buffer_max);

    int size() const { return static_cast<int>(entries_.size()); }
    const LedgerEntry& entry(int n) const { return entries_.at(static_cast<std::size_t>(n)); }
    int buffer_max() const { return buffer_max_; }

    void report(int n, int buffer);
    /// Advance every entry by one superframe.
    void tick();

    /// Q + floor(lambda F), before clipping.
    int raw_estimate(int n) const;
    /// min(Q + floor(lambda F), B_max).
    int estimate(int n) const;

private:
    std::vector<LedgerEntry> entries_;
    int buffer_max_;
};

int estimate_buffer(const LedgerEntry& e, int buffer_max);

/// Saturation records per number of CAP contenders for one CAP length.
class SaturationTable {
public:
    SaturationTable(const SuperframeConfig& cfg, MacParams mac, double theta);
    const SaturationParams& at(int contenders);
    Ubp cap_len() const { return cap_len_; }

private:
    Ubp cap_len_;
    Ubp tx_len_;
    MacParams mac_;
    double theta_;
    std::map<int, SaturationParams> cache_;
};

struct MccaParams {
    SuperframeConfig cfg;
    MacParams mac;
    int buffer_max = 5;
    double xi_x = 1.0;
    double xi_c = 0.1;
    double theta = 0.0;
    bool lossless_throughput = true;
};

/// Per-contender-count quantities used by the utility.
struct CapFigures {
    double kappa_sf = 0.0;
    double phi_cap_sf = 0.0;
    double xi_p = 0.0;
};

class MccaModel {
public:
    explicit MccaModel(const MccaParams& params);

    const MccaParams& params() const { return params_; }
    /// Xi_m = Xi_x eta T_cap / T_slot.
    double xi_norm() const { return xi_norm_; }
    const CapFigures& cap(int contenders);

    /// mu and Xi of one node for its action and the CAP population.
    double throughput(int q, Action a, int contenders);
    double energy(int q, Action a, int contenders);
    /// (mu - q) / lambda - Xi / Xi_m with lambda floored at kMinRate.
    double node_utility(int q, double rate, Action a, int contenders);

    static constexpr double kMinRate = 1e-6;

private:
    MccaParams params_;
    double xi_norm_;
    SaturationTable table_;
    std::vector<std::optional<CapFigures>> figures_;  // by contender count
};

struct JointSchedule {
    std::vector<Action> actions;        ///< by node index
    std::vector<int> slot_owner;        ///< slot index -> node
    double utility = 0.0;

    int slot_of(int node) const;
    /// Number of nodes contending in the CAP (a2 or a4).
    int contenders() const;
    void validate(int cfp_slots) const;
    bool operator==(const JointSchedule&) const = default;
};

struct ScheduleStats {
    std::int64_t family_candidates = 0;  ///< loop count of the sorted-prefix family
    std::int64_t extra_candidates = 0;   ///< CAP sets of size 0 and 1
};

/// Candidate count sum_{g=0}^{M} (M + 1 - g)(N - g - 1); 36N - 120 at M = 7.
std::int64_t action_space_size(int nodes, int cfp_slots);

/// Actions of the sorted positions for a candidate (g, dg, dd).
std::vector<Action> candidate_actions(int nodes, int g, int dg, int dd);

/// Sorted-prefix search. `buffers` are the (possibly unclipped) estimates used
/// for ordering; utilities clip them at B_max. Ties go to the lexicographically smaller action
/// vector in sorted order (a3 before a4, a1 before a2).
JointSchedule approx_schedule(const std::vector<int>& buffers, const std::vector<double>& rates,
                              MccaModel& model, ScheduleStats* stats = nullptr);

/// Utility of an arbitrary action vector (no structural constraints).
double schedule_utility(const std::vector<int>& buffers, const std::vector<double>& rates,
                        const std::vector<Action>& actions, MccaModel& model);

/// Memoizing wrapper keyed by the estimate vector, least-recently-used eviction.
class ScheduleCache {
public:
    explicit ScheduleCache(std::size_t capacity = 100000) : capacity_(capacity) {}
    const JointSchedule& get(const std::vector<int>& buffers, const std::vector<double>& rates,
                             MccaModel& model);
    std::size_t size() const { return map_.size(); }
    std::int64_t hits() const { return hits_; }

private:
    struct Hash {
        std::size_t operator()(const std::vector<int>& v) const;
    };
    using Order = std::list<std::vector<int>>;
    std::size_t capacity_;
    Order order_;
    std::unordered_map<std::vector<int>, std::pair<JointSchedule, Order::iterator>, Hash> map_;
    std::int64_t hits_ = 0;
};

/// Beacon encoding: "a,a,...;node:slot,node:slot" with action codes 1..4.
std::string beacon_payload(const JointSchedule& s);

struct PayloadError {
    std::size_t offset = 0;
    std::string message;
};

/// Parses a payload; on failure returns nullopt and fills `error`.
std::optional<JointSchedule> parse_beacon_payload(const std::string& text, PayloadError* error = nullptr);

/// Exact joint MDP over all buffer vectors. Oracle only.
struct JointPolicy {
    int nodes = 0;
    int buffer_max = 0;
    std::vector<double> value;                 ///< by joint state index
    std::vector<std::vector<Action>> action;   ///< by joint state index
    int iterations = 0;

    static int encode(const std::vector<int>& buffers, int buffer_max);
    static std::vector<int> decode(int index, int nodes, int buffer_max);
};

inline constexpr int kJointStateLimit = 10000;

FiniteMdp build_joint_mdp(MccaModel& model, const std::vector<TrafficSpec>& traffic);
JointPolicy exact_joint_policy(MccaModel& model, const std::vector<TrafficSpec>& traffic, double gamma,
                               double epsilon = 1e-6);

}  // namespace hybridmac
