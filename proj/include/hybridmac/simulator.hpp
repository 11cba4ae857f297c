// UBP-granularity simulation of a beaconed star network.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hybridmac/core.hpp"
#include "hybridmac/energy.hpp"
#include "hybridmac/fading.hpp"
#include "hybridmac/mdca.hpp"
#include "hybridmac/mcca.hpp"
#include "hybridmac/traffic.hpp"

namespace hybridmac {

enum class Scheme { Mdca, Mcca, Csma, Csma2, Lqf };

std::string scheme_name(Scheme s);
Scheme parse_scheme(const std::string& text);

struct Scenario {
    SuperframeConfig cfg;
    MacParams mac;
    std::vector<TrafficSpec> traffic;  ///< one per node
    Scheme scheme = Scheme::Csma2;
    int buffer_max = 5;
    int horizon = 5000;
    std::uint64_t seed = 1;

    /// Per-node outage probability; empty means the topology's values, or 0.
    std::vector<double> outage;
    std::optional<HiddenTopology> topology;
    bool hidden_fixed_per_run = false;
    /// Ack frames may also be lost to outage (second independent draw).
    bool ack_outage = false;
    /// Every node's buffer is refilled beyond what one CAP can drain.
    bool saturation = false;

    EnergyModel energy;
    /// Required for MDCA: one policy shared by all nodes, or one per node.
    std::vector<std::shared_ptr<const MdpPolicy>> policies;

    const MdpPolicy& policy_of(int node) const;

    int nodes() const { return static_cast<int>(traffic.size()); }
    double outage_of(int node) const;
    void validate() const;
};

struct NodeMetrics {
    std::int64_t generated = 0;
    std::int64_t delivered = 0;
    std::int64_t discarded = 0;
    std::int64_t dropped = 0;
    std::int64_t in_buffer = 0;
    std::int64_t cap_sent = 0;
    std::int64_t cfp_sent = 0;
    std::int64_t cap_delivered = 0;
    std::int64_t collisions = 0;  ///< failed CAP exchanges (collision or outage)
    std::int64_t cca1 = 0;       ///< first clear-channel assessments
    std::int64_t cca1_idle = 0;
    std::int64_t cca2 = 0;
    std::int64_t cca2_idle = 0;
    std::int64_t deferrals = 0;  ///< attempts pushed past the CAP end
    std::int64_t grants = 0;
    std::int64_t evictions = 0;
    double delay_total_ubp = 0.0;  ///< summed over delivered packets
    double energy_j = 0.0;

    bool operator==(const NodeMetrics&) const = default;
};

struct SimMetrics {
    std::int64_t generated = 0;
    std::int64_t delivered = 0;
    std::int64_t discarded = 0;
    std::int64_t dropped = 0;
    std::int64_t in_buffer = 0;
    std::int64_t cap_delivered = 0;
    std::int64_t collisions = 0;
    double pdr = 0.0;
    double delay_mean = 0.0;  ///< UBP; NaN without deliveries
    Ubp delay_min = 0;
    Ubp delay_max = 0;
    double energy_nodes_j = 0.0;
    double energy_coordinator_j = 0.0;
    double energy_total_j = 0.0;
    double energy_per_packet_j = 0.0;  ///< NaN without deliveries
    int superframes = 0;
    std::vector<NodeMetrics> per_node;

    bool conserved() const { return generated == delivered + discarded + dropped + in_buffer; }
    /// Successful CAP exchanges per node per superframe.
    double cap_goodput_per_node() const;
    bool operator==(const SimMetrics&) const;
};

struct TraceRow {
    int superframe = 0;
    int node = 0;
    Action action = Action::Defer;
    int cap_sent = 0;
    int cfp_sent = 0;
    int collisions = 0;
    double energy_j = 0.0;
};

inline constexpr const char* kTraceHeader = "superframe\tnode\taction\tcap_sent\tcfp_sent\tcollisions\tenergy_j";
std::string format_trace_row(const TraceRow& row);

SimMetrics run(const Scenario& scenario, std::vector<TraceRow>* trace = nullptr);

struct MetricSummary {
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
};

struct ReplicatedSummary {
    int runs = 0;
    MetricSummary pdr;
    MetricSummary delay_ubp;
    MetricSummary energy_per_packet_j;
    MetricSummary energy_total_j;
    MetricSummary cap_goodput;
    std::vector<SimMetrics> metrics;  ///< in seed order
};

MetricSummary summarize(const std::vector<double>& values);
/// Runs the scenario once per seed; runs may execute on `threads` workers.
ReplicatedSummary run_replicated(const Scenario& scenario, const std::vector<std::uint64_t>& seeds,
                                 int threads = 1);

/// Slot assignment used by the centralized baseline: the M largest estimates
/// above zero, ties to the lower index.
std::vector<int> lqf_slot_holders(const std::vector<int>& estimates, int cfp_slots);

}  // namespace hybridmac
