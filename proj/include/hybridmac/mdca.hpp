// Distributed channel access: each node solves a single-node MDP whose state
// is its own buffer level and whose actions are a1..a4.
#pragma once

#include <string>
#include <vector>

#include "hybridmac/core.hpp"
#include "hybridmac/csma_analytics.hpp"
#include "hybridmac/mdp.hpp"
#include "hybridmac/traffic.hpp"

namespace hybridmac {

struct MdcaParams {
    SuperframeConfig cfg;
    MacParams mac;
    TrafficSpec traffic;
    int buffer_max = 5;
    double gamma = 0.9;
    double xi_x = 1.0;   ///< energy per transmitted packet
    double xi_c = 0.1;   ///< energy per carrier sensing
    double theta = 0.0;  ///< outage probability fed to the saturation solve
    /// Take P_discard = P_drop = 0 when turning goodput into CAP throughput.
    bool lossless_throughput = true;
};

struct MdcaContext {
    SaturationParams sat;
    SuperframeConfig cfg;
    MacParams mac;
    ArrivalPmf arrivals;  ///< over one beacon interval
    int buffer_max = 5;
    double gamma = 0.9;
    double xi_x = 1.0;
    double xi_c = 0.1;

    double kappa_sf = 0.0;    ///< goodput, packets per superframe
    double phi_cap_sf = 0.0;  ///< CAP throughput, packets per superframe
    double xi_p = 0.0;        ///< expected energy of one CAP packet
    bool cap_usable = true;   ///< T_cap >= T_tx
};

/// Expected energy to get one packet through the CAP:
/// sum_{r<=W} P_c^r * (Xi_x + Xi_c * sum_{i<=m} phi^i). Finite sums keep P_c = 1
/// and phi = 1 well defined.
double energy_per_cap_packet(double p_c, double phi, int max_backoffs, int max_retries, double xi_x,
                             double xi_c);

/// Saturation solve with all `nodes` contending in the CAP of `params.cfg`.
MdcaContext make_mdca_context(int nodes, const MdcaParams& params);

/// Context from an already solved saturation record.
MdcaContext make_mdca_context(const SaturationParams& sat, const MdcaParams& params);

double mdca_throughput(int s, Action a, const MdcaContext& ctx);
double mdca_energy(int s, Action a, const MdcaContext& ctx);
double mdca_bandwidth_cost(int s, Action a, const MdcaContext& ctx);
double mdca_reward(int s, Action a, const MdcaContext& ctx);

/// Distribution of the next buffer level; entry i is P(s' = i).
std::vector<double> transition_pmf(int s, double mu, const ArrivalPmf& arrivals, int buffer_max);
std::vector<double> transition_pmf(int s, Action a, const MdcaContext& ctx);

/// True when the action can be taken in this geometry (M = 0 removes a3/a4,
/// a CAP shorter than T_tx removes a2/a4).
bool mdca_action_available(Action a, const MdcaContext& ctx);

FiniteMdp build_mdca_mdp(const MdcaContext& ctx);

struct MdpPolicy {
    std::vector<double> value;
    std::vector<Action> action;
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> residuals;

    Action at(int buffer) const;
};

MdpPolicy solve_mdca(const MdcaContext& ctx, double epsilon = 1e-6);

/// What a node does in one superframe for a policy action and its slot status.
struct SuperframeBehavior {
    Action action = Action::Defer;
    bool idle = true;             ///< nothing sent, radio off outside the beacon
    bool request_slot = false;    ///< request bit set on CAP frames
    bool halt_cap_on_grant = false;
    bool dealloc = false;         ///< send the de-allocation bit in the held slot
    int cap_packets = 0;          ///< CAP budget before any grant
    int cfp_packets = 0;          ///< data packets for the held slot
    int reserve_after_grant = 0;  ///< packets kept back for the slot once granted
};

SuperframeBehavior policy_action(Action action, int buffer, bool slot_held, int eta);
SuperframeBehavior policy_action(const MdpPolicy& policy, int buffer, bool slot_held, int eta);

}  // namespace hybridmac
