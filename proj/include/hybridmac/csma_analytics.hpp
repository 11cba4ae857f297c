// Saturation model of slotted CSMA/CA during the CAP.
//
// Each node runs a staged backoff chain: a counter uniform on [0, cw_i - 1]
// counts down one UBP at a time, then two clear-channel assessments (CCA)
// run in consecutive UBPs. A busy CCA advances the stage; past stage m the
// packet is discarded (or the node stays at stage m when drops are off). An
// attempt that cannot finish before the CAP ends is deferred to the next CAP
// and restarts at stage 0. A transmission that collides or hits an outage is
// retried from stage 0, at most W times when drops are on.
//
// Per node the chain yields the per-UBP probability of starting a first CCA
// (P_cs). The idle probabilities alpha and beta come from an idle/busy
// renewal view of the shared channel driven by the other nodes' CCA rates.
// The two are solved jointly by damped fixed-point iteration.
#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "hybridmac/core.hpp"

namespace hybridmac {

struct SaturationParams {
    int nodes = 0;
    Ubp cap_len = 0;
    double theta = 0.0;

    double alpha = 1.0;        ///< P(idle at first CCA)
    double beta = 1.0;         ///< P(idle at second CCA | first idle)
    double p_cs = 0.0;         ///< per-UBP probability of starting the first CCA
    double tx_rate = 0.0;      ///< transmissions started per UBP
    double p_attempt_idle = 0.0; ///< first-CCA probability per idle UBP; collisions use this
    double idle_share = 1.0;   ///< fraction of CAP time with no transmission on air
    double p_c = 0.0;          ///< collision probability 1 - prod_{j != n}(1 - p_attempt_idle_j)
    double p_c_eff = 0.0;      ///< collision probability with outage (and hidden nodes)
    double p_cs_virtual = 0.0; ///< virtual carrier-sensing probability
    double kappa = 0.0;        ///< goodput, packets per UBP
    double p_defer = 0.0;      ///< P_d = T_tx / T_cap
    double phi = 0.0;          ///< stage-advance probability (1 - alpha beta)(1 - P_d)
    double p_discard = 0.0;
    double p_drop = 0.0;
    double phi_cap = 0.0;      ///< packets taken out of the buffer per CAP
    double hidden = 0.0;       ///< hidden-node collision probability H_n

    int iterations = 0;
    double residual = 0.0;

    /// Goodput in packets per CAP.
    double kappa_per_cap() const { return kappa * static_cast<double>(cap_len); }
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

/// Raised when discards or drops are certain and the CAP throughput is undefined.
class SaturationCollapse : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct SolverOptions {
    double tolerance = 1e-8;
    int max_iterations = 100000;
    double damping = 0.5;
};

// Closed-form pieces of the model.
double effective_collision(double p_c, double theta);
double virtual_cs(double p_c_eff, int nodes);
double goodput(double alpha, double beta, double p_cs, double p_cs_virtual, int nodes);
double stage_advance_probability(double alpha, double beta, double p_defer);
double p_discard(double phi, double p_c_eff, int max_backoffs, int max_retries);
double p_drop(double p_c_eff, int max_retries);
double mac_throughput(double kappa, double p_discard, double p_drop, Ubp cap_len);

/// Long-run rates of one node's backoff chain for fixed channel probabilities.
struct ChainRates {
    double cca_rate = 0.0;      ///< first CCAs per UBP (P_cs)
    double tx_rate = 0.0;       ///< transmissions started per UBP
    double success_rate = 0.0;  ///< successful transmissions per UBP
    double discard_rate = 0.0;  ///< packets discarded after m + 1 busy stages, per UBP
    double packet_rate = 0.0;   ///< packets leaving the buffer (any outcome) per UBP
};

struct ChainInputs {
    double alpha = 1.0;
    double beta = 1.0;
    double p_retry = 0.0;  ///< P(transmission fails), collision and outage combined
    double p_defer = 0.0;
    Ubp tx_len = 10;
    MacParams mac;
};

ChainRates evaluate_backoff_chain(const ChainInputs& in);

/// Mean UBPs lost to a deferral (tail of the CAP the attempt could not use).
double deferral_waste(Ubp tx_len);

struct HiddenTopology;

/// Per-node context for heterogeneous solves.
struct ContenderSpec {
    MacParams mac;
    double theta = 0.0;
};

struct HeterogeneousResult {
    std::vector<SaturationParams> nodes;
    /// Phi_{n|N} = alpha_n beta_n P_cs,n prod_{j != n}(1 - P_cs,j), packets per UBP.
    std::vector<double> throughput;
    int iterations = 0;
    double residual = 0.0;
};

/// Homogeneous saturation solve for `nodes` identical contenders.
SaturationParams solve_saturation(int nodes, Ubp cap_len, Ubp tx_len, const MacParams& mac,
                                  double theta, const SolverOptions& opts = {});

/// Vector fixed point over per-node P_cs. With a topology, alpha and beta are
/// mixtures over hidden-subset configurations and the retry probability is the
/// fading-adjusted collision probability.
HeterogeneousResult solve_heterogeneous(std::span<const ContenderSpec> nodes, Ubp cap_len,
                                        Ubp tx_len, const HiddenTopology* topology = nullptr,
                                        const SolverOptions& opts = {});

/// Fixed-point residual |P_cs - chain(P_cs)| of a homogeneous solution.
double saturation_residual(const SaturationParams& sat, Ubp tx_len, const MacParams& mac);

}  // namespace hybridmac
