// Log-normal shadowing: link outage, pairwise hidden-node probabilities and
// the hidden-subset mixtures that feed the saturation model.
#pragma once

#include <functional>
#include <span>
#include <vector>

namespace hybridmac {

struct Position {
    double x = 0.0;
    double y = 0.0;
};

/// Indoor 2.4 GHz path loss in dB for a distance in meters.
double default_path_loss_db(double meters);

struct FadingEnv {
    double tx_power_db = 0.0;
    std::function<double(double)> path_loss_db = default_path_loss_db;
    double shadowing_sigma = 4.0;
    double rx_threshold_db = -85.0;
    double cs_threshold_db = -85.0;
    Position coordinator{};
    std::vector<Position> nodes;

    void validate() const;
};

double distance(const Position& a, const Position& b);

/// Probability that the received power falls below the receiver threshold.
double outage_probability(const FadingEnv& env, double meters);

/// Probability that two nodes `meters` apart cannot sense each other.
double pairwise_hidden(const FadingEnv& env, double meters);

inline constexpr int kMaxHiddenSet = 12;
/// Pairwise hidden probabilities below this are treated as zero.
inline constexpr double kHiddenFloor = 1e-12;

struct HiddenTopology {
    std::vector<std::vector<double>> h;       ///< h[n][j] = H_{n,j}
    std::vector<std::vector<int>> hidden;     ///< Psi_n, ascending
    std::vector<double> outage;               ///< Theta_n
    std::vector<double> aggregate;            ///< H_n, filled in by the solver

    int size() const { return static_cast<int>(h.size()); }
    void validate() const;

    /// Topology with no hidden pairs and the given per-node outage.
    static HiddenTopology none(std::span<const double> outage);
};

HiddenTopology build_topology(const FadingEnv& env);

/// Calls fn(T, weight) for every subset T of Psi_n (including the empty set),
/// weight = prod_{j in T} H_{n,j} prod_{h in Psi_n \ T} (1 - H_{n,h}).
void for_each_hidden_subset(int n, const HiddenTopology& topo,
                            const std::function<void(const std::vector<int>&, double)>& fn);

/// H_n = sum over non-empty T of weight(T) * busy_prob({n} u T). busy_prob
/// receives the set in ascending order.
double hidden_collision(int n, const HiddenTopology& topo,
                        const std::function<double(const std::vector<int>&)>& busy_prob);

/// Mixture of alpha_{n/S} over hidden-subset configurations; S is the set of
/// other nodes n can sense (all nodes except n and T), ascending.
double alpha_with_hidden(int n, const HiddenTopology& topo,
                         const std::function<double(const std::vector<int>&)>& alpha_by_subset);

double fading_adjusted_collision(double p_c, double hidden, double theta);

}  // namespace hybridmac
