// Finite discounted MDPs with dense tables, solved by value iteration.
#pragma once

#include <vector>

namespace hybridmac {

struct FiniteMdp {
    int states = 0;
    int actions = 0;
    std::vector<double> reward;       ///< [s * actions + a]
    std::vector<double> transition;   ///< [(s * actions + a) * states + s']
    std::vector<char> allowed;        ///< [s * actions + a]; empty means all allowed

    FiniteMdp() = default;
    FiniteMdp(int states, int actions);

    double& r(int s, int a) { return reward[index(s, a)]; }
    double r(int s, int a) const { return reward[index(s, a)]; }
    double& p(int s, int a, int next) { return transition[index(s, a) * static_cast<std::size_t>(states) + static_cast<std::size_t>(next)]; }
    double p(int s, int a, int next) const { return transition[index(s, a) * static_cast<std::size_t>(states) + static_cast<std::size_t>(next)]; }
    bool is_allowed(int s, int a) const { return allowed.empty() || allowed[index(s, a)] != 0; }

    /// Throws ConfigError unless every allowed row is a probability vector
    /// (within `tol`) and every state has an allowed action.
    void validate(double tol = 1e-9) const;

private:
    std::size_t index(int s, int a) const {
        return static_cast<std::size_t>(s) * static_cast<std::size_t>(actions) + static_cast<std::size_t>(a);
    }
};

struct ValueIterationResult {
    std::vector<double> value;
    std::vector<int> policy;
    int iterations = 0;
    /// ||V_{k+1} - V_k||_inf for every iteration, in order.
    std::vector<double> residuals;
    double threshold = 0.0;
};

/// Q-values within this distance of the best count as a tie; the lowest action
/// index wins a tie.
inline constexpr double kArgmaxTie = 1e-12;

/// V_0 = 0; iterate until ||V_{k+1} - V_k|| < epsilon (1 - gamma) / (2 gamma).
/// gamma = 0 performs a single backup.
ValueIterationResult value_iteration(const FiniteMdp& mdp, double gamma, double epsilon,
                                     int max_iterations = 10000000);

/// Greedy policy for a value vector.
std::vector<int> greedy_policy(const FiniteMdp& mdp, double gamma, const std::vector<double>& value);

/// One Bellman optimality backup.
std::vector<double> bellman_backup(const FiniteMdp& mdp, double gamma, const std::vector<double>& value);

/// Exact value of a stationary deterministic policy: solves (I - gamma P_pi) V = R_pi.
std::vector<double> evaluate_policy(const FiniteMdp& mdp, double gamma, const std::vector<int>& policy);

}  // namespace hybridmac
