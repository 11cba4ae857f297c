#include "hybridmac/mdp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hybridmac/core.hpp"

namespace hybridmac {

FiniteMdp::FiniteMdp(int s, int a)
    : states(s), actions(a),
      reward(static_cast<std::size_t>(s) * static_cast<std::size_t>(a), 0.0),
      transition(static_cast<std::size_t>(s) * static_cast<std::size_t>(a) * static_cast<std::size_t>(s), 0.0) {
    if (s < 1 || a < 1) throw ConfigError("an MDP needs at least one state and one action");
}

void FiniteMdp::validate(double tol) const {
    for (int s = 0; s < states; ++s) {
        bool any = false;
        for (int a = 0; a < actions; ++a) {
            if (!is_allowed(s, a)) continue;
            any = true;
            double sum = 0.0;
            for (int t = 0; t < states; ++t) {
                double v = p(s, a, t);
                if (v < -tol) throw ConfigError("negative transition probability");
                sum += v;
            }
            if (std::abs(sum - 1.0) > tol)
                throw ConfigError("transition row (" + std::to_string(s) + ", " + std::to_string(a) +
                                  ") sums to " + std::to_string(sum));
        }
        if (!any) throw ConfigError("state " + std::to_string(s) + " has no allowed action");
    }
}

namespace {

double q_value(const FiniteMdp& mdp, double gamma, const std::vector<double>& v, int s, int a) {
    double acc = 0.0;
    if (gamma != 0.0)
        for (int t = 0; t < mdp.states; ++t) acc += mdp.p(s, a, t) * v[static_cast<std::size_t>(t)];
    return mdp.r(s, a) + gamma * acc;
}

// Best Q and its action; ties within kArgmaxTie go to the lower index.
std::pair<double, int> best(const FiniteMdp& mdp, double gamma, const std::vector<double>& v, int s) {
    double top = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp.actions; ++a)
        if (mdp.is_allowed(s, a)) top = std::max(top, q_value(mdp, gamma, v, s, a));
    for (int a = 0; a < mdp.actions; ++a)
        if (mdp.is_allowed(s, a) && q_value(mdp, gamma, v, s, a) >= top - kArgmaxTie) return {top, a};
    return {top, -1};
}

}  // namespace

std::vector<double> bellman_backup(const FiniteMdp& mdp, double gamma, const std::vector<double>& value) {
    std::vector<double> next(static_cast<std::size_t>(mdp.states));
    for (int s = 0; s < mdp.states; ++s) next[static_cast<std::size_t>(s)] = best(mdp, gamma, value, s).first;
    return next;
}

std::vector<int> greedy_policy(const FiniteMdp& mdp, double gamma, const std::vector<double>& value) {
    std::vector<int> pol(static_cast<std::size_t>(mdp.states));
    for (int s = 0; s < mdp.states; ++s) pol[static_cast<std::size_t>(s)] = best(mdp, gamma, value, s).second;
    return pol;
}

ValueIterationResult value_iteration(const FiniteMdp& mdp, double gamma, double epsilon, int max_iterations) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("discount must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    mdp.validate();

    ValueIterationResult out;
    out.threshold = gamma == 0.0 ? std::numeric_limits<double>::infinity()
                                 : epsilon * (1.0 - gamma) / (2.0 * gamma);
    std::vector<double> v(static_cast<std::size_t>(mdp.states), 0.0);
    while (true) {
        auto next = bellman_backup(mdp, gamma, v);
        double diff = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) diff = std::max(diff, std::abs(next[i] - v[i]));
        v.swap(next);
        ++out.iterations;
        out.residuals.push_back(diff);
        if (diff < out.threshold) break;
        if (out.iterations >= max_iterations)
            throw std::runtime_error("value iteration hit the iteration cap, residual " + std::to_string(diff));
    }
    out.value = v;
    out.policy = greedy_policy(mdp, gamma, v);
    return out;
}

std::vector<double> evaluate_policy(const FiniteMdp& mdp, double gamma, const std::vector<int>& policy) {
    const int n = mdp.states;
    if (static_cast<int>(policy.size()) != n) throw ConfigError("policy size differs from state count");
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b(n);
    for (int s = 0; s < n; ++s) {
        const int act = policy[static_cast<std::size_t>(s)];
        if (act < 0 || act >= mdp.actions || !mdp.is_allowed(s, act))
            throw ConfigError("policy picks a disallowed action in state " + std::to_string(s));
        b(s) = mdp.r(s, act);
        for (int t = 0; t < n; ++t) a(s, t) -= gamma * mdp.p(s, act, t);
    }
    Eigen::VectorXd v = a.partialPivLu().solve(b);
    return {v.data(), v.data() + n};
}

}  // namespace hybridmac
