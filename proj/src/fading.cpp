#include "hybridmac/fading.hpp"

#include <cmath>
#include <string>

#include "hybridmac/core.hpp"

namespace hybridmac {

namespace {

double shadowing_tail(double margin_db, double sigma) {
    return 1.0 - 0.5 * std::erfc(-margin_db / (std::sqrt(2.0) * sigma));
}

}  // namespace

double default_path_loss_db(double meters) {
    const double mm = meters * 1000.0;
    return 27.6 * std::log10(mm) + 46.5 * std::log10(2400.0) - 157.0;
}

void FadingEnv::validate() const {
    if (!(shadowing_sigma > 0.0)) throw ConfigError("shadowing sigma must be > 0");
    if (!path_loss_db) throw ConfigError("path loss function is missing");
    auto finite = [](const Position& p) { return std::isfinite(p.x) && std::isfinite(p.y); };
    if (!finite(coordinator)) throw ConfigError("coordinator position must be finite");
    for (const auto& p : nodes)
        if (!finite(p)) throw ConfigError("node positions must be finite");
}

double distance(const Position& a, const Position& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double outage_probability(const FadingEnv& env, double meters) {
    if (!(env.shadowing_sigma > 0.0)) throw ConfigError("shadowing sigma must be > 0");
    return shadowing_tail(env.tx_power_db - env.path_loss_db(meters) - env.rx_threshold_db,
                          env.shadowing_sigma);
}

double pairwise_hidden(const FadingEnv& env, double meters) {
    if (!(env.shadowing_sigma > 0.0)) throw ConfigError("shadowing sigma must be > 0");
    return shadowing_tail(env.tx_power_db - env.path_loss_db(meters) - env.cs_threshold_db,
                          env.shadowing_sigma);
}

void HiddenTopology::validate() const {
    const auto n = h.size();
    if (hidden.size() != n || outage.size() != n)
        throw ConfigError("hidden topology tables disagree in size");
    if (!aggregate.empty() && aggregate.size() != n)
        throw ConfigError("hidden topology aggregate has the wrong size");
    for (std::size_t i = 0; i < n; ++i) {
        if (h[i].size() != n) throw ConfigError("hidden matrix must be square");
        if (!(outage[i] >= 0.0 && outage[i] <= 1.0)) throw ConfigError("outage must lie in [0, 1]");
        std::vector<int> expect;
        for (std::size_t j = 0; j < n; ++j) {
            double v = h[i][j];
            if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("hidden probability must lie in [0, 1]");
            if (i == j && v != 0.0) throw ConfigError("a node cannot be hidden from itself");
            if (v > 0.0) expect.push_back(static_cast<int>(j));
        }
        if (expect != hidden[i])
            throw ConfigError("hidden set of node " + std::to_string(i) +
                              " does not match its positive H entries");
    }
}

HiddenTopology HiddenTopology::none(std::span<const double> outage) {
    HiddenTopology t;
    const auto n = outage.size();
    t.h.assign(n, std::vector<double>(n, 0.0));
    t.hidden.assign(n, {});
    t.outage.assign(outage.begin(), outage.end());
    return t;
}

HiddenTopology build_topology(const FadingEnv& env) {
    env.validate();
    const auto n = env.nodes.size();
    HiddenTopology t;
    t.h.assign(n, std::vector<double>(n, 0.0));
    t.hidden.assign(n, {});
    t.outage.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        t.outage[i] = outage_probability(env, distance(env.nodes[i], env.coordinator));
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double v = pairwise_hidden(env, distance(env.nodes[i], env.nodes[j]));
            if (v < kHiddenFloor) v = 0.0;
            t.h[i][j] = v;
            if (v > 0.0) t.hidden[i].push_back(static_cast<int>(j));
        }
    }
    return t;
}

void for_each_hidden_subset(int n, const HiddenTopology& topo,
                            const std::function<void(const std::vector<int>&, double)>& fn) {
    const auto& psi = topo.hidden.at(static_cast<std::size_t>(n));
    if (psi.size() > static_cast<std::size_t>(kMaxHiddenSet))
        throw ConfigError("hidden set of node " + std::to_string(n) + " has " +
                          std::to_string(psi.size()) + " members, enumeration limit is " +
                          std::to_string(kMaxHiddenSet));
    const auto& row = topo.h[static_cast<std::size_t>(n)];
    const std::uint32_t count = 1u << psi.size();
    std::vector<int> subset;
    for (std::uint32_t mask = 0; mask < count; ++mask) {
        subset.clear();
        double w = 1.0;
        for (std::size_t b = 0; b < psi.size(); ++b) {
            double p = row[static_cast<std::size_t>(psi[b])];
            if (mask & (1u << b)) {
                subset.push_back(psi[b]);
                w *= p;
            } else {
                w *= 1.0 - p;
            }
        }
        fn(subset, w);
    }
}

double hidden_collision(int n, const HiddenTopology& topo,
                        const std::function<double(const std::vector<int>&)>& busy_prob) {
    double total = 0.0;
    for_each_hidden_subset(n, topo, [&](const std::vector<int>& t, double w) {
        if (t.empty() || w == 0.0) return;
        std::vector<int> s;
        s.reserve(t.size() + 1);
        bool placed = false;
        for (int j : t) {
            if (!placed && n < j) {
                s.push_back(n);
                placed = true;
            }
            s.push_back(j);
        }
        if (!placed) s.push_back(n);
        total += w * busy_prob(s);
    });
    return total;
}

double alpha_with_hidden(int n, const HiddenTopology& topo,
                         const std::function<double(const std::vector<int>&)>& alpha_by_subset) {
    double total = 0.0;
    const int size = topo.size();
    for_each_hidden_subset(n, topo, [&](const std::vector<int>& t, double w) {
        if (w == 0.0) return;
        std::vector<int> sensed;
        std::size_t k = 0;
        for (int j = 0; j < size; ++j) {
            if (k < t.size() && t[k] == j) {
                ++k;
                continue;
            }
            if (j != n) sensed.push_back(j);
        }
        total += w * alpha_by_subset(sensed);
    });
    return total;
}

double fading_adjusted_collision(double p_c, double hidden, double theta) {
    return (p_c * (1.0 - hidden) + hidden) * (1.0 - theta) + theta;
}

}  // namespace hybridmac
