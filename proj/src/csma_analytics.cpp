#include "hybridmac/csma_analytics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <sstream>

#include "hybridmac/fading.hpp"

namespace hybridmac {

double effective_collision(double p_c, double theta) { return p_c * (1.0 - theta) + theta; }

double virtual_cs(double p_c_eff, int nodes) {
    if (nodes < 2) return 0.0;
    return 1.0 - std::pow(1.0 - p_c_eff, 1.0 / static_cast<double>(nodes - 1));
}

double goodput(double alpha, double beta, double p_cs, double p_cs_virtual, int nodes) {
    return alpha * beta * p_cs * std::pow(1.0 - p_cs_virtual, std::max(nodes - 1, 0));
}

double stage_advance_probability(double alpha, double beta, double p_defer) {
    return (1.0 - alpha * beta) * (1.0 - p_defer);
}

double p_discard(double phi, double p_c_eff, int max_backoffs, int max_retries) {
    const double exhaust = std::pow(phi, max_backoffs + 1);
    const double ratio = p_c_eff * (1.0 - exhaust);
    if (ratio >= 1.0) return exhaust * static_cast<double>(max_retries + 1);
    return exhaust * (1.0 - std::pow(ratio, max_retries + 1)) / (1.0 - ratio);
}

double p_drop(double p_c_eff, int max_retries) { return std::pow(p_c_eff, max_retries + 1); }

double mac_throughput(double kappa, double discard, double drop, Ubp cap_len) {
    if (discard >= 1.0 || drop >= 1.0) {
        std::ostringstream os;
        os << "CAP throughput undefined: P_discard=" << discard << " P_drop=" << drop;
        throw SaturationCollapse(os.str());
    }
    return kappa * static_cast<double>(cap_len) / ((1.0 - discard) * (1.0 - drop));
}

double deferral_waste(Ubp tx_len) { return (static_cast<double>(tx_len) + 2.0) / 2.0; }

ChainRates evaluate_backoff_chain(const ChainInputs& in) {
    const MacParams& mac = in.mac;
    const int m = mac.max_backoffs;
    const int tx = m + 1;
    const int discard = m + 2;
    const int size = m + 3;
    const double pd = std::clamp(in.p_defer, 0.0, 1.0);
    const double ab = std::clamp(in.alpha * in.beta, 0.0, 1.0);
    const double q = std::clamp(in.p_retry, 0.0, 1.0);

    ChainRates out;
    if (pd >= 1.0) return out;  // every attempt is deferred, nothing is ever sent

    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(size, size);
    Eigen::VectorXd time = Eigen::VectorXd::Zero(size);
    const double busy = (1.0 - pd) * (1.0 - ab);
    for (int i = 0; i <= m; ++i) {
        p(i, 0) += pd;
        p(i, tx) += (1.0 - pd) * ab;
        if (i < m)
            p(i, i + 1) += busy;
        else
            p(i, mac.drop_enabled ? discard : m) += busy;
        time(i) = (mac.cw(i) - 1) / 2.0 + pd * deferral_waste(in.tx_len) + (1.0 - pd) * (1.0 + in.alpha);
    }
    p(tx, 0) = 1.0;
    p(discard, 0) = 1.0;
    time(tx) = static_cast<double>(in.tx_len);

    // Stationary distribution of the embedded jump chain.
    Eigen::MatrixXd a = p.transpose() - Eigen::MatrixXd::Identity(size, size);
    a.row(size - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(size);
    rhs(size - 1) = 1.0;
    Eigen::VectorXd pi = a.fullPivLu().solve(rhs);

    const double denom = pi.dot(time);
    if (!(denom > 0.0)) return out;
    double cca = 0.0;
    for (int i = 0; i <= m; ++i) cca += pi(i) * (1.0 - pd);
    out.cca_rate = cca / denom;
    out.tx_rate = pi(tx) / denom;
    out.success_rate = out.tx_rate * (1.0 - q);
    out.discard_rate = pi(discard) / denom;
    if (mac.drop_enabled) {
        const double rounds = pi(tx) + pi(discard);
        const double fail = rounds > 0.0 ? q * pi(tx) / rounds : 0.0;
        double per_packet = 0.0, term = 1.0;
        for (int r = 0; r <= mac.max_retries; ++r, term *= fail) per_packet += term;
        out.packet_rate = rounds / denom / per_packet;
    } else {
        out.packet_rate = out.success_rate;
    }
    return out;
}

namespace {

constexpr double kTiny = 1e-300;

// Idle/busy renewal view of the channel as heard by one node. CCA rates are
// taken over the time each node is not itself transmitting.
struct ChannelView {
    double alpha = 1.0;
    double beta = 1.0;
};

ChannelView channel_view(double own, double others_any, Ubp tx_len) {
    const double any = 1.0 - (1.0 - own) * (1.0 - others_any);
    if (any <= kTiny) return {};
    const double idle = (1.0 + any) / any;  // mean idle run between transmissions
    const double foreign = static_cast<double>(tx_len) * (1.0 - std::min(1.0, own / any));
    ChannelView v;
    v.alpha = idle / (idle + foreign);
    v.beta = 1.0 - others_any / (1.0 + any);
    return v;
}

// Probability that each node makes its first assessment in a given idle UBP.
// Assessments that find the channel idle (rate tau_j alpha_j) are spread over
// the idle share of time. That share follows from the busy-period rate, where
// nodes starting in the same UBP share one busy period:
//   nu = sum_k s_k E[1 / (1 + X_k)],  X_k = sum_{j != k} Bernoulli(x_j),
//   E[1 / (1 + X_k)] = int_0^1 prod_{j != k} (1 - x_j + x_j t) dt,
//   idle = 1 - T_tx nu.
struct IdleAttempts {
    std::vector<double> x;
    double idle = 1.0;
};

// Gauss-Legendre rule on [0, 1]; exact for polynomials of degree < 2 points.
struct Quadrature {
    std::vector<double> t, w;
};

Quadrature gauss_legendre01(int points) {
    Quadrature q;
    for (int i = 1; i <= points; ++i) {
        double x = std::cos(std::numbers::pi * (i - 0.25) / (points + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= points; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = points * (x * p1 - p0) / (x * x - 1.0);
            const double step = p1 / dp;
            x -= step;
            if (std::abs(step) < 1e-16) break;
        }
        q.t.push_back(0.5 * (1.0 - x));
        q.w.push_back(1.0 / ((1.0 - x * x) * dp * dp));
    }
    return q;
}

double busy_period_rate(const std::vector<double>& x, const std::vector<double>& start, const Quadrature& q) {
    const std::size_t n = x.size();
    double rate = 0.0;
    for (std::size_t i = 0; i < q.t.size(); ++i) {
        const double t = q.t[i];
        double all = 1.0;
        for (double xj : x) all *= 1.0 - xj + xj * t;
        for (std::size_t k = 0; k < n; ++k) rate += q.w[i] * start[k] * all / (1.0 - x[k] + x[k] * t);
    }
    return rate;
}

IdleAttempts idle_attempts(const std::vector<double>& pass, const std::vector<double>& start, Ubp tx_len) {
    constexpr double kMaxAttempt = 1.0 - 1e-12;
    IdleAttempts out;
    auto attempts = [&](double idle) {
        std::vector<double> x(pass.size());
        for (std::size_t j = 0; j < pass.size(); ++j) x[j] = std::min(pass[j] / idle, kMaxAttempt);
        return x;
    };
    // excess(idle) = idle - (1 - T_tx nu(idle)) is increasing in idle.
    const auto q = gauss_legendre01(static_cast<int>(pass.size()) / 2 + 1);
    auto excess = [&](double idle) {
        return idle - 1.0 + static_cast<double>(tx_len) * busy_period_rate(attempts(idle), start, q);
    };
    double lo = 1e-12, hi = 1.0;
    if (excess(lo) >= 0.0) {
        hi = lo;
    } else {
        for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
            const double mid = 0.5 * (lo + hi);
            (excess(mid) < 0.0 ? lo : hi) = mid;
        }
    }
    out.idle = hi;
    out.x = attempts(hi);
    return out;
}

struct NodeEval {
    double alpha = 1.0, beta = 1.0, p_c = 0.0, p_c_eff = 0.0, hidden = 0.0;
    ChainRates rates;
};

class FixedPoint {
public:
    FixedPoint(std::span<const ContenderSpec> nodes, Ubp cap_len, Ubp tx_len,
               const HiddenTopology* topo)
        : nodes_(nodes), cap_len_(cap_len), tx_len_(tx_len), topo_(topo),
          p_defer_(static_cast<double>(tx_len) / static_cast<double>(cap_len)) {}

    double p_defer() const { return p_defer_; }

    NodeEval evaluate(int n, const std::vector<double>& tau, const std::vector<double>& start,
                      const std::vector<double>& idle_attempt) const {
        const int count = static_cast<int>(nodes_.size());
        std::vector<double> sense(static_cast<std::size_t>(count));
        for (int j = 0; j < count; ++j) {
            const double busy_self = static_cast<double>(tx_len_) * start[static_cast<std::size_t>(j)];
            sense[static_cast<std::size_t>(j)] =
                std::min(1.0, tau[static_cast<std::size_t>(j)] / std::max(1e-12, 1.0 - busy_self));
        }
        const double own = sense[static_cast<std::size_t>(n)];
        auto others_any = [&](const std::vector<int>& set) {
            double quiet = 1.0;
            for (int j : set) quiet *= 1.0 - sense[static_cast<std::size_t>(j)];
            return 1.0 - quiet;
        };

        NodeEval e;
        double p_quiet = 1.0;
        for (int j = 0; j < count; ++j)
            if (j != n) p_quiet *= 1.0 - idle_attempt[static_cast<std::size_t>(j)];
        e.p_c = 1.0 - p_quiet;

        double theta = nodes_[static_cast<std::size_t>(n)].theta;
        if (topo_ != nullptr && !topo_->hidden[static_cast<std::size_t>(n)].empty()) {
            e.alpha = alpha_with_hidden(n, *topo_, [&](const std::vector<int>& s) {
                return channel_view(own, others_any(s), tx_len_).alpha;
            });
            e.beta = alpha_with_hidden(n, *topo_, [&](const std::vector<int>& s) {
                return channel_view(own, others_any(s), tx_len_).beta;
            });
            e.hidden = hidden_collision(n, *topo_, [&](const std::vector<int>& s) {
                std::vector<int> rest;
                for (int j : s)
                    if (j != n) rest.push_back(j);
                return 1.0 - channel_view(own, others_any(rest), tx_len_).alpha;
            });
        } else {
            std::vector<int> all;
            for (int j = 0; j < count; ++j)
                if (j != n) all.push_back(j);
            auto v = channel_view(own, others_any(all), tx_len_);
            e.alpha = v.alpha;
            e.beta = v.beta;
        }
        if (topo_ != nullptr) theta = topo_->outage[static_cast<std::size_t>(n)];
        e.p_c_eff = fading_adjusted_collision(e.p_c, e.hidden, theta);

        ChainInputs in;
        in.alpha = e.alpha;
        in.beta = e.beta;
        in.p_retry = e.p_c_eff;
        in.p_defer = p_defer_;
        in.tx_len = tx_len_;
        in.mac = nodes_[static_cast<std::size_t>(n)].mac;
        e.rates = evaluate_backoff_chain(in);
        return e;
    }

private:
    std::span<const ContenderSpec> nodes_;
    Ubp cap_len_;
    Ubp tx_len_;
    const HiddenTopology* topo_;
    double p_defer_;
};

SaturationParams assemble(const ContenderSpec& spec, const NodeEval& e, double tau, double start,
                          int count, Ubp cap_len, double p_defer) {
    SaturationParams s;
    s.nodes = count;
    s.cap_len = cap_len;
    s.theta = spec.theta;
    s.alpha = e.alpha;
    s.beta = e.beta;
    s.p_cs = tau;
    s.tx_rate = start;
    s.p_c = count > 1 ? e.p_c : 0.0;
    s.p_c_eff = e.p_c_eff;
    s.p_cs_virtual = virtual_cs(e.p_c_eff, count);
    // Written with P~_c directly so that a lone node still sees its outage.
    s.kappa = e.alpha * e.beta * tau * (1.0 - e.p_c_eff);
    s.p_defer = p_defer;
    s.phi = stage_advance_probability(e.alpha, e.beta, p_defer);
    s.hidden = e.hidden;
    if (spec.mac.drop_enabled) {
        s.p_discard = p_discard(s.phi, e.p_c_eff, spec.mac.max_backoffs, spec.mac.max_retries);
        s.p_drop = p_drop(e.p_c_eff, spec.mac.max_retries);
    }
    try {
        s.phi_cap = mac_throughput(s.kappa, s.p_discard, s.p_drop, cap_len);
    } catch (const SaturationCollapse&) {
        // Every packet is lost; report the chain's drain rate instead.
        s.phi_cap = e.rates.packet_rate * static_cast<double>(cap_len);
    }
    return s;
}

}  // namespace

HeterogeneousResult solve_heterogeneous(std::span<const ContenderSpec> nodes, Ubp cap_len,
                                        Ubp tx_len, const HiddenTopology* topology,
                                        const SolverOptions& opts) {
    const int count = static_cast<int>(nodes.size());
    if (count < 1) throw ConfigError("at least one contender is required");
    if (tx_len < 1) throw ConfigError("T_tx must be >= 1");
    if (cap_len < tx_len)
        throw ConfigError("T_cap must be >= T_tx, got T_cap=" + std::to_string(cap_len));
    for (const auto& n : nodes) {
        n.mac.validate();
        if (!(n.theta >= 0.0 && n.theta <= 1.0)) throw ConfigError("theta must lie in [0, 1]");
    }
    if (topology != nullptr) {
        topology->validate();
        if (topology->size() != count) throw ConfigError("topology size differs from node count");
    }

    FixedPoint fp(nodes, cap_len, tx_len, topology);
    const auto width = static_cast<std::size_t>(count);
    // State per node: assessment rate, transmission start rate and the rate of
    // first assessments that find the channel idle.
    std::vector<double> tau(width), start(width), pass(width);
    for (std::size_t n = 0; n < width; ++n) {
        tau[n] = 1.0 / ((nodes[n].mac.cw(0) + 1) / 2.0 + 1.0);
        start[n] = 0.5 * tau[n];
        pass[n] = 0.5 * tau[n];
    }

    std::vector<NodeEval> evals(width);
    IdleAttempts attempts;
    double residual = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        residual = 0.0;
        attempts = idle_attempts(pass, start, tx_len);
        for (int n = 0; n < count; ++n) {
            const auto idx = static_cast<std::size_t>(n);
            evals[idx] = fp.evaluate(n, tau, start, attempts.x);
            const auto& r = evals[idx].rates;
            residual = std::max({residual, std::abs(r.cca_rate - tau[idx]), std::abs(r.tx_rate - start[idx]),
                                 std::abs(r.cca_rate * evals[idx].alpha - pass[idx])});
        }
        if (residual < opts.tolerance) break;
        for (std::size_t n = 0; n < width; ++n) {
            tau[n] += opts.damping * (evals[n].rates.cca_rate - tau[n]);
            start[n] += opts.damping * (evals[n].rates.tx_rate - start[n]);
            pass[n] += opts.damping * (evals[n].rates.cca_rate * evals[n].alpha - pass[n]);
        }
    }
    if (!(residual < opts.tolerance)) {
        std::ostringstream os;
        os << "saturation fixed point did not converge after " << opts.max_iterations
           << " iterations, residual " << residual;
        throw ConvergenceError(os.str(), residual);
    }

    HeterogeneousResult out;
    out.iterations = it + 1;
    out.residual = residual;
    for (int n = 0; n < count; ++n) {
        const auto idx = static_cast<std::size_t>(n);
        auto s = assemble(nodes[idx], evals[idx], tau[idx], start[idx], count, cap_len, fp.p_defer());
        s.iterations = out.iterations;
        s.residual = residual;
        s.p_attempt_idle = attempts.x[idx];
        s.idle_share = attempts.idle;
        out.nodes.push_back(s);
        out.throughput.push_back(evals[idx].alpha * evals[idx].beta * tau[idx] * (1.0 - evals[idx].p_c));
    }
    return out;
}

SaturationParams solve_saturation(int nodes, Ubp cap_len, Ubp tx_len, const MacParams& mac,
                                  double theta, const SolverOptions& opts) {
    if (nodes < 1) throw ConfigError("N must be >= 1");
    std::vector<ContenderSpec> specs(static_cast<std::size_t>(nodes), ContenderSpec{mac, theta});
    return solve_heterogeneous(specs, cap_len, tx_len, nullptr, opts).nodes.front();
}

double saturation_residual(const SaturationParams& sat, Ubp tx_len, const MacParams& mac) {
    std::vector<ContenderSpec> specs(static_cast<std::size_t>(sat.nodes), ContenderSpec{mac, sat.theta});
    FixedPoint fp(specs, sat.cap_len, tx_len, nullptr);
    std::vector<double> tau(specs.size(), sat.p_cs), starts(specs.size(), sat.tx_rate),
        pass(specs.size(), sat.p_cs * sat.alpha);
    const auto attempts = idle_attempts(pass, starts, tx_len);
    const auto e = fp.evaluate(0, tau, starts, attempts.x);
    return std::max({std::abs(e.rates.cca_rate - sat.p_cs), std::abs(e.rates.tx_rate - sat.tx_rate),
                     std::abs(e.rates.cca_rate * e.alpha - sat.p_cs * sat.alpha)});
}

}  // namespace hybridmac
