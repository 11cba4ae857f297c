#include "hybridmac/mdca.hpp"

#include <algorithm>
#include <cmath>

namespace hybridmac {

double energy_per_cap_packet(double p_c, double phi, int max_backoffs, int max_retries, double xi_x,
                             double xi_c) {
    double rounds = 0.0, term = 1.0;
    for (int r = 0; r <= max_retries; ++r, term *= p_c) rounds += term;
    double sensings = 0.0;
    term = 1.0;
    for (int i = 0; i <= max_backoffs; ++i, term *= phi) sensings += term;
    return rounds * xi_x + rounds * sensings * xi_c;
}

MdcaContext make_mdca_context(const SaturationParams& sat, const MdcaParams& params) {
    params.cfg.validate();
    params.mac.validate();
    if (params.buffer_max < 1) throw ConfigError("B_max must be >= 1");
    if (!(params.gamma >= 0.0 && params.gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (!(params.xi_x > 0.0 && params.xi_c > 0.0)) throw ConfigError("energy weights must be > 0");

    MdcaContext ctx;
    ctx.sat = sat;
    ctx.cfg = params.cfg;
    ctx.mac = params.mac;
    ctx.arrivals = arrival_pmf(params.traffic, params.cfg.interval(), params.buffer_max);
    ctx.buffer_max = params.buffer_max;
    ctx.gamma = params.gamma;
    ctx.xi_x = params.xi_x;
    ctx.xi_c = params.xi_c;
    ctx.cap_usable = params.cfg.cap_len() >= params.cfg.tx_len;
    if (ctx.cap_usable) {
        ctx.kappa_sf = sat.kappa * static_cast<double>(params.cfg.cap_len());
        ctx.phi_cap_sf = params.lossless_throughput ? ctx.kappa_sf : sat.phi_cap;
    }
    ctx.xi_p = energy_per_cap_packet(sat.p_c_eff, sat.phi, params.mac.max_backoffs,
                                     params.mac.max_retries, params.xi_x, params.xi_c);
    return ctx;
}

MdcaContext make_mdca_context(int nodes, const MdcaParams& params) {
    params.cfg.validate();
    SaturationParams sat;
    if (params.cfg.cap_len() >= params.cfg.tx_len)
        sat = solve_saturation(nodes, params.cfg.cap_len(), params.cfg.tx_len, params.mac, params.theta);
    return make_mdca_context(sat, params);
}

double mdca_throughput(int s, Action a, const MdcaContext& ctx) {
    const double b = s;
    const double eta = ctx.cfg.packets_per_slot;
    switch (a) {
        case Action::Defer: return 0.0;
        case Action::Cap: return std::min(ctx.phi_cap_sf, b);
        case Action::Cfp: return std::min(eta, b);
        case Action::CapCfp: return std::min(ctx.phi_cap_sf, std::max(b - eta, 0.0)) + std::min(eta, b);
    }
    return 0.0;
}

double mdca_energy(int s, Action a, const MdcaContext& ctx) {
    const double b = s;
    const double eta = ctx.cfg.packets_per_slot;
    switch (a) {
        case Action::Defer: return 0.0;
        case Action::Cap: return std::min(ctx.kappa_sf, b) * ctx.xi_p;
        case Action::Cfp: return std::min(eta, b) * 2.0 * ctx.xi_x;
        case Action::CapCfp:
            return std::min(ctx.kappa_sf, std::max(b - eta, 0.0)) * ctx.xi_p + std::min(eta, b) * 2.0 * ctx.xi_x;
    }
    return 0.0;
}

double mdca_bandwidth_cost(int s, Action a, const MdcaContext& ctx) {
    const int eta = ctx.cfg.packets_per_slot;
    if (uses_slot(a) && s <= eta) return 1.0 - static_cast<double>(s) / eta;
    return 0.0;
}

double mdca_reward(int s, Action a, const MdcaContext& ctx) {
    const double scale = std::max(s, 1);
    const double xi_max = scale * ctx.xi_p;
    return (mdca_throughput(s, a, ctx) - s) / scale - mdca_energy(s, a, ctx) / xi_max -
           mdca_bandwidth_cost(s, a, ctx);
}

std::vector<double> transition_pmf(int s, double mu, const ArrivalPmf& arrivals, int buffer_max) {
    if (arrivals.x_max < buffer_max) throw ConfigError("arrival pmf is truncated below B_max");
    std::vector<double> out(static_cast<std::size_t>(buffer_max) + 1, 0.0);
    for (int next = 0; next < buffer_max; ++next) {
        const int x = static_cast<int>(std::ceil(next - s + mu));
        if (x >= 0) out[static_cast<std::size_t>(next)] = arrivals.at(x);
    }
    const int x = static_cast<int>(std::ceil(buffer_max - s + mu));
    out[static_cast<std::size_t>(buffer_max)] = tail_mass(arrivals, x);
    return out;
}

std::vector<double> transition_pmf(int s, Action a, const MdcaContext& ctx) {
    return transition_pmf(s, mdca_throughput(s, a, ctx), ctx.arrivals, ctx.buffer_max);
}

bool mdca_action_available(Action a, const MdcaContext& ctx) {
    if (uses_slot(a) && ctx.cfg.cfp_slots == 0) return false;
    if (uses_cap(a) && !ctx.cap_usable) return false;
    return true;
}

FiniteMdp build_mdca_mdp(const MdcaContext& ctx) {
    const int states = ctx.buffer_max + 1;
    FiniteMdp mdp(states, 4);
    mdp.allowed.assign(static_cast<std::size_t>(states) * 4, 0);
    for (int s = 0; s < states; ++s)
        for (Action a : kAllActions) {
            const int ai = action_index(a);
            if (!mdca_action_available(a, ctx)) continue;
            mdp.allowed[static_cast<std::size_t>(s) * 4 + static_cast<std::size_t>(ai)] = 1;
            mdp.r(s, ai) = mdca_reward(s, a, ctx);
            auto row = transition_pmf(s, a, ctx);
            for (int t = 0; t < states; ++t) mdp.p(s, ai, t) = row[static_cast<std::size_t>(t)];
        }
    return mdp;
}

Action MdpPolicy::at(int buffer) const {
    if (action.empty()) throw ConfigError("empty policy");
    const int idx = std::clamp(buffer, 0, static_cast<int>(action.size()) - 1);
    return action[static_cast<std::size_t>(idx)];
}

MdpPolicy solve_mdca(const MdcaContext& ctx, double epsilon) {
    auto mdp = build_mdca_mdp(ctx);
    auto vi = value_iteration(mdp, ctx.gamma, epsilon);
    MdpPolicy out;
    out.value = vi.value;
    for (int a : vi.policy) out.action.push_back(action_from_index(a));
    out.iterations = vi.iterations;
    out.residual = vi.residuals.back();
    out.residuals = vi.residuals;
    return out;
}

SuperframeBehavior policy_action(Action action, int buffer, bool slot_held, int eta) {
    SuperframeBehavior b;
    b.action = action;
    const int b_cfp = std::min(eta, buffer);
    switch (action) {
        case Action::Defer:
            if (slot_held) {
                b.idle = false;
                b.dealloc = true;
            }
            break;
        case Action::Cap:
            b.idle = buffer == 0 && !slot_held;
            b.cap_packets = buffer;
            b.dealloc = slot_held;
            break;
        case Action::Cfp:
            b.idle = false;
            if (slot_held) {
                b.cfp_packets = b_cfp;
            } else {
                b.request_slot = true;
                b.halt_cap_on_grant = true;
                b.cap_packets = buffer;
            }
            break;
        case Action::CapCfp:
            b.idle = false;
            if (slot_held) {
                b.cap_packets = std::max(buffer - eta, 0);
                b.cfp_packets = b_cfp;
            } else {
                b.request_slot = true;
                b.cap_packets = buffer;
                b.reserve_after_grant = eta;
            }
            break;
    }
    return b;
}

SuperframeBehavior policy_action(const MdpPolicy& policy, int buffer, bool slot_held, int eta) {
    return policy_action(policy.at(buffer), buffer, slot_held, eta);
}

}  // namespace hybridmac
