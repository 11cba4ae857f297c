#include "hybridmac/mcca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "hybridmac/mdca.hpp"

namespace hybridmac {

BufferLedger::BufferLedger(std::vector<double> rates, int buffer_max) : buffer_max_(buffer_max) {
    if (buffer_max < 0) throw ConfigError("B_max must be >= 0");
    for (double r : rates) {
        if (!(r >= 0.0)) throw ConfigError("ledger rates must be >= 0");
        entries_.push_back({0, 0, r});
    }
}

void BufferLedger::report(int n, int buffer) {
    auto& e = entries_.at(static_cast<std::size_t>(n));
    e.reported = std::clamp(buffer, 0, buffer_max_);
    e.age = 0;
}

void BufferLedger::tick() {
    for (auto& e : entries_) ++e.age;
}

int BufferLedger::raw_estimate(int n) const {
    const auto& e = entry(n);
    return e.reported + static_cast<int>(std::floor(e.rate * e.age));
}

int BufferLedger::estimate(int n) const { return estimate_buffer(entry(n), buffer_max_); }

int estimate_buffer(const LedgerEntry& e, int buffer_max) {
    return std::min(e.reported + static_cast<int>(std::floor(e.rate * e.age)), buffer_max);
}

SaturationTable::SaturationTable(const SuperframeConfig& cfg, MacParams mac, double theta)
    : cap_len_(cfg.cap_len()), tx_len_(cfg.tx_len), mac_(std::move(mac)), theta_(theta) {}

const SaturationParams& SaturationTable::at(int contenders) {
    auto it = cache_.find(contenders);
    if (it != cache_.end()) return it->second;
    SaturationParams s;
    if (contenders >= 1 && cap_len_ >= tx_len_) s = solve_saturation(contenders, cap_len_, tx_len_, mac_, theta_);
    return cache_.emplace(contenders, s).first->second;
}

MccaModel::MccaModel(const MccaParams& params)
    : params_(params),
      xi_norm_(params.xi_x * params.cfg.packets_per_slot * static_cast<double>(params.cfg.cap_len()) /
               static_cast<double>(params.cfg.slot_len)),
      table_(params.cfg, params.mac, params.theta) {
    params.cfg.validate();
    params.mac.validate();
    // Xi_m vanishes with the CAP; fall back to one slot's worth of packets.
    if (xi_norm_ <= 0.0) xi_norm_ = params.xi_x * params.cfg.packets_per_slot;
}

const CapFigures& MccaModel::cap(int contenders) {
    const auto idx = static_cast<std::size_t>(std::max(contenders, 0));
    if (idx < figures_.size() && figures_[idx]) return *figures_[idx];
    if (idx >= figures_.size()) figures_.resize(idx + 1);
    CapFigures f;
    if (contenders >= 1 && params_.cfg.cap_len() >= params_.cfg.tx_len) {
        const auto& s = table_.at(contenders);
        f.kappa_sf = s.kappa * static_cast<double>(params_.cfg.cap_len());
        f.phi_cap_sf = params_.lossless_throughput ? f.kappa_sf : s.phi_cap;
        f.xi_p = energy_per_cap_packet(s.p_c_eff, s.phi, params_.mac.max_backoffs, params_.mac.max_retries,
                                       params_.xi_x, params_.xi_c);
    }
    figures_[idx] = f;
    return *figures_[idx];
}

double MccaModel::throughput(int q, Action a, int contenders) {
    const double b = q;
    const double eta = params_.cfg.packets_per_slot;
    switch (a) {
        case Action::Defer: return 0.0;
        case Action::Cfp: return std::min(b, eta);
        case Action::CapCfp: return std::min(b, eta) + std::min(cap(contenders).phi_cap_sf, std::max(0.0, b - eta));
        case Action::Cap: return std::min(cap(contenders).phi_cap_sf, b);
    }
    return 0.0;
}

double MccaModel::energy(int q, Action a, int contenders) {
    const double b = q;
    const double eta = params_.cfg.packets_per_slot;
    switch (a) {
        case Action::Defer: return 0.0;
        case Action::Cfp: return std::min(b, eta) * params_.xi_x;
        case Action::CapCfp: {
            const auto& f = cap(contenders);
            return std::min(b, eta) * params_.xi_x + std::min(f.kappa_sf, std::max(0.0, b - eta)) * f.xi_p;
        }
        case Action::Cap: {
            const auto& f = cap(contenders);
            return std::min(f.kappa_sf, b) * f.xi_p;
        }
    }
    return 0.0;
}

double MccaModel::node_utility(int q, double rate, Action a, int contenders) {
    const double lambda = std::max(rate, kMinRate);
    return (throughput(q, a, contenders) - q) / lambda - energy(q, a, contenders) / xi_norm_;
}

int JointSchedule::slot_of(int node) const {
    for (std::size_t k = 0; k < slot_owner.size(); ++k)
        if (slot_owner[k] == node) return static_cast<int>(k);
    return -1;
}

int JointSchedule::contenders() const {
    return static_cast<int>(std::count_if(actions.begin(), actions.end(), [](Action a) { return uses_cap(a); }));
}

void JointSchedule::validate(int cfp_slots) const {
    if (static_cast<int>(slot_owner.size()) > cfp_slots)
        throw ConfigError("schedule assigns " + std::to_string(slot_owner.size()) + " slots, only " +
                          std::to_string(cfp_slots) + " exist");
    const int n = static_cast<int>(actions.size());
    std::vector<int> held(static_cast<std::size_t>(n), 0);
    for (int owner : slot_owner) {
        if (owner < 0 || owner >= n) throw ConfigError("slot owner out of range");
        ++held[static_cast<std::size_t>(owner)];
    }
    for (int i = 0; i < n; ++i) {
        const int want = uses_slot(actions[static_cast<std::size_t>(i)]) ? 1 : 0;
        if (held[static_cast<std::size_t>(i)] != want)
            throw ConfigError("node " + std::to_string(i) + " holds " +
                              std::to_string(held[static_cast<std::size_t>(i)]) + " slots for action " +
                              std::string(action_name(actions[static_cast<std::size_t>(i)])));
    }
}

std::int64_t action_space_size(int nodes, int cfp_slots) {
    if (nodes < 1 || cfp_slots < 0) throw ConfigError("need N >= 1 and M >= 0");
    std::int64_t total = 0;
    for (int g = 0; g <= cfp_slots; ++g)
        total += static_cast<std::int64_t>(cfp_slots + 1 - g) * std::max(nodes - g - 1, 0);
    return total;
}

std::vector<Action> candidate_actions(int nodes, int g, int dg, int dd) {
    std::vector<Action> out(static_cast<std::size_t>(nodes), Action::Defer);
    for (int i = 0; i < nodes; ++i) {
        if (i < g)
            out[static_cast<std::size_t>(i)] = Action::Cfp;
        else if (i < g + dg)
            out[static_cast<std::size_t>(i)] = Action::CapCfp;
        else if (i < g + dd)
            out[static_cast<std::size_t>(i)] = Action::Cap;
    }
    return out;
}

namespace {

constexpr double kUtilityTie = 1e-12;

}  // namespace

JointSchedule approx_schedule(const std::vector<int>& buffers, const std::vector<double>& rates,
                              MccaModel& model, ScheduleStats* stats) {
    const int n = static_cast<int>(buffers.size());
    if (n < 1) throw ConfigError("approx_schedule needs at least one node");
    if (rates.size() != buffers.size()) throw ConfigError("one rate per node is required");
    const int m = model.params().cfg.cfp_slots;
    const int bmax = model.params().buffer_max;

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return buffers[static_cast<std::size_t>(a)] > buffers[static_cast<std::size_t>(b)]; });
    std::vector<int> q(static_cast<std::size_t>(n));
    std::vector<double> lam(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto node = static_cast<std::size_t>(order[static_cast<std::size_t>(i)]);
        q[static_cast<std::size_t>(i)] = std::clamp(buffers[node], 0, bmax);
        lam[static_cast<std::size_t>(i)] = rates[node];
    }

    // table[(c * 4 + action) * n + i]: utility of sorted position i under an
    // action with c CAP contenders.
    const auto width = static_cast<std::size_t>(n);
    std::vector<double> table(static_cast<std::size_t>(n + 1) * 4 * width);
    for (int c = 0; c <= n; ++c)
        for (Action a : kAllActions)
            for (int i = 0; i < n; ++i)
                table[(static_cast<std::size_t>(c) * 4 + static_cast<std::size_t>(action_index(a))) * width +
                      static_cast<std::size_t>(i)] =
                    model.node_utility(q[static_cast<std::size_t>(i)], lam[static_cast<std::size_t>(i)], a, c);

    auto utility = [&](int g, int dg, int dd) {
        const auto row = static_cast<std::size_t>(std::max(dg, dd)) * 4 * width;
        double u = 0.0;
        for (int i = 0; i < n; ++i) {
            Action a = Action::Defer;
            if (i < g)
                a = Action::Cfp;
            else if (i < g + dg)
                a = Action::CapCfp;
            else if (i < g + dd)
                a = Action::Cap;
            u += table[row + static_cast<std::size_t>(action_index(a)) * width + static_cast<std::size_t>(i)];
        }
        return u;
    };

    int best_g = 0, best_dg = 0, best_dd = 0;
    double best = -std::numeric_limits<double>::infinity();
    ScheduleStats local;
    auto action_at = [](int g, int dg, int dd, int i) {
        if (i < g) return Action::Cfp;
        if (i < g + dg) return Action::CapCfp;
        if (i < g + dd) return Action::Cap;
        return Action::Defer;
    };
    // Ties go to the candidate whose actions, in sorted order, are
    // lexicographically smaller under the action order.
    auto precedes = [&](int g, int dg, int dd) {
        for (int i = 0; i < n; ++i) {
            const Action a = action_at(g, dg, dd, i), b = action_at(best_g, best_dg, best_dd, i);
            if (a != b) return a < b;
        }
        return false;
    };
    auto consider = [&](int g, int dg, int dd) {
        const double u = utility(g, dg, dd);
        if (u > best + kUtilityTie || (u >= best - kUtilityTie && precedes(g, dg, dd))) {
            best = u;
            best_g = g;
            best_dg = dg;
            best_dd = dd;
        }
    };

    const int slots = std::min(m, n);
    for (int g = 0; g <= slots; ++g) {
        for (int dg = 0; dg <= slots - g; ++dg) {
            for (int dd = 0; dd <= std::min(1, n - g); ++dd) {
                ++local.extra_candidates;
                consider(g, dg, dd);
            }
            for (int dd = 2; dd <= n - g; ++dd) {
                ++local.family_candidates;
                consider(g, dg, dd);
            }
        }
    }
    if (stats) *stats = local;

    JointSchedule out;
    out.actions.assign(static_cast<std::size_t>(n), Action::Defer);
    auto sorted = candidate_actions(n, best_g, best_dg, best_dd);
    for (int i = 0; i < n; ++i) {
        const int node = order[static_cast<std::size_t>(i)];
        out.actions[static_cast<std::size_t>(node)] = sorted[static_cast<std::size_t>(i)];
        if (i < best_g + best_dg) out.slot_owner.push_back(node);
    }
    out.utility = best;
    return out;
}

double schedule_utility(const std::vector<int>& buffers, const std::vector<double>& rates,
                        const std::vector<Action>& actions, MccaModel& model) {
    const int contenders = static_cast<int>(std::count_if(actions.begin(), actions.end(), uses_cap));
    const int bmax = model.params().buffer_max;
    double u = 0.0;
    for (std::size_t i = 0; i < actions.size(); ++i)
        u += model.node_utility(std::clamp(buffers[i], 0, bmax), rates[i], actions[i], contenders);
    return u;
}

std::size_t ScheduleCache::Hash::operator()(const std::vector<int>& v) const {
    std::size_t h = 1469598103934665603ULL;
    for (int x : v) {
        h ^= static_cast<std::size_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
}

const JointSchedule& ScheduleCache::get(const std::vector<int>& buffers, const std::vector<double>& rates,
                                        MccaModel& model) {
    auto it = map_.find(buffers);
    if (it != map_.end()) {
        ++hits_;
        order_.splice(order_.begin(), order_, it->second.second);
        return it->second.first;
    }
    if (capacity_ > 0 && map_.size() >= capacity_) {
        map_.erase(order_.back());
        order_.pop_back();
    }
    order_.push_front(buffers);
    auto res = map_.emplace(buffers, std::make_pair(approx_schedule(buffers, rates, model), order_.begin()));
    return res.first->second.first;
}

std::string beacon_payload(const JointSchedule& s) {
    std::ostringstream os;
    for (std::size_t i = 0; i < s.actions.size(); ++i) {
        if (i) os << ',';
        os << static_cast<int>(s.actions[i]);
    }
    os << ';';
    // Slot pairs in node-index order.
    bool first = true;
    for (std::size_t node = 0; node < s.actions.size(); ++node) {
        const int slot = s.slot_of(static_cast<int>(node));
        if (slot < 0) continue;
        if (!first) os << ',';
        first = false;
        os << node << ':' << slot;
    }
    return os.str();
}

namespace {

bool parse_int(const std::string& text, std::size_t begin, std::size_t end, int& out) {
    if (begin >= end) return false;
    int v = 0;
    for (std::size_t i = begin; i < end; ++i) {
        if (text[i] < '0' || text[i] > '9') return false;
        v = v * 10 + (text[i] - '0');
        if (v > 1000000) return false;
    }
    out = v;
    return true;
}

std::optional<JointSchedule> fail(PayloadError* error, std::size_t offset, std::string message) {
    if (error) *error = {offset, std::move(message)};
    return std::nullopt;
}

}  // namespace

std::optional<JointSchedule> parse_beacon_payload(const std::string& text, PayloadError* error) {
    const auto semi = text.find(';');
    if (semi == std::string::npos) return fail(error, text.size(), "missing ';' between actions and slots");
    JointSchedule s;
    std::size_t pos = 0;
    while (pos < semi) {
        auto end = std::min(text.find(',', pos), semi);
        int code = 0;
        if (!parse_int(text, pos, end, code) || code < 1 || code > 4)
            return fail(error, pos, "action code must be 1..4");
        s.actions.push_back(static_cast<Action>(code));
        pos = end + 1;
    }
    if (s.actions.empty()) return fail(error, 0, "no action codes");
    std::vector<std::pair<int, int>> pairs;
    pos = semi + 1;
    while (pos < text.size()) {
        auto end = std::min(text.find(',', pos), text.size());
        auto colon = text.find(':', pos);
        int node = 0, slot = 0;
        if (colon == std::string::npos || colon > end || !parse_int(text, pos, colon, node) ||
            !parse_int(text, colon + 1, end, slot))
            return fail(error, pos, "slot entries must look like node:slot");
        if (node >= static_cast<int>(s.actions.size())) return fail(error, pos, "slot entry names an unknown node");
        pairs.emplace_back(slot, node);
        pos = end + 1;
        if (end == text.size()) break;
    }
    std::sort(pairs.begin(), pairs.end());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (pairs[k].first != static_cast<int>(k)) return fail(error, semi + 1, "slot numbers must be 0..k-1 without gaps");
        s.slot_owner.push_back(pairs[k].second);
    }
    for (std::size_t i = 0; i < s.actions.size(); ++i) {
        const bool has = s.slot_of(static_cast<int>(i)) >= 0;
        if (has != uses_slot(s.actions[i]))
            return fail(error, semi + 1, "node " + std::to_string(i) + " slot entry disagrees with its action");
    }
    return s;
}

int JointPolicy::encode(const std::vector<int>& buffers, int buffer_max) {
    int idx = 0;
    for (auto it = buffers.rbegin(); it != buffers.rend(); ++it) idx = idx * (buffer_max + 1) + *it;
    return idx;
}

std::vector<int> JointPolicy::decode(int index, int nodes, int buffer_max) {
    std::vector<int> out(static_cast<std::size_t>(nodes));
    for (int i = 0; i < nodes; ++i) {
        out[static_cast<std::size_t>(i)] = index % (buffer_max + 1);
        index /= buffer_max + 1;
    }
    return out;
}

FiniteMdp build_joint_mdp(MccaModel& model, const std::vector<TrafficSpec>& traffic) {
    const int n = static_cast<int>(traffic.size());
    const int bmax = model.params().buffer_max;
    const auto& cfg = model.params().cfg;
    double states_d = std::pow(bmax + 1.0, n);
    if (n < 1 || states_d > kJointStateLimit)
        throw ConfigError("joint MDP too large: (B_max+1)^N = " + std::to_string(states_d) + " exceeds " +
                          std::to_string(kJointStateLimit));
    const int states = static_cast<int>(states_d);
    const int actions = 1 << (2 * n);
    std::vector<ArrivalPmf> pmfs;
    std::vector<double> rates;
    for (const auto& t : traffic) {
        pmfs.push_back(arrival_pmf(t, cfg.interval(), bmax));
        rates.push_back(t.packet_rate() * static_cast<double>(cfg.interval()));
    }

    FiniteMdp mdp(states, actions);
    mdp.allowed.assign(static_cast<std::size_t>(states) * static_cast<std::size_t>(actions), 0);
    const bool cap_ok = cfg.cap_len() >= cfg.tx_len;
    for (int ai = 0; ai < actions; ++ai) {
        std::vector<Action> act(static_cast<std::size_t>(n));
        int slots = 0;
        bool ok = true;
        for (int i = 0; i < n; ++i) {
            act[static_cast<std::size_t>(i)] = action_from_index((ai >> (2 * i)) & 3);
            if (uses_slot(act[static_cast<std::size_t>(i)])) ++slots;
            if (uses_cap(act[static_cast<std::size_t>(i)]) && !cap_ok) ok = false;
        }
        if (slots > cfg.cfp_slots || !ok) continue;
        const int contenders = static_cast<int>(std::count_if(act.begin(), act.end(), uses_cap));
        for (int s = 0; s < states; ++s) {
            auto b = JointPolicy::decode(s, n, bmax);
            mdp.allowed[static_cast<std::size_t>(s) * static_cast<std::size_t>(actions) + static_cast<std::size_t>(ai)] = 1;
            double r = 0.0;
            std::vector<std::vector<double>> rows;
            for (int i = 0; i < n; ++i) {
                const auto ii = static_cast<std::size_t>(i);
                r += model.node_utility(b[ii], rates[ii], act[ii], contenders);
                rows.push_back(transition_pmf(b[ii], model.throughput(b[ii], act[ii], contenders), pmfs[ii], bmax));
            }
            mdp.r(s, ai) = r;
            for (int t = 0; t < states; ++t) {
                auto nb = JointPolicy::decode(t, n, bmax);
                double p = 1.0;
                for (int i = 0; i < n && p != 0.0; ++i)
                    p *= rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(nb[static_cast<std::size_t>(i)])];
                mdp.p(s, ai, t) = p;
            }
        }
    }
    return mdp;
}

JointPolicy exact_joint_policy(MccaModel& model, const std::vector<TrafficSpec>& traffic, double gamma,
                               double epsilon) {
    auto mdp = build_joint_mdp(model, traffic);
    auto vi = value_iteration(mdp, gamma, epsilon);
    JointPolicy out;
    out.nodes = static_cast<int>(traffic.size());
    out.buffer_max = model.params().buffer_max;
    out.value = vi.value;
    out.iterations = vi.iterations;
    for (int a : vi.policy) {
        std::vector<Action> act;
        for (int i = 0; i < out.nodes; ++i) act.push_back(action_from_index((a >> (2 * i)) & 3));
        out.action.push_back(act);
    }
    return out;
}

}  // namespace hybridmac
