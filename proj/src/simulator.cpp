#include "hybridmac/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <future>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "hybridmac/rng.hpp"

namespace hybridmac {

std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::Mdca: return "MDCA";
        case Scheme::Mcca: return "MCCA";
        case Scheme::Csma: return "CSMA";
        case Scheme::Csma2: return "CSMA2";
        case Scheme::Lqf: return "LQF";
    }
    return "?";
}

Scheme parse_scheme(const std::string& text) {
    std::string t;
    for (char c : text) t += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (Scheme s : {Scheme::Mdca, Scheme::Mcca, Scheme::Csma, Scheme::Csma2, Scheme::Lqf})
        if (scheme_name(s) == t) return s;
    throw ConfigError("unknown scheme '" + text + "'");
}

double Scenario::outage_of(int node) const {
    if (!outage.empty()) return outage.at(static_cast<std::size_t>(node));
    if (topology && !topology->outage.empty()) return topology->outage.at(static_cast<std::size_t>(node));
    return 0.0;
}

void Scenario::validate() const {
    cfg.validate();
    mac.validate();
    energy.validate();
    if (traffic.empty()) throw ConfigError("scenario needs at least one node");
    for (const auto& t : traffic) t.validate();
    if (buffer_max < 1) throw ConfigError("B_max must be >= 1");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (!outage.empty() && outage.size() != traffic.size())
        throw ConfigError("outage list must have one entry per node");
    for (double o : outage)
        if (!(o >= 0.0 && o <= 1.0)) throw ConfigError("outage probabilities must lie in [0, 1]");
    if (topology) {
        topology->validate();
        if (topology->size() != nodes()) throw ConfigError("topology size differs from the node count");
    }
    if (scheme == Scheme::Mdca) {
        if (policies.size() != 1 && policies.size() != traffic.size())
            throw ConfigError("MDCA needs one shared policy or one policy per node");
        for (const auto& p : policies) {
            if (!p) throw ConfigError("MDCA needs a solved policy");
            if (static_cast<int>(p->action.size()) != buffer_max + 1)
                throw ConfigError("MDCA policy covers a different buffer range");
        }
    }
    if (cfg.cfp_slots > 0 && cfg.slot_len < cfg.tx_len)
        throw ConfigError("a CFP slot must fit at least one transmission");
}

const MdpPolicy& Scenario::policy_of(int node) const {
    return *policies.at(policies.size() == 1 ? 0 : static_cast<std::size_t>(node));
}

double SimMetrics::cap_goodput_per_node() const {
    if (per_node.empty() || superframes == 0) return 0.0;
    return static_cast<double>(cap_delivered) / (static_cast<double>(per_node.size()) * superframes);
}

bool SimMetrics::operator==(const SimMetrics& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return generated == o.generated && delivered == o.delivered && discarded == o.discarded &&
           dropped == o.dropped && in_buffer == o.in_buffer && cap_delivered == o.cap_delivered &&
           collisions == o.collisions && same(pdr, o.pdr) && same(delay_mean, o.delay_mean) &&
           delay_min == o.delay_min && delay_max == o.delay_max && same(energy_nodes_j, o.energy_nodes_j) &&
           same(energy_coordinator_j, o.energy_coordinator_j) && same(energy_total_j, o.energy_total_j) &&
           same(energy_per_packet_j, o.energy_per_packet_j) && superframes == o.superframes &&
           per_node == o.per_node;
}

std::string format_trace_row(const TraceRow& r) {
    std::ostringstream os;
    os.precision(9);
    os << r.superframe << '\t' << r.node << '\t' << action_name(r.action) << '\t' << r.cap_sent << '\t'
       << r.cfp_sent << '\t' << r.collisions << '\t' << r.energy_j;
    return os.str();
}

std::vector<int> lqf_slot_holders(const std::vector<int>& estimates, int cfp_slots) {
    std::vector<int> order(estimates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return estimates[static_cast<std::size_t>(a)] > estimates[static_cast<std::size_t>(b)];
    });
    std::vector<int> holders;
    for (int n : order) {
        if (static_cast<int>(holders.size()) >= cfp_slots) break;
        if (estimates[static_cast<std::size_t>(n)] <= 0) break;
        holders.push_back(n);
    }
    return holders;
}

namespace {

constexpr std::uint64_t kArrivalStream = 0;
constexpr std::uint64_t kMacStream = 1;
constexpr std::uint64_t kChannelStream = 2;
constexpr std::uint64_t kTopologyStream = 0xffffffffULL;

struct NodeRt {
    std::deque<Ubp> buffer;  // generation times
    Rng arrivals, mac, channel;
    int stage = 0;
    int nb = 0;
    int retries = 0;
    bool carry = false;
    Ubp carry_left = 0;
    int slot = -1;  // MDCA slot held across superframes
    int tenure = 0;
};

// What a node does in one superframe.
struct Plan {
    Action action = Action::Defer;
    bool awake_beacon = false;
    bool contend = false;
    int cap_budget = 0;
    bool request = false;
    bool halt_on_grant = false;
    int reserve = 0;
    int slot = -1;
    bool dealloc = false;
};

enum class Phase { Off, Cca1, Cca2, Tx };

struct Contender {
    Phase phase = Phase::Off;
    Ubp at = 0;
};

struct Transmission {
    int node = 0;
    Ubp start = 0;
    Ubp end = 0;
    std::vector<char> heard;  // heard[j]: node j senses this transmission; empty = everyone
};

class Simulation {
public:
    Simulation(const Scenario& sc, std::vector<TraceRow>* trace) : sc_(sc), trace_(trace) {
        sc_.validate();
        if (sc_.scheme == Scheme::Csma) sc_.mac.drop_enabled = true;
        if (sc_.scheme == Scheme::Csma2) sc_.mac.drop_enabled = false;
        n_ = sc_.nodes();
        nodes_.resize(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) {
            auto& nd = nodes_[static_cast<std::size_t>(i)];
            nd.arrivals = Rng::stream(sc_.seed, static_cast<std::uint64_t>(i), kArrivalStream);
            nd.mac = Rng::stream(sc_.seed, static_cast<std::uint64_t>(i), kMacStream);
            nd.channel = Rng::stream(sc_.seed, static_cast<std::uint64_t>(i), kChannelStream);
        }
        metrics_.per_node.resize(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) outage_.push_back(sc_.outage_of(i));
        if (sc_.topology && sc_.hidden_fixed_per_run) {
            Rng r = Rng::stream(sc_.seed, kTopologyStream, 0);
            fixed_hidden_.assign(static_cast<std::size_t>(n_), std::vector<char>(static_cast<std::size_t>(n_), 0));
            for (int a = 0; a < n_; ++a)
                for (int b = a + 1; b < n_; ++b) {
                    const bool h = r.bernoulli(sc_.topology->h[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]);
                    fixed_hidden_[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = h;
                    fixed_hidden_[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = h;
                }
        }
        if (sc_.scheme == Scheme::Mcca || sc_.scheme == Scheme::Lqf) {
            std::vector<double> rates;
            for (const auto& t : sc_.traffic) rates.push_back(t.packet_rate() * static_cast<double>(sc_.cfg.interval()));
            rates_ = rates;
            ledger_.emplace(rates, sc_.buffer_max);
        }
        if (sc_.scheme == Scheme::Mcca) {
            MccaParams p;
            p.cfg = sc_.cfg;
            p.mac = sc_.mac;
            p.buffer_max = sc_.buffer_max;
            p.xi_x = sc_.energy.xi_x;
            p.xi_c = sc_.energy.xi_c;
            p.theta = std::accumulate(outage_.begin(), outage_.end(), 0.0) / n_;
            model_.emplace(p);
        }
    }

    SimMetrics run() {
        for (int sf = 0; sf < sc_.horizon; ++sf) superframe(sf);
        return finish();
    }

private:
    Scenario sc_;
    std::vector<TraceRow>* trace_;
    int n_ = 0;
    std::vector<NodeRt> nodes_;
    std::vector<double> outage_;
    std::vector<std::vector<char>> fixed_hidden_;
    std::vector<double> rates_;
    std::optional<BufferLedger> ledger_;
    std::optional<MccaModel> model_;
    ScheduleCache cache_;
    SimMetrics metrics_;
    double delay_sum_ = 0.0;

    // per-superframe scratch
    std::vector<Plan> plans_;
    std::vector<RadioTimeline> lines_;
    std::vector<TraceRow> rows_;
    std::vector<int> budget_;

    NodeRt& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }
    NodeMetrics& nm(int i) { return metrics_.per_node[static_cast<std::size_t>(i)]; }
    RadioTimeline& line(int i) { return lines_[static_cast<std::size_t>(i)]; }
    Plan& plan(int i) { return plans_[static_cast<std::size_t>(i)]; }
    int& budget(int i) { return budget_[static_cast<std::size_t>(i)]; }
    int buffered(int i) { return static_cast<int>(node(i).buffer.size()); }
    bool mdca_like() const { return sc_.scheme == Scheme::Mdca; }

    void deliver(int i, Ubp when, bool in_cap) {
        auto& nd = node(i);
        const Ubp delay = when - nd.buffer.front();
        nd.buffer.pop_front();
        auto& m = nm(i);
        ++m.delivered;
        m.delay_total_ubp += static_cast<double>(delay);
        if (in_cap) ++m.cap_delivered;
        if (metrics_.delivered == 0 || delay < metrics_.delay_min) metrics_.delay_min = delay;
        if (metrics_.delivered == 0 || delay > metrics_.delay_max) metrics_.delay_max = delay;
        ++metrics_.delivered;
        delay_sum_ += static_cast<double>(delay);
        if (ledger_) ledger_->report(i, buffered(i));
    }

    void make_plans() {
        plans_.assign(static_cast<std::size_t>(n_), Plan{});
        const int eta = sc_.cfg.packets_per_slot;
        switch (sc_.scheme) {
            case Scheme::Csma:
            case Scheme::Csma2:
                for (int i = 0; i < n_; ++i) {
                    const int b = buffered(i);
                    if (b > 0) plan(i) = Plan{Action::Cap, true, true, b};
                }
                break;
            case Scheme::Mdca:
                for (int i = 0; i < n_; ++i) {
                    auto& nd = node(i);
                    const int b = buffered(i);
                    const auto beh = policy_action(sc_.policy_of(i), std::min(b, sc_.buffer_max), nd.slot >= 0, eta);
                    Plan& p = plan(i);
                    p.action = beh.action;
                    p.awake_beacon = !beh.idle;
                    p.cap_budget = beh.cap_packets;
                    p.contend = p.cap_budget > 0;
                    p.request = beh.request_slot && sc_.cfg.cfp_slots > 0;
                    p.halt_on_grant = beh.halt_cap_on_grant;
                    p.reserve = beh.reserve_after_grant;
                    p.slot = nd.slot;
                    p.dealloc = beh.dealloc;
                }
                break;
            case Scheme::Mcca: {
                std::vector<int> est(static_cast<std::size_t>(n_));
                for (int i = 0; i < n_; ++i) est[static_cast<std::size_t>(i)] = ledger_->raw_estimate(i);
                const JointSchedule& s = cache_.get(est, rates_, *model_);
                for (int i = 0; i < n_; ++i) {
                    const Action a = s.actions[static_cast<std::size_t>(i)];
                    const int b = buffered(i);
                    Plan& p = plan(i);
                    p.action = a;
                    p.awake_beacon = true;
                    if (a == Action::Cap) p.cap_budget = b;
                    if (a == Action::CapCfp) p.cap_budget = std::max(b - eta, 0);
                    p.contend = p.cap_budget > 0;
                    p.slot = uses_slot(a) ? s.slot_of(i) : -1;
                }
                break;
            }
            case Scheme::Lqf: {
                std::vector<int> est(static_cast<std::size_t>(n_));
                for (int i = 0; i < n_; ++i) est[static_cast<std::size_t>(i)] = ledger_->raw_estimate(i);
                const auto holders = lqf_slot_holders(est, sc_.cfg.cfp_slots);
                for (int i = 0; i < n_; ++i) {
                    const int b = buffered(i);
                    Plan& p = plan(i);
                    p.awake_beacon = true;
                    p.action = b > 0 ? Action::Cap : Action::Defer;
                    p.cap_budget = b;
                }
                for (std::size_t k = 0; k < holders.size(); ++k) {
                    Plan& p = plan(holders[k]);
                    p.action = Action::CapCfp;
                    p.slot = static_cast<int>(k);
                    p.cap_budget = std::max(buffered(holders[k]) - eta, 0);
                }
                for (int i = 0; i < n_; ++i) plan(i).contend = plan(i).cap_budget > 0;
                break;
            }
        }
    }

    // Random backoff draw for the node's current stage.
    Ubp backoff(int i) {
        auto& nd = node(i);
        return static_cast<Ubp>(nd.mac.below(static_cast<std::uint64_t>(sc_.mac.cw(nd.stage))));
    }

    // Transmissions are registered in start order, so ends are ordered too.
    bool busy(int listener, Ubp u, const std::vector<Transmission>& txs) const {
        for (auto it = txs.rbegin(); it != txs.rend() && it->end > u; ++it)
            if (it->node != listener && it->start <= u &&
                (it->heard.empty() || it->heard[static_cast<std::size_t>(listener)]))
                return true;
        return false;
    }

    // Busy channel at a clear-channel assessment. Returns the next CCA time or -1.
    Ubp on_busy(int i, Ubp u) {
        auto& nd = node(i);
        ++nd.nb;
        if (nd.nb > sc_.mac.max_backoffs) {
            if (sc_.mac.drop_enabled) {
                nd.buffer.pop_front();
                ++nm(i).dropped;
                ++metrics_.dropped;
                --budget(i);
                nd.retries = 0;
                nd.nb = 0;
                nd.stage = 0;
                if (budget(i) <= 0 || nd.buffer.empty()) return -1;
            } else {
                nd.nb = sc_.mac.max_backoffs;
            }
        }
        nd.stage = nd.nb;
        return u + 1 + backoff(i);
    }

    void cap(Ubp cap_origin, std::vector<int>& cap_sent, std::vector<int>& failures) {
        const Ubp tcap = sc_.cfg.cap_len();
        const Ubp ttx = sc_.cfg.tx_len;
        std::vector<Contender> c(static_cast<std::size_t>(n_));
        std::vector<Transmission> txs;
        budget_.assign(static_cast<std::size_t>(n_), 0);
        std::vector<char> halted(static_cast<std::size_t>(n_), 0);

        for (int i = 0; i < n_; ++i) {
            auto& nd = node(i);
            const Plan& p = plan(i);
            if (!p.contend || tcap < ttx) {
                nd.carry = false;
                continue;
            }
            budget(i) = p.cap_budget;
            auto& ci = c[static_cast<std::size_t>(i)];
            ci.phase = Phase::Cca1;
            if (nd.carry) {
                ci.at = nd.carry_left;
                nd.carry = false;
            } else {
                nd.nb = 0;
                nd.stage = 0;
                ci.at = backoff(i);
            }
        }

        auto at_abs = [&](Ubp u) { return cap_origin + u; };
        auto stop = [&](int i) { c[static_cast<std::size_t>(i)].phase = Phase::Off; };
        auto next_packet = [&](int i, Ubp from) {
            auto& nd = node(i);
            auto& ci = c[static_cast<std::size_t>(i)];
            if (budget(i) > 0 && !nd.buffer.empty() && !halted[static_cast<std::size_t>(i)]) {
                nd.nb = 0;
                nd.stage = 0;
                ci.phase = Phase::Cca1;
                ci.at = from + backoff(i);
            } else {
                ci.phase = Phase::Off;
            }
        };

        // Contending nodes in index order; events at one UBP run in that order.
        std::vector<int> active;
        for (int i = 0; i < n_; ++i)
            if (c[static_cast<std::size_t>(i)].phase != Phase::Off) active.push_back(i);

        while (!active.empty()) {
            Ubp u = std::numeric_limits<Ubp>::max();
            for (int i : active) u = std::min(u, c[static_cast<std::size_t>(i)].at);

            // Transmissions ending now resolve before any sensing at u.
            for (int i : active) {
                auto& ci = c[static_cast<std::size_t>(i)];
                if (ci.phase != Phase::Tx || ci.at != u) continue;
                auto& nd = node(i);
                const Transmission* mine = nullptr;
                for (auto it = txs.rbegin(); it != txs.rend() && it->end >= u; ++it)
                    if (it->node == i && it->end == u) mine = &*it;
                bool ok = true;
                for (auto it = txs.rbegin(); it != txs.rend() && it->end > mine->start; ++it)
                    if (&*it != mine && it->start < mine->end) ok = false;
                const double theta = outage_[static_cast<std::size_t>(i)];
                if (theta > 0.0) {
                    if (nd.channel.bernoulli(theta)) ok = false;
                    if (sc_.ack_outage && nd.channel.bernoulli(theta)) ok = false;
                }
                ++cap_sent[static_cast<std::size_t>(i)];
                ++nm(i).cap_sent;
                if (ok) {
                    deliver(i, at_abs(u), true);
                    --budget(i);
                    nd.retries = 0;
                    const Plan& p = plan(i);
                    if (p.request && nd.slot < 0) grant(i, halted);
                } else {
                    ++failures[static_cast<std::size_t>(i)];
                    ++nm(i).collisions;
                    ++metrics_.collisions;
                    ++nd.retries;
                    if (sc_.mac.drop_enabled && nd.retries > sc_.mac.max_retries) {
                        nd.buffer.pop_front();
                        ++nm(i).dropped;
                        ++metrics_.dropped;
                        --budget(i);
                        nd.retries = 0;
                    }
                }
                next_packet(i, u);
            }

            for (int i : active) {
                auto& ci = c[static_cast<std::size_t>(i)];
                if (ci.at != u || (ci.phase != Phase::Cca1 && ci.phase != Phase::Cca2)) continue;
                auto& nd = node(i);
                auto& tl = line(i);
                if (ci.phase == Phase::Cca1) {
                    if (u >= tcap) {
                        tl.fill_to(RadioState::Idle, at_abs(tcap));
                        nd.carry = true;
                        nd.carry_left = u - tcap;
                        stop(i);
                        continue;
                    }
                    tl.fill_to(RadioState::Idle, at_abs(u));  // backoff since the previous event
                    if (u + 2 + ttx > tcap) {
                        ++nm(i).deferrals;
                        nd.nb = 0;
                        nd.stage = 0;
                        stop(i);
                        continue;
                    }
                    tl.add(RadioState::Receive, at_abs(u), at_abs(u + 1));
                    ++nm(i).cca1;
                    if (busy(i, u, txs)) {
                        const Ubp nxt = on_busy(i, u);
                        if (nxt < 0) stop(i);
                        else ci.at = nxt;
                    } else {
                        ++nm(i).cca1_idle;
                        ci.phase = Phase::Cca2;
                        ci.at = u + 1;
                    }
                } else {
                    tl.add(RadioState::Receive, at_abs(u), at_abs(u + 1));
                    ++nm(i).cca2;
                    if (busy(i, u, txs)) {
                        const Ubp nxt = on_busy(i, u);
                        if (nxt < 0) stop(i);
                        else {
                            ci.phase = Phase::Cca1;
                            ci.at = nxt;
                        }
                    } else {
                        ++nm(i).cca2_idle;
                        Transmission t;
                        t.node = i;
                        t.start = u + 1;
                        t.end = u + 1 + ttx;
                        if (sc_.topology) {
                            t.heard.assign(static_cast<std::size_t>(n_), 1);
                            for (int j = 0; j < n_; ++j) {
                                if (j == i) continue;
                                bool hidden;
                                if (sc_.hidden_fixed_per_run)
                                    hidden = fixed_hidden_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                                else
                                    hidden = nd.channel.bernoulli(
                                        sc_.topology->h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
                                t.heard[static_cast<std::size_t>(j)] = hidden ? 0 : 1;
                            }
                        }
                        tl.add(RadioState::Transmit, at_abs(t.start), at_abs(t.end));
                        txs.push_back(std::move(t));
                        ci.phase = Phase::Tx;
                        ci.at = u + 1 + ttx;
                    }
                }
            }
            std::erase_if(active, [&](int i) { return c[static_cast<std::size_t>(i)].phase == Phase::Off; });
        }
        for (int i = 0; i < n_; ++i) line(i).fill_to(RadioState::Sleep, at_abs(tcap));
    }

    // Slot request honoured in the acknowledgment: lowest free slot, first come first served.
    void grant(int i, std::vector<char>& halted) {
        std::vector<char> taken(static_cast<std::size_t>(sc_.cfg.cfp_slots), 0);
        for (const auto& nd : nodes_)
            if (nd.slot >= 0) taken[static_cast<std::size_t>(nd.slot)] = 1;
        int slot = -1;
        for (int k = 0; k < sc_.cfg.cfp_slots; ++k)
            if (!taken[static_cast<std::size_t>(k)]) {
                slot = k;
                break;
            }
        if (slot < 0) return;
        auto& nd = node(i);
        nd.slot = slot;
        nd.tenure = 0;
        ++nm(i).grants;
        Plan& p = plan(i);
        p.slot = slot;
        if (p.halt_on_grant) halted[static_cast<std::size_t>(i)] = 1;
        if (p.reserve > 0) budget(i) = std::min(budget(i), std::max(buffered(i) - p.reserve, 0));
    }

    void cfp(Ubp cfp_origin, RadioTimeline& coord, std::vector<int>& cfp_sent) {
        const Ubp ttx = sc_.cfg.tx_len;
        const int eta = sc_.cfg.packets_per_slot;
        const int fit = static_cast<int>(sc_.cfg.slot_len / ttx);
        std::vector<int> owner(static_cast<std::size_t>(sc_.cfg.cfp_slots), -1);
        for (int i = 0; i < n_; ++i) {
            const int s = plan(i).slot;
            if (s < 0) continue;
            if (owner[static_cast<std::size_t>(s)] >= 0) throw std::logic_error("two holders for one CFP slot");
            owner[static_cast<std::size_t>(s)] = i;
        }
        for (int k = 0; k < sc_.cfg.cfp_slots; ++k) {
            const Ubp begin = cfp_origin + k * sc_.cfg.slot_len;
            const int i = owner[static_cast<std::size_t>(k)];
            if (i < 0) continue;
            auto& nd = node(i);
            const Plan& p = plan(i);
            int frames = p.dealloc ? 1 : std::min({eta, buffered(i), fit});
            auto& tl = line(i);
            tl.fill_to(RadioState::Sleep, begin);
            coord.fill_to(RadioState::Idle, begin);
            for (int f = 0; f < frames; ++f) {
                const Ubp s = begin + f * ttx;
                tl.add(RadioState::Transmit, s, s + ttx);
                coord.fill_to(RadioState::Idle, s);
                coord.add(RadioState::Receive, s, s + ttx);
                if (nd.buffer.empty()) continue;  // control frame carrying the de-allocation bit
                ++cfp_sent[static_cast<std::size_t>(i)];
                ++nm(i).cfp_sent;
                bool ok = true;
                const double theta = outage_[static_cast<std::size_t>(i)];
                if (theta > 0.0) {
                    if (nd.channel.bernoulli(theta)) ok = false;
                    if (sc_.ack_outage && nd.channel.bernoulli(theta)) ok = false;
                }
                if (ok) deliver(i, s + ttx, false);
            }
        }
    }

    void end_of_superframe_slots() {
        if (!mdca_like()) return;
        for (int i = 0; i < n_; ++i) {
            auto& nd = node(i);
            if (nd.slot < 0) continue;
            if (plan(i).dealloc) {
                nd.slot = -1;
                nd.tenure = 0;
                continue;
            }
            if (++nd.tenure >= sc_.cfg.max_tenure) {
                nd.slot = -1;
                nd.tenure = 0;
                ++nm(i).evictions;
            }
        }
    }

    void arrivals(int sf) {
        const Ubp base = static_cast<Ubp>(sf) * sc_.cfg.interval();
        for (int i = 0; i < n_; ++i) {
            auto& nd = node(i);
            auto& m = nm(i);
            for (const auto& ev : sample_arrivals(sc_.traffic[static_cast<std::size_t>(i)], sc_.cfg.interval(), nd.arrivals))
                for (int b = 0; b < ev.batch; ++b) {
                    nd.buffer.push_back(base + ev.time);
                    ++m.generated;
                    ++metrics_.generated;
                }
            while (static_cast<int>(nd.buffer.size()) > sc_.buffer_max) {
                nd.buffer.pop_back();
                ++m.discarded;
                ++metrics_.discarded;
            }
        }
    }

    void saturate(int sf) {
        const Ubp base = static_cast<Ubp>(sf) * sc_.cfg.interval();
        const int target = static_cast<int>(sc_.cfg.cap_len() / sc_.cfg.tx_len) + 2;
        for (int i = 0; i < n_; ++i) {
            auto& nd = node(i);
            while (static_cast<int>(nd.buffer.size()) < target) {
                nd.buffer.push_back(base);
                ++nm(i).generated;
                ++metrics_.generated;
            }
        }
    }

    void superframe(int sf) {
        const Ubp base = static_cast<Ubp>(sf) * sc_.cfg.interval();
        const Ubp cap_origin = base + sc_.cfg.beacon_len;
        const Ubp cfp_origin = cap_origin + sc_.cfg.cap_len();
        const Ubp end = base + sc_.cfg.interval();
        if (sc_.saturation) saturate(sf);
        make_plans();

        lines_.assign(static_cast<std::size_t>(n_), RadioTimeline(base));
        RadioTimeline coord(base);
        coord.add(RadioState::Transmit, base, cap_origin);
        for (int i = 0; i < n_; ++i)
            line(i).add(plan(i).awake_beacon ? RadioState::Receive : RadioState::Sleep, base, cap_origin);

        std::vector<int> cap_sent(static_cast<std::size_t>(n_), 0), failures(cap_sent), cfp_sent(cap_sent);
        cap(cap_origin, cap_sent, failures);
        // An MCCA beacon that grants no CAP access leaves the CAP silent.
        bool cap_granted = sc_.scheme != Scheme::Mcca;
        for (int i = 0; i < n_ && !cap_granted; ++i) cap_granted = uses_cap(plan(i).action);
        coord.add(cap_granted ? RadioState::Receive : RadioState::Sleep, cap_origin, cfp_origin);
        cfp(cfp_origin, coord, cfp_sent);
        coord.fill_to(RadioState::Idle, end);
        coord.require_covers(end);
        metrics_.energy_coordinator_j += energy_accounting(coord, sc_.energy);

        for (int i = 0; i < n_; ++i) {
            line(i).fill_to(RadioState::Sleep, end);
            line(i).require_covers(end);
            const double e = energy_accounting(line(i), sc_.energy);
            nm(i).energy_j += e;
            if (trace_)
                trace_->push_back(TraceRow{sf, i, plan(i).action, cap_sent[static_cast<std::size_t>(i)],
                                           cfp_sent[static_cast<std::size_t>(i)],
                                           failures[static_cast<std::size_t>(i)], e});
        }
        end_of_superframe_slots();
        if (ledger_) ledger_->tick();
        if (!sc_.saturation) arrivals(sf);
        ++metrics_.superframes;
    }

    SimMetrics finish() {
        auto& m = metrics_;
        m.cap_delivered = 0;
        m.energy_nodes_j = 0.0;
        for (int i = 0; i < n_; ++i) {
            auto& p = nm(i);
            p.in_buffer = buffered(i);
            m.in_buffer += p.in_buffer;
            m.cap_delivered += p.cap_delivered;
            m.energy_nodes_j += p.energy_j;
        }
        m.energy_total_j = m.energy_nodes_j + m.energy_coordinator_j;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        m.pdr = m.generated > 0 ? static_cast<double>(m.delivered) / static_cast<double>(m.generated) : nan;
        m.delay_mean = m.delivered > 0 ? delay_sum_ / static_cast<double>(m.delivered) : nan;
        m.energy_per_packet_j = m.delivered > 0 ? m.energy_total_j / static_cast<double>(m.delivered) : nan;
        return m;
    }
};

}  // namespace

SimMetrics run(const Scenario& scenario, std::vector<TraceRow>* trace) {
    Simulation sim(scenario, trace);
    return sim.run();
}

MetricSummary summarize(const std::vector<double>& values) {
    MetricSummary s;
    std::vector<double> v;
    for (double x : values)
        if (!std::isnan(x)) v.push_back(x);
    if (v.empty()) {
        s.mean = s.min = s.max = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    std::sort(v.begin(), v.end());  // order-independent sum
    s.min = v.front();
    s.max = v.back();
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    return s;
}

ReplicatedSummary run_replicated(const Scenario& scenario, const std::vector<std::uint64_t>& seeds, int threads) {
    if (seeds.empty()) throw ConfigError("run_replicated needs at least one seed");
    scenario.validate();
    ReplicatedSummary out;
    out.runs = static_cast<int>(seeds.size());
    out.metrics.resize(seeds.size());
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(seeds.size())));
    auto job = [&](std::size_t k) {
        Scenario sc = scenario;
        sc.seed = seeds[k];
        out.metrics[k] = run(sc);
    };
    if (workers == 1) {
        for (std::size_t k = 0; k < seeds.size(); ++k) job(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::future<void>> pool;
        for (int w = 0; w < workers; ++w)
            pool.push_back(std::async(std::launch::async, [&] {
                for (std::size_t k = next++; k < seeds.size(); k = next++) job(k);
            }));
        for (auto& f : pool) f.get();
    }
    std::vector<double> pdr, delay, epp, etot, good;
    for (const auto& m : out.metrics) {
        pdr.push_back(m.pdr);
        delay.push_back(m.delay_mean);
        epp.push_back(m.energy_per_packet_j);
        etot.push_back(m.energy_total_j);
        good.push_back(m.cap_goodput_per_node());
    }
    out.pdr = summarize(pdr);
    out.delay_ubp = summarize(delay);
    out.energy_per_packet_j = summarize(epp);
    out.energy_total_j = summarize(etot);
    out.cap_goodput = summarize(good);
    return out;
}

}  // namespace hybridmac
