#include "hybridmac/core.hpp"

#include <algorithm>
#include <cstdlib>

namespace hybridmac {

void SuperframeConfig::validate() const {
    if (slots < 1) throw ConfigError("K must be >= 1");
    if (cfp_slots < 0 || cfp_slots > slots)
        throw ConfigError("M must lie in [0, K], got M=" + std::to_string(cfp_slots) +
                          " K=" + std::to_string(slots));
    if (slot_len < 1) throw ConfigError("T_slot must be >= 1");
    if (beacon_len < 0) throw ConfigError("T_beacon must be >= 0");
    if (packets_per_slot < 1) throw ConfigError("eta must be >= 1");
    if (max_tenure < 1) throw ConfigError("rho must be >= 1");
    if (tx_len < 1) throw ConfigError("T_tx must be >= 1");
}

SuperframeLayout superframe_layout(const SuperframeConfig& cfg) {
    cfg.validate();
    SuperframeLayout out;
    out.sf_len = cfg.sf_len();
    out.cap_len = cfg.cap_len();
    out.cfp_len = cfg.cfp_len();
    out.cap = {0, out.cap_len};
    out.cfp_slots.reserve(static_cast<std::size_t>(cfg.cfp_slots));
    for (int i = 0; i < cfg.cfp_slots; ++i) {
        Ubp begin = out.cap_len + static_cast<Ubp>(i) * cfg.slot_len;
        out.cfp_slots.push_back({begin, begin + cfg.slot_len});
    }
    return out;
}

double offered_traffic(int nodes, double lambda_per_interval, const SuperframeConfig& cfg) {
    return static_cast<double>(nodes) * lambda_per_interval * static_cast<double>(cfg.tx_len) /
           static_cast<double>(cfg.interval());
}

double lambda_for_load(int nodes, double load, const SuperframeConfig& cfg) {
    if (nodes < 1) throw ConfigError("node count must be >= 1");
    return load * static_cast<double>(cfg.interval()) /
           (static_cast<double>(nodes) * static_cast<double>(cfg.tx_len));
}

void MacParams::validate() const {
    if (cw_schedule.empty()) throw ConfigError("cw schedule must not be empty");
    for (int w : cw_schedule)
        if (w < 2) throw ConfigError("every contention window must be >= 2");
    if (max_backoffs < 0) throw ConfigError("m must be >= 0");
    if (max_retries < 0) throw ConfigError("W must be >= 0");
}

int MacParams::cw(int stage) const {
    auto idx = static_cast<std::size_t>(std::max(stage, 0));
    return idx < cw_schedule.size() ? cw_schedule[idx] : cw_schedule.back();
}

std::vector<int> cw_from_exponents(int min_be, int max_be, int max_backoffs) {
    std::vector<int> out;
    for (int i = 0; i <= max_backoffs; ++i) out.push_back(1 << std::min(min_be + i, max_be));
    return out;
}

std::string_view action_name(Action a) {
    switch (a) {
        case Action::Defer: return "a1";
        case Action::Cap: return "a2";
        case Action::Cfp: return "a3";
        case Action::CapCfp: return "a4";
    }
    return "?";
}

std::optional<Action> parse_action(std::string_view text) {
    if (text == "a1" || text == "1" || text == "defer") return Action::Defer;
    if (text == "a2" || text == "2" || text == "cap") return Action::Cap;
    if (text == "a3" || text == "3" || text == "cfp") return Action::Cfp;
    if (text == "a4" || text == "4" || text == "cap+cfp") return Action::CapCfp;
    return std::nullopt;
}

void NodeState::validate(int buffer_max, int max_tenure) const {
    if (buffer < 0 || buffer > buffer_max) throw ConfigError("buffer out of range");
    if (slot_tenure < 0 || slot_tenure > max_tenure) throw ConfigError("slot tenure out of range");
    if (slot_tenure > 0 && !slot_held) throw ConfigError("tenure without a held slot");
}

}  // namespace hybridmac
