#include "hybridmac/energy.hpp"

namespace hybridmac {

double EnergyModel::power(RadioState s) const {
    switch (s) {
        case RadioState::Sleep: return sleep_w;
        case RadioState::Transmit: return transmit_w;
        case RadioState::Receive: return receive_w;
        case RadioState::Idle: return idle_w;
    }
    return 0.0;
}

void EnergyModel::validate() const {
    if (!(sleep_w >= 0 && transmit_w >= 0 && receive_w >= 0 && idle_w >= 0))
        throw ConfigError("radio powers must be >= 0");
    if (!(xi_x > 0 && xi_c > 0)) throw ConfigError("solver energy weights must be > 0");
}

void RadioTimeline::add(RadioState state, Ubp begin, Ubp end) {
    if (begin != cursor_)
        throw TimelineError("radio timeline " + std::string(begin > cursor_ ? "gap" : "overlap") + " at UBP " +
                            std::to_string(cursor_) + " (next segment starts at " + std::to_string(begin) + ")");
    if (end < begin) throw TimelineError("radio segment ends before it begins");
    if (end == begin) return;
    durations_[static_cast<std::size_t>(state)] += end - begin;
    if (keep_) {
        if (!segments_.empty() && segments_.back().state == state)
            segments_.back().end = end;
        else
            segments_.push_back({begin, end, state});
    }
    cursor_ = end;
}

void RadioTimeline::fill_to(RadioState state, Ubp end) {
    if (end > cursor_) add(state, cursor_, end);
}

void RadioTimeline::require_covers(Ubp end) const {
    if (cursor_ != end)
        throw TimelineError("radio timeline covers [" + std::to_string(origin_) + ", " + std::to_string(cursor_) +
                            ") but should reach " + std::to_string(end));
}

double energy_of(const std::array<Ubp, 4>& d, const EnergyModel& m) {
    double joules = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
        joules += static_cast<double>(d[i]) * kUbpSeconds * m.power(static_cast<RadioState>(i));
    return joules;
}

double energy_accounting(const RadioTimeline& timeline, const EnergyModel& model) {
    return energy_of(timeline.durations(), model);
}

}  // namespace hybridmac
