// Radio-state timelines and their energy.
#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybridmac/core.hpp"

namespace hybridmac {

enum class RadioState : std::uint8_t { Sleep = 0, Transmit = 1, Receive = 2, Idle = 3 };

struct EnergyModel {
    double sleep_w = 36e-6;
    double transmit_w = 31.32e-3;
    double receive_w = 33.84e-3;
    double idle_w = 766.8e-6;
    double xi_x = 1.0;  ///< abstract per-packet energy for the solvers
    double xi_c = 0.1;  ///< abstract per-sensing energy for the solvers

    double power(RadioState s) const;
    void validate() const;

    bool operator==(const EnergyModel&) const = default;
};

class TimelineError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct RadioSegment {
    Ubp begin = 0;
    Ubp end = 0;
    RadioState state = RadioState::Sleep;
};

/// Contiguous sequence of radio states for one device over [origin, end).
class RadioTimeline {
public:
    explicit RadioTimeline(Ubp origin = 0, bool keep_segments = false)
        : origin_(origin), cursor_(origin), keep_(keep_segments) {}

    /// Appends [begin, end); begin must equal the current end of the timeline.
    void add(RadioState state, Ubp begin, Ubp end);
    /// Extends the timeline to `end` in `state`; no-op if already there.
    void fill_to(RadioState state, Ubp end);

    Ubp origin() const { return origin_; }
    Ubp cursor() const { return cursor_; }
    const std::array<Ubp, 4>& durations() const { return durations_; }
    Ubp duration(RadioState s) const { return durations_[static_cast<std::size_t>(s)]; }
    const std::vector<RadioSegment>& segments() const { return segments_; }

    /// Throws TimelineError unless the timeline covers exactly [origin, end).
    void require_covers(Ubp end) const;

private:
    Ubp origin_;
    Ubp cursor_;
    bool keep_;
    std::array<Ubp, 4> durations_{};
    std::vector<RadioSegment> segments_;
};

/// Joules spent by a timeline.
double energy_accounting(const RadioTimeline& timeline, const EnergyModel& model);
/// Joules for per-state UBP totals.
double energy_of(const std::array<Ubp, 4>& durations, const EnergyModel& model);

}  // namespace hybridmac
