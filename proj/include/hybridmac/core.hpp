// Shared vocabulary for the hybrid CSMA/CA-TDMA star network: superframe
// geometry, MAC parameters, channel-access actions and per-node state.
//
// Every duration in the library is an integer number of unit backoff periods
// (UBP, 320 us). There is no sub-UBP time anywhere.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hybridmac {

/// Integer count of unit backoff periods.
using Ubp = std::int64_t;

/// Wall-clock length of one unit backoff period.
inline constexpr double kUbpSeconds = 320e-6;

/// Thrown when a value record violates its invariants.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Timing skeleton of one beacon interval: a beacon followed by K equal slots,
/// the last M of which form the contention-free period.
struct SuperframeConfig {
    int slots = 16;          ///< K
    int cfp_slots = 7;       ///< M
    Ubp slot_len = 24;       ///< T_slot
    Ubp beacon_len = 4;      ///< T_beacon
    int packets_per_slot = 2;///< eta
    int max_tenure = 18;     ///< rho, consecutive superframes a node may keep a slot
    Ubp tx_len = 10;         ///< T_tx, data + ack + IFS + propagation

    void validate() const;

    Ubp sf_len() const { return static_cast<Ubp>(slots) * slot_len; }
    Ubp cap_len() const { return static_cast<Ubp>(slots - cfp_slots) * slot_len; }
    Ubp cfp_len() const { return static_cast<Ubp>(cfp_slots) * slot_len; }
    /// Beacon interval T_sf + T_beacon.
    Ubp interval() const { return sf_len() + beacon_len; }

    bool operator==(const SuperframeConfig&) const = default;
};

/// Half-open UBP interval [begin, end).
struct UbpSpan {
    Ubp begin = 0;
    Ubp end = 0;
    Ubp length() const { return end - begin; }
    bool operator==(const UbpSpan&) const = default;
};

/// Offsets measured from the end of the beacon.
struct SuperframeLayout {
    Ubp sf_len = 0;
    Ubp cap_len = 0;
    Ubp cfp_len = 0;
    UbpSpan cap;
    std::vector<UbpSpan> cfp_slots;
};

SuperframeLayout superframe_layout(const SuperframeConfig& cfg);

/// Offered load G = N * lambda * T_tx / (T_sf + T_beacon), with lambda in
/// packets per beacon interval per node.
double offered_traffic(int nodes, double lambda_per_interval, const SuperframeConfig& cfg);

/// Per-node arrival rate (packets per beacon interval) that produces load G.
double lambda_for_load(int nodes, double load, const SuperframeConfig& cfg);

/// Slotted CSMA/CA parameters.
struct MacParams {
    /// Contention window per backoff stage; stages past the end reuse the last entry.
    std::vector<int> cw_schedule{8, 16, 32, 32, 32};
    int max_backoffs = 4;     ///< m
    int max_retries = 3;      ///< W
    bool drop_enabled = true; ///< backoff/retry limits discard packets

    void validate() const;
    int cw(int stage) const;

    bool operator==(const MacParams&) const = default;
};

/// Contention-window schedule of the IEEE 802.15.4 exponent rule.
std::vector<int> cw_from_exponents(int min_be, int max_be, int max_backoffs);

/// Per-superframe channel-access choice. The numeric order is the global
/// tie-breaking order: lower value wins a tie.
enum class Action : std::uint8_t { Defer = 1, Cap = 2, Cfp = 3, CapCfp = 4 };

inline constexpr std::array<Action, 4> kAllActions{Action::Defer, Action::Cap, Action::Cfp,
                                                   Action::CapCfp};

inline int action_index(Action a) { return static_cast<int>(a) - 1; }
inline Action action_from_index(int i) { return kAllActions.at(static_cast<std::size_t>(i)); }
/// True for a3/a4, the actions that occupy a TDMA slot.
inline bool uses_slot(Action a) { return a == Action::Cfp || a == Action::CapCfp; }
/// True for a2/a4, the actions that contend during the CAP.
inline bool uses_cap(Action a) { return a == Action::Cap || a == Action::CapCfp; }

std::string_view action_name(Action a);
/// Accepts "a1".."a4", "1".."4" or the long names.
std::optional<Action> parse_action(std::string_view text);

struct NodeState {
    int node_id = 0;
    int buffer = 0;
    bool slot_held = false;
    int slot_tenure = 0;

    void validate(int buffer_max, int max_tenure) const;
};

}  // namespace hybridmac
