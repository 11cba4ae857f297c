// Batch-Poisson packet arrivals: the compound-Poisson count distribution used
// by the MDP transition kernels, and seeded sampling for the simulator.
#pragma once

#include <vector>

#include "hybridmac/core.hpp"
#include "hybridmac/rng.hpp"

namespace hybridmac {

struct TrafficSpec {
    /// Batch arrival rate, batches per UBP.
    double rate = 0.0;
    /// batch_pmf[i] = P(batch size = i + 1).
    std::vector<double> batch_pmf{1.0};

    /// Single-packet batches at `lambda` packets per beacon interval.
    static TrafficSpec unit_batches_per_interval(double lambda, const SuperframeConfig& cfg);

    void validate() const;
    double mean_batch() const;
    /// Packets per UBP.
    double packet_rate() const { return rate * mean_batch(); }

    bool operator==(const TrafficSpec&) const = default;
};

/// Distribution of the packet count over an interval of `gamma` UBP, truncated
/// at `x_max`; everything above lands in `tail`.
struct ArrivalPmf {
    Ubp gamma = 0;
    int x_max = 0;
    std::vector<double> probs;
    double tail = 0.0;

    double at(int x) const {
        return x < 0 || x > x_max ? 0.0 : probs[static_cast<std::size_t>(x)];
    }
};

/// Exact truncated compound-Poisson pmf by direct convolution of the batch pmf.
ArrivalPmf arrival_pmf(const TrafficSpec& spec, Ubp gamma, int x_max);

/// P(X >= x), clamped to [0, 1]. Beyond x_max + 1 this is the tail mass.
double tail_mass(const ArrivalPmf& pmf, int x);

struct ArrivalEvent {
    Ubp time = 0;  ///< offset from the interval start
    int batch = 1;
    bool operator==(const ArrivalEvent&) const = default;
};

/// One realization of the batch-Poisson process on [0, gamma).
std::vector<ArrivalEvent> sample_arrivals(const TrafficSpec& spec, Ubp gamma, Rng& rng);

}  // namespace hybridmac
