#include "hybridmac/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hybridmac {

namespace {

constexpr double kPoissonCutoff = 1e-12;

double poisson_pmf(double mean, int k) {
    if (mean == 0.0) return k == 0 ? 1.0 : 0.0;
    return std::exp(-mean + k * std::log(mean) - std::lgamma(k + 1.0));
}

int sample_batch(const std::vector<double>& pmf, Rng& rng) {
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
        acc += pmf[i];
        if (u < acc) return static_cast<int>(i) + 1;
    }
    // Rounding leftovers go to the largest batch with positive mass.
    for (std::size_t i = pmf.size(); i-- > 0;)
        if (pmf[i] > 0.0) return static_cast<int>(i) + 1;
    return 1;
}

}  // namespace

TrafficSpec TrafficSpec::unit_batches_per_interval(double lambda, const SuperframeConfig& cfg) {
    return TrafficSpec{lambda / static_cast<double>(cfg.interval()), {1.0}};
}

void TrafficSpec::validate() const {
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw ConfigError("arrival rate must be >= 0");
    if (batch_pmf.empty()) throw ConfigError("batch pmf must not be empty");
    double sum = 0.0;
    for (double p : batch_pmf) {
        if (!(p >= 0.0)) throw ConfigError("batch pmf entries must be >= 0");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("batch pmf must sum to 1");
}

double TrafficSpec::mean_batch() const {
    double m = 0.0;
    for (std::size_t i = 0; i < batch_pmf.size(); ++i) m += static_cast<double>(i + 1) * batch_pmf[i];
    return m;
}

ArrivalPmf arrival_pmf(const TrafficSpec& spec, Ubp gamma, int x_max) {
    spec.validate();
    if (gamma < 0) throw ConfigError("interval must be >= 0");
    if (x_max < 0) throw ConfigError("x_max must be >= 0");

    const double mean = spec.rate * static_cast<double>(gamma);
    const auto width = static_cast<std::size_t>(x_max) + 1;

    ArrivalPmf out;
    out.gamma = gamma;
    out.x_max = x_max;
    out.probs.assign(width, 0.0);

    // conv holds the k-fold convolution of the batch pmf on [0, x_max].
    std::vector<double> conv(width, 0.0), next(width, 0.0);
    conv[0] = 1.0;
    // Batches carry at least one packet, so k > x_max contributes nothing here.
    for (int k = 0; k <= x_max; ++k) {
        const double w = poisson_pmf(mean, k);
        if (k > mean && w < kPoissonCutoff) break;
        for (std::size_t x = 0; x < width; ++x) out.probs[x] += w * conv[x];

        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t x = 0; x < width; ++x) {
            if (conv[x] == 0.0) continue;
            for (std::size_t z = 0; z < spec.batch_pmf.size() && x + z + 1 < width; ++z)
                next[x + z + 1] += conv[x] * spec.batch_pmf[z];
        }
        conv.swap(next);
    }
    double sum = std::accumulate(out.probs.begin(), out.probs.end(), 0.0);
    out.tail = std::max(0.0, 1.0 - sum);
    return out;
}

double tail_mass(const ArrivalPmf& pmf, int x) {
    if (x <= 0) return 1.0;
    if (x > pmf.x_max + 1) return pmf.tail;
    double below = 0.0;
    for (int h = 0; h < x; ++h) below += pmf.probs[static_cast<std::size_t>(h)];
    return std::clamp(1.0 - below, 0.0, 1.0);
}

std::vector<ArrivalEvent> sample_arrivals(const TrafficSpec& spec, Ubp gamma, Rng& rng) {
    std::vector<ArrivalEvent> out;
    if (spec.rate <= 0.0 || gamma <= 0) return out;
    const double horizon = static_cast<double>(gamma);
    double t = rng.exponential(spec.rate);
    while (t < horizon) {
        out.push_back({static_cast<Ubp>(std::floor(t)), sample_batch(spec.batch_pmf, rng)});
        t += rng.exponential(spec.rate);
    }
    return out;
}

}  // namespace hybridmac
