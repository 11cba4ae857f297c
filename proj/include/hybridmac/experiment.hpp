// Experiment plans: config parsing, parameter sweeps, policy caching and CSV
// result sets.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hybridmac/core.hpp"
#include "hybridmac/energy.hpp"
#include "hybridmac/mdca.hpp"
#include "hybridmac/simulator.hpp"

namespace hybridmac {

enum class SweepAxis { OfferedTraffic, Slots, Nodes, Theta, Heterogeneous };

std::string axis_name(SweepAxis a);
SweepAxis parse_axis(const std::string& text);

/// Error in config text, carrying the 1-based line number (0 when the problem
/// is not tied to one line).
class PlanError : public ConfigError {
public:
    PlanError(int line, const std::string& what);
    int line() const { return line_; }

private:
    int line_;
};

struct ExperimentPlan {
    // [network]
    int nodes = 20;
    SuperframeConfig cfg;
    int buffer_max = 5;
    int horizon = 5000;
    double theta = 0.0;
    // [mac]
    MacParams mac{.drop_enabled = false};
    // [traffic]
    double offered_traffic = 0.5;  ///< G, used unless the axis overrides it
    std::vector<double> batch_pmf{1.0};
    bool saturation = false;
    // [scheme]
    std::vector<Scheme> schemes{Scheme::Mdca};
    double gamma = 0.9;
    EnergyModel energy;
    // [sweep]
    SweepAxis axis = SweepAxis::OfferedTraffic;
    std::vector<double> values;  ///< empty: the single base point
    std::vector<std::uint64_t> seeds{1};
    int threads = 1;
    // [output]
    std::string csv;
    std::string policy_cache;
    std::string trace;

    /// Axis values, or the base point's value when no sweep is given.
    std::vector<double> axis_values() const;
    void validate() const;
    bool operator==(const ExperimentPlan&) const = default;
};

ExperimentPlan parse_plan(const std::string& text);
ExperimentPlan load_plan(const std::string& path);
/// Config text that parses back to an equal plan.
std::string serialize_plan(const ExperimentPlan& plan);

/// Heterogeneous traffic groups: share of the group-normalized load.
struct TrafficGroup {
    const char* name;
    double fraction;
};
inline constexpr TrafficGroup kTrafficGroups[3] = {{"low", 0.15}, {"medium", 0.30}, {"high", 0.55}};

/// Scenario of one axis value before a scheme is chosen.
struct PlanPoint {
    double value = 0.0;
    Scenario scenario;
    std::vector<int> group;  ///< per node: index into kTrafficGroups, or -1
};

PlanPoint plan_point(const ExperimentPlan& plan, double value);

/// Solver inputs of the MDCA policy that node `node` of a point uses.
MdcaParams mdca_params_for(const ExperimentPlan& plan, const PlanPoint& point, int node);

/// Solved MDCA policies keyed by every solver input, persistable as text.
class PolicyCache {
public:
    static std::string key(int nodes, const MdcaParams& params);

    std::shared_ptr<const MdpPolicy> get_or_solve(int nodes, const MdcaParams& params);
    std::shared_ptr<const MdpPolicy> find(const std::string& key) const;
    std::size_t size() const { return policies_.size(); }
    std::int64_t solver_invocations() const { return invocations_; }

    void load(const std::string& path);  ///< missing file: no-op
    void save(const std::string& path) const;
    std::string to_text() const;
    void from_text(const std::string& text);

private:
    std::map<std::string, std::shared_ptr<const MdpPolicy>> policies_;
    std::int64_t invocations_ = 0;
};

/// Solves (or finds) every policy the plan's MDCA runs need. Returns the
/// number of distinct policies the plan uses.
std::size_t solve_and_cache_policies(const ExperimentPlan& plan, PolicyCache& cache);

/// Fully specified scenario for one axis value, scheme and seed.
Scenario make_scenario(const ExperimentPlan& plan, const PlanPoint& point, Scheme scheme, std::uint64_t seed,
                       PolicyCache& cache);

struct ResultRow {
    std::string axis;
    double value = 0.0;
    std::string scheme;
    std::string group;  ///< "all" or a traffic group name
    MetricSummary pdr;
    MetricSummary delay_ubp;
    MetricSummary delay_ms;
    MetricSummary energy_per_packet_j;
    int replications = 0;
};

inline constexpr const char* kCsvHeader =
    "axis,value,scheme,group,pdr_mean,pdr_min,pdr_max,delay_ubp_mean,delay_ubp_min,delay_ubp_max,"
    "delay_ms_mean,delay_ms_min,delay_ms_max,energy_per_packet_mean,energy_per_packet_min,"
    "energy_per_packet_max,replications";

std::string format_csv_row(const ResultRow& row);
std::string format_csv(const std::vector<ResultRow>& rows);

/// Runs every (axis value, scheme, seed) and merges rows in (axis value,
/// scheme, group) order. Errors are rethrown with that context.
std::vector<ResultRow> execute(const ExperimentPlan& plan, PolicyCache& cache,
                               const std::function<void(const std::string&)>& progress = {});

}  // namespace hybridmac
