#include "hybridmac/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hybridmac {

std::string axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::OfferedTraffic: return "offered_traffic";
        case SweepAxis::Slots: return "M";
        case SweepAxis::Nodes: return "N";
        case SweepAxis::Theta: return "theta";
        case SweepAxis::Heterogeneous: return "heterogeneous";
    }
    return "?";
}

SweepAxis parse_axis(const std::string& text) {
    for (SweepAxis a : {SweepAxis::OfferedTraffic, SweepAxis::Slots, SweepAxis::Nodes, SweepAxis::Theta,
                        SweepAxis::Heterogeneous})
        if (axis_name(a) == text) return a;
    throw ConfigError("unknown sweep axis '" + text + "'");
}

PlanError::PlanError(int line, const std::string& what)
    : ConfigError(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(trim(item));
    return out;
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, r.ptr);
}

// Parsers report what was wrong; the caller adds the line.
double to_double(const std::string& s) {
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw ConfigError("expected a number, got '" + s + "'");
    return v;
}

long long to_int(const std::string& s) {
    long long v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw ConfigError("expected an integer, got '" + s + "'");
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
    if (s == "false" || s == "no" || s == "0" || s == "off") return false;
    throw ConfigError("expected true or false, got '" + s + "'");
}

template <class T, class F>
std::vector<T> to_list(const std::string& s, F parse) {
    std::vector<T> out;
    for (const auto& item : split_list(s)) out.push_back(static_cast<T>(parse(item)));
    return out;
}

template <class T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += f(v[i]);
    }
    return out;
}

bool is_integer(double v) { return std::isfinite(v) && v == std::floor(v); }

}  // namespace

std::vector<double> ExperimentPlan::axis_values() const {
    if (!values.empty()) return values;
    switch (axis) {
        case SweepAxis::OfferedTraffic: return {offered_traffic};
        case SweepAxis::Slots: return {static_cast<double>(cfg.cfp_slots)};
        case SweepAxis::Nodes:
        case SweepAxis::Heterogeneous: return {static_cast<double>(nodes)};
        case SweepAxis::Theta: return {theta};
    }
    return {};
}

void ExperimentPlan::validate() const {
    if (nodes < 1) throw ConfigError("network.nodes must be >= 1");
    if (cfg.cfp_slots > cfg.slots)
        throw ConfigError("network.cfp_slots: M=" + std::to_string(cfg.cfp_slots) + " exceeds K=" +
                          std::to_string(cfg.slots));
    cfg.validate();
    mac.validate();
    energy.validate();
    if (buffer_max < 1) throw ConfigError("network.buffer_max must be >= 1");
    if (horizon < 1) throw ConfigError("network.horizon must be >= 1");
    if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("network.theta must lie in [0, 1]");
    if (!(offered_traffic >= 0.0)) throw ConfigError("traffic.offered_traffic must be >= 0");
    TrafficSpec{1.0, batch_pmf}.validate();
    if (schemes.empty()) throw ConfigError("scheme.schemes must not be empty");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("scheme.gamma must lie in [0, 1)");
    if (seeds.empty()) throw ConfigError("sweep.seeds must not be empty");
    if (threads < 1) throw ConfigError("sweep.threads must be >= 1");
    for (double v : axis_values()) {
        const std::string where = "sweep.values: " + axis_name(axis) + " value " + format_double(v);
        switch (axis) {
            case SweepAxis::OfferedTraffic:
                if (!(v >= 0.0)) throw ConfigError(where + " must be >= 0");
                break;
            case SweepAxis::Theta:
                if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(where + " must lie in [0, 1]");
                break;
            case SweepAxis::Slots:
                if (!is_integer(v) || v < 0 || v > cfg.slots)
                    throw ConfigError(where + " must be an integer in [0, K=" + std::to_string(cfg.slots) + "]");
                break;
            case SweepAxis::Nodes:
                if (!is_integer(v) || v < 1) throw ConfigError(where + " must be a positive integer");
                break;
            case SweepAxis::Heterogeneous:
                if (!is_integer(v) || v < 3 || static_cast<long long>(v) % 3 != 0)
                    throw ConfigError(where + " must be a positive multiple of 3 (node count)");
                break;
        }
    }
}

ExperimentPlan parse_plan(const std::string& text) {
    ExperimentPlan p;
    std::istringstream in(text);
    std::string raw, section;
    int line_no = 0;
    std::set<std::string> seen;
    std::optional<std::uint64_t> seed;
    std::optional<int> replications;
    bool seeds_given = false;
    int seeds_line = 0;

    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw PlanError(line_no, "malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            static const std::set<std::string> kSections{"network", "mac", "traffic", "scheme", "sweep", "output"};
            if (!kSections.count(section)) throw PlanError(line_no, "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw PlanError(line_no, "expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) throw PlanError(line_no, "key '" + key + "' appears before any [section]");
        const std::string full = section + "." + key;
        if (!seen.insert(full).second) throw PlanError(line_no, "duplicate key '" + full + "'");

        try {
            auto as_int = [&] { return static_cast<int>(to_int(value)); };
            bool known = true;
            if (section == "network") {
                if (key == "nodes") p.nodes = as_int();
                else if (key == "slots") p.cfg.slots = as_int();
                else if (key == "cfp_slots") p.cfg.cfp_slots = as_int();
                else if (key == "slot_len") p.cfg.slot_len = to_int(value);
                else if (key == "beacon_len") p.cfg.beacon_len = to_int(value);
                else if (key == "tx_len") p.cfg.tx_len = to_int(value);
                else if (key == "packets_per_slot") p.cfg.packets_per_slot = as_int();
                else if (key == "max_tenure") p.cfg.max_tenure = as_int();
                else if (key == "buffer_max") p.buffer_max = as_int();
                else if (key == "horizon") p.horizon = as_int();
                else if (key == "theta") p.theta = to_double(value);
                else known = false;
            } else if (section == "mac") {
                if (key == "cw") p.mac.cw_schedule = to_list<int>(value, to_int);
                else if (key == "max_backoffs") p.mac.max_backoffs = as_int();
                else if (key == "max_retries") p.mac.max_retries = as_int();
                else if (key == "drop") p.mac.drop_enabled = to_bool(value);
                else known = false;
            } else if (section == "traffic") {
                if (key == "offered_traffic") p.offered_traffic = to_double(value);
                else if (key == "batch_pmf") p.batch_pmf = to_list<double>(value, to_double);
                else if (key == "saturation") p.saturation = to_bool(value);
                else known = false;
            } else if (section == "scheme") {
                if (key == "schemes") {
                    p.schemes.clear();
                    for (const auto& s : split_list(value)) p.schemes.push_back(parse_scheme(s));
                } else if (key == "gamma") p.gamma = to_double(value);
                else if (key == "xi_x") p.energy.xi_x = to_double(value);
                else if (key == "xi_c") p.energy.xi_c = to_double(value);
                else if (key == "power_sleep") p.energy.sleep_w = to_double(value);
                else if (key == "power_tx") p.energy.transmit_w = to_double(value);
                else if (key == "power_rx") p.energy.receive_w = to_double(value);
                else if (key == "power_idle") p.energy.idle_w = to_double(value);
                else known = false;
            } else if (section == "sweep") {
                if (key == "axis") p.axis = parse_axis(value);
                else if (key == "values") p.values = to_list<double>(value, to_double);
                else if (key == "seeds") {
                    p.seeds = to_list<std::uint64_t>(value, to_int);
                    seeds_given = true;
                    seeds_line = line_no;
                } else if (key == "seed") seed = static_cast<std::uint64_t>(to_int(value));
                else if (key == "replications") replications = as_int();
                else if (key == "threads") p.threads = as_int();
                else known = false;
            } else if (section == "output") {
                if (key == "csv") p.csv = value;
                else if (key == "policy_cache") p.policy_cache = value;
                else if (key == "trace") p.trace = value;
                else known = false;
            }
            if (!known) throw PlanError(line_no, "unknown key '" + key + "' in [" + section + "]");
        } catch (const PlanError&) {
            throw;
        } catch (const std::exception& e) {
            throw PlanError(line_no, full + ": " + e.what());
        }
    }

    if (seeds_given && (seed || replications))
        throw PlanError(seeds_line, "sweep.seeds cannot be combined with sweep.seed or sweep.replications");
    if (!seeds_given && (seed || replications)) {
        const int r = replications.value_or(1);
        if (r < 1) throw PlanError(0, "sweep.replications must be >= 1");
        p.seeds.clear();
        for (int i = 0; i < r; ++i) p.seeds.push_back(seed.value_or(1) + static_cast<std::uint64_t>(i));
    }
    p.validate();
    return p;
}

ExperimentPlan load_plan(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_plan(ss.str());
}

std::string serialize_plan(const ExperimentPlan& p) {
    std::ostringstream os;
    auto d = [](double x) { return format_double(x); };
    os << "[network]\n"
       << "nodes = " << p.nodes << "\n"
       << "slots = " << p.cfg.slots << "\n"
       << "cfp_slots = " << p.cfg.cfp_slots << "\n"
       << "slot_len = " << p.cfg.slot_len << "\n"
       << "beacon_len = " << p.cfg.beacon_len << "\n"
       << "tx_len = " << p.cfg.tx_len << "\n"
       << "packets_per_slot = " << p.cfg.packets_per_slot << "\n"
       << "max_tenure = " << p.cfg.max_tenure << "\n"
       << "buffer_max = " << p.buffer_max << "\n"
       << "horizon = " << p.horizon << "\n"
       << "theta = " << d(p.theta) << "\n\n";
    os << "[mac]\n"
       << "cw = " << join<int>(p.mac.cw_schedule, [](const int& x) { return std::to_string(x); }) << "\n"
       << "max_backoffs = " << p.mac.max_backoffs << "\n"
       << "max_retries = " << p.mac.max_retries << "\n"
       << "drop = " << (p.mac.drop_enabled ? "true" : "false") << "\n\n";
    os << "[traffic]\n"
       << "offered_traffic = " << d(p.offered_traffic) << "\n"
       << "batch_pmf = " << join<double>(p.batch_pmf, [](const double& x) { return format_double(x); }) << "\n"
       << "saturation = " << (p.saturation ? "true" : "false") << "\n\n";
    os << "[scheme]\n"
       << "schemes = " << join<Scheme>(p.schemes, [](const Scheme& s) { return scheme_name(s); }) << "\n"
       << "gamma = " << d(p.gamma) << "\n"
       << "xi_x = " << d(p.energy.xi_x) << "\n"
       << "xi_c = " << d(p.energy.xi_c) << "\n"
       << "power_sleep = " << d(p.energy.sleep_w) << "\n"
       << "power_tx = " << d(p.energy.transmit_w) << "\n"
       << "power_rx = " << d(p.energy.receive_w) << "\n"
       << "power_idle = " << d(p.energy.idle_w) << "\n\n";
    os << "[sweep]\n"
       << "axis = " << axis_name(p.axis) << "\n";
    if (!p.values.empty())
        os << "values = " << join<double>(p.values, [](const double& x) { return format_double(x); }) << "\n";
    os << "seeds = " << join<std::uint64_t>(p.seeds, [](const std::uint64_t& x) { return std::to_string(x); })
       << "\n"
       << "threads = " << p.threads << "\n";
    if (!p.csv.empty() || !p.policy_cache.empty() || !p.trace.empty()) {
        os << "\n[output]\n";
        if (!p.csv.empty()) os << "csv = " << p.csv << "\n";
        if (!p.policy_cache.empty()) os << "policy_cache = " << p.policy_cache << "\n";
        if (!p.trace.empty()) os << "trace = " << p.trace << "\n";
    }
    return os.str();
}

PlanPoint plan_point(const ExperimentPlan& plan, double value) {
    PlanPoint pt;
    pt.value = value;
    Scenario& sc = pt.scenario;
    sc.cfg = plan.cfg;
    sc.mac = plan.mac;
    sc.buffer_max = plan.buffer_max;
    sc.horizon = plan.horizon;
    sc.saturation = plan.saturation;
    sc.energy = plan.energy;

    int nodes = plan.nodes;
    double load = plan.offered_traffic;
    double theta = plan.theta;
    switch (plan.axis) {
        case SweepAxis::OfferedTraffic: load = value; break;
        case SweepAxis::Slots: sc.cfg.cfp_slots = static_cast<int>(value); break;
        case SweepAxis::Nodes:
            nodes = static_cast<int>(value);
            load = 1.0;  // lambda = (T_sf + T_beacon) / (T_tx N) per node
            break;
        case SweepAxis::Theta: theta = value; break;
        case SweepAxis::Heterogeneous: nodes = static_cast<int>(value); break;
    }

    const double mean_batch = TrafficSpec{1.0, plan.batch_pmf}.mean_batch();
    auto spec_for = [&](double lambda) {
        return TrafficSpec{lambda / (static_cast<double>(sc.cfg.interval()) * mean_batch), plan.batch_pmf};
    };
    if (plan.axis == SweepAxis::Heterogeneous) {
        const int per_group = nodes / 3;
        for (int g = 0; g < 3; ++g) {
            const double lambda = kTrafficGroups[g].fraction * static_cast<double>(sc.cfg.interval()) /
                                  (static_cast<double>(per_group) * static_cast<double>(sc.cfg.tx_len));
            for (int i = 0; i < per_group; ++i) {
                sc.traffic.push_back(spec_for(lambda));
                pt.group.push_back(g);
            }
        }
    } else {
        sc.traffic.assign(static_cast<std::size_t>(nodes), spec_for(lambda_for_load(nodes, load, sc.cfg)));
        pt.group.assign(static_cast<std::size_t>(nodes), -1);
    }
    if (theta > 0.0) sc.outage.assign(static_cast<std::size_t>(nodes), theta);
    return pt;
}

MdcaParams mdca_params_for(const ExperimentPlan& plan, const PlanPoint& point, int node) {
    MdcaParams mp;
    mp.cfg = point.scenario.cfg;
    mp.mac = point.scenario.mac;
    mp.traffic = point.scenario.traffic.at(static_cast<std::size_t>(node));
    mp.buffer_max = plan.buffer_max;
    mp.gamma = plan.gamma;
    mp.xi_x = plan.energy.xi_x;
    mp.xi_c = plan.energy.xi_c;
    mp.theta = point.scenario.outage_of(node);
    return mp;
}

std::string PolicyCache::key(int nodes, const MdcaParams& p) {
    std::ostringstream os;
    auto d = [](double x) { return format_double(x); };
    os << "N=" << nodes << ";K=" << p.cfg.slots << ";M=" << p.cfg.cfp_slots
       << ";lambda=" << d(p.traffic.packet_rate() * static_cast<double>(p.cfg.interval())) << ";rate=" << d(p.traffic.rate)
       << ";batch=" << join<double>(p.traffic.batch_pmf, [](const double& x) { return format_double(x); })
       << ";slot=" << p.cfg.slot_len << ";beacon=" << p.cfg.beacon_len << ";tx=" << p.cfg.tx_len
       << ";eta=" << p.cfg.packets_per_slot << ";rho=" << p.cfg.max_tenure
       << ";cw=" << join<int>(p.mac.cw_schedule, [](const int& x) { return std::to_string(x); })
       << ";m=" << p.mac.max_backoffs << ";W=" << p.mac.max_retries << ";drop=" << p.mac.drop_enabled
       << ";B=" << p.buffer_max << ";gamma=" << d(p.gamma) << ";xi_x=" << d(p.xi_x) << ";xi_c=" << d(p.xi_c)
       << ";theta=" << d(p.theta) << ";lossless=" << p.lossless_throughput;
    return os.str();
}

std::shared_ptr<const MdpPolicy> PolicyCache::find(const std::string& k) const {
    auto it = policies_.find(k);
    return it == policies_.end() ? nullptr : it->second;
}

std::shared_ptr<const MdpPolicy> PolicyCache::get_or_solve(int nodes, const MdcaParams& params) {
    const std::string k = key(nodes, params);
    if (auto hit = find(k)) return hit;
    ++invocations_;
    auto policy = std::make_shared<const MdpPolicy>(solve_mdca(make_mdca_context(nodes, params)));
    policies_.emplace(k, policy);
    return policy;
}

// One row per (policy, buffer level): key, buffer, action, value.
std::string PolicyCache::to_text() const {
    std::ostringstream os;
    for (const auto& [k, p] : policies_)
        for (std::size_t b = 0; b < p->action.size(); ++b)
            os << k << '\t' << b << '\t' << action_name(p->action[b]) << '\t' << format_double(p->value[b])
               << '\n';
    return os.str();
}

void PolicyCache::from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    std::map<std::string, MdpPolicy> parsed;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string field;
        while (std::getline(ls, field, '\t')) f.push_back(field);
        if (f.size() != 4) throw PlanError(line_no, "policy cache row needs 4 tab-separated fields");
        try {
            MdpPolicy& p = parsed[f[0]];
            if (to_int(f[1]) != static_cast<long long>(p.action.size()))
                throw ConfigError("buffer levels must be listed in order from 0");
            const auto act = parse_action(f[2]);
            if (!act) throw ConfigError("bad action '" + f[2] + "'");
            p.action.push_back(*act);
            p.value.push_back(to_double(f[3]));
        } catch (const std::exception& e) {
            throw PlanError(line_no, std::string("policy cache: ") + e.what());
        }
    }
    for (auto& [k, p] : parsed) policies_[k] = std::make_shared<const MdpPolicy>(std::move(p));
}

void PolicyCache::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) return;
    std::stringstream ss;
    ss << f.rdbuf();
    from_text(ss.str());
}

void PolicyCache::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write policy cache '" + path + "'");
    f << to_text();
}

std::size_t solve_and_cache_policies(const ExperimentPlan& plan, PolicyCache& cache) {
    plan.validate();
    if (std::find(plan.schemes.begin(), plan.schemes.end(), Scheme::Mdca) == plan.schemes.end()) return 0;
    std::set<std::string> used;
    for (double v : plan.axis_values()) {
        const PlanPoint pt = plan_point(plan, v);
        for (int n = 0; n < pt.scenario.nodes(); ++n) {
            const auto mp = mdca_params_for(plan, pt, n);
            used.insert(PolicyCache::key(pt.scenario.nodes(), mp));
            cache.get_or_solve(pt.scenario.nodes(), mp);
        }
    }
    return used.size();
}

Scenario make_scenario(const ExperimentPlan& plan, const PlanPoint& point, Scheme scheme, std::uint64_t seed,
                       PolicyCache& cache) {
    Scenario sc = point.scenario;
    sc.scheme = scheme;
    sc.seed = seed;
    if (scheme == Scheme::Csma || scheme == Scheme::Csma2) sc.cfg.cfp_slots = 0;
    if (scheme == Scheme::Mdca) {
        std::vector<std::shared_ptr<const MdpPolicy>> per_node;
        for (int n = 0; n < sc.nodes(); ++n)
            per_node.push_back(cache.get_or_solve(sc.nodes(), mdca_params_for(plan, point, n)));
        const bool shared = std::all_of(per_node.begin(), per_node.end(),
                                        [&](const auto& p) { return p == per_node.front(); });
        sc.policies = shared ? std::vector<std::shared_ptr<const MdpPolicy>>{per_node.front()} : per_node;
    }
    return sc;
}

std::string format_csv_row(const ResultRow& r) {
    std::ostringstream os;
    auto d = [](double x) {
        if (std::isnan(x)) return std::string("nan");
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.9g", x);
        return std::string(buf);
    };
    auto triple = [&](const MetricSummary& m) { return d(m.mean) + "," + d(m.min) + "," + d(m.max); };
    os << r.axis << ',' << d(r.value) << ',' << r.scheme << ',' << r.group << ',' << triple(r.pdr) << ','
       << triple(r.delay_ubp) << ',' << triple(r.delay_ms) << ',' << triple(r.energy_per_packet_j) << ','
       << r.replications;
    return os.str();
}

std::string format_csv(const std::vector<ResultRow>& rows) {
    std::string out = std::string(kCsvHeader) + "\n";
    for (const auto& r : rows) out += format_csv_row(r) + "\n";
    return out;
}

namespace {

struct RunFigures {
    double pdr, delay_ubp, energy_per_packet;
};

double ratio(double a, double b) { return b > 0 ? a / b : std::numeric_limits<double>::quiet_NaN(); }

RunFigures figures(const SimMetrics& m, const std::vector<int>& group, int g) {
    if (g < 0) return {m.pdr, m.delay_mean, m.energy_per_packet_j};
    double gen = 0, del = 0, delay = 0, energy = 0;
    for (std::size_t n = 0; n < m.per_node.size(); ++n) {
        if (group[n] != g) continue;
        const auto& p = m.per_node[n];
        gen += static_cast<double>(p.generated);
        del += static_cast<double>(p.delivered);
        delay += p.delay_total_ubp;
        energy += p.energy_j;
    }
    return {ratio(del, gen), ratio(delay, del), ratio(energy, del)};
}

}  // namespace

std::vector<ResultRow> execute(const ExperimentPlan& plan, PolicyCache& cache,
                               const std::function<void(const std::string&)>& progress) {
    plan.validate();
    solve_and_cache_policies(plan, cache);

    struct Job {
        std::size_t point;
        Scheme scheme;
        std::uint64_t seed;
        Scenario scenario;
    };
    std::vector<PlanPoint> points;
    for (double v : plan.axis_values()) points.push_back(plan_point(plan, v));
    std::vector<Job> jobs;
    for (std::size_t p = 0; p < points.size(); ++p)
        for (Scheme s : plan.schemes)
            for (std::uint64_t seed : plan.seeds)
                jobs.push_back({p, s, seed, make_scenario(plan, points[p], s, seed, cache)});

    auto context = [&](const Job& j) {
        return axis_name(plan.axis) + "=" + format_double(points[j.point].value) + ", scheme " +
               scheme_name(j.scheme) + ", seed " + std::to_string(j.seed);
    };

    std::vector<SimMetrics> results(jobs.size());
    std::vector<std::string> errors(jobs.size());
    auto work = [&](std::size_t k) {
        try {
            results[k] = run(jobs[k].scenario);
        } catch (const std::exception& e) {
            errors[k] = context(jobs[k]) + ": " + e.what();
        }
    };
    const int workers = std::max(1, std::min<int>(plan.threads, static_cast<int>(jobs.size())));
    if (workers == 1) {
        for (std::size_t k = 0; k < jobs.size(); ++k) {
            work(k);
            if (progress) progress(context(jobs[k]));
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::future<void>> pool;
        for (int w = 0; w < workers; ++w)
            pool.push_back(std::async(std::launch::async, [&] {
                for (std::size_t k = next++; k < jobs.size(); k = next++) work(k);
            }));
        for (auto& f : pool) f.get();
    }
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error(e);

    std::vector<ResultRow> rows;
    std::size_t k = 0;
    for (std::size_t p = 0; p < points.size(); ++p)
        for (Scheme s : plan.schemes) {
            const std::size_t first = k;
            k += plan.seeds.size();
            std::vector<int> groups{-1};
            if (plan.axis == SweepAxis::Heterogeneous) groups = {-1, 0, 1, 2};
            for (int g : groups) {
                std::vector<double> pdr, delay, delay_ms, epp;
                for (std::size_t j = first; j < k; ++j) {
                    const auto f = figures(results[j], points[p].group, g);
                    pdr.push_back(f.pdr);
                    delay.push_back(f.delay_ubp);
                    delay_ms.push_back(f.delay_ubp * kUbpSeconds * 1e3);
                    epp.push_back(f.energy_per_packet);
                }
                ResultRow row;
                row.axis = axis_name(plan.axis);
                row.value = points[p].value;
                row.scheme = scheme_name(s);
                row.group = g < 0 ? "all" : kTrafficGroups[g].name;
                row.pdr = summarize(pdr);
                row.delay_ubp = summarize(delay);
                row.delay_ms = summarize(delay_ms);
                row.energy_per_packet_j = summarize(epp);
                row.replications = static_cast<int>(plan.seeds.size());
                rows.push_back(row);
            }
        }
    return rows;
}

}  // namespace hybridmac
