// Command-line driver: policy solving, single runs, sweeps and analytic tables.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "hybridmac/csma_analytics.hpp"
#include "hybridmac/experiment.hpp"

using namespace hybridmac;

namespace {

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write '" + path + "'");
    f << text;
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", x);
    return buf;
}

void load_cache(const ExperimentPlan& plan, PolicyCache& cache) {
    if (!plan.policy_cache.empty()) cache.load(plan.policy_cache);
}

void store_cache(const ExperimentPlan& plan, const PolicyCache& cache, std::int64_t before) {
    if (!plan.policy_cache.empty() && cache.solver_invocations() > before) cache.save(plan.policy_cache);
}

int cmd_solve(const std::string& config, const std::string& out) {
    ExperimentPlan plan = load_plan(config);
    if (!out.empty()) plan.policy_cache = out;
    PolicyCache cache;
    load_cache(plan, cache);
    const std::size_t used = solve_and_cache_policies(plan, cache);
    std::cerr << used << " policies needed, " << cache.solver_invocations() << " solved\n";
    if (plan.policy_cache.empty())
        std::cout << cache.to_text();
    else
        store_cache(plan, cache, 0);
    return 0;
}

int cmd_run(const std::string& config, std::optional<std::uint64_t> seed, std::optional<double> value,
            const std::string& scheme_text, const std::string& out, std::string trace_path) {
    const ExperimentPlan plan = load_plan(config);
    const double v = value.value_or(plan.axis_values().front());
    const Scheme scheme = scheme_text.empty() ? plan.schemes.front() : parse_scheme(scheme_text);
    if (trace_path.empty()) trace_path = plan.trace;

    PolicyCache cache;
    load_cache(plan, cache);
    const PlanPoint point = plan_point(plan, v);
    const Scenario sc = make_scenario(plan, point, scheme, seed.value_or(plan.seeds.front()), cache);
    store_cache(plan, cache, 0);

    std::vector<TraceRow> trace;
    const SimMetrics m = run(sc, trace_path.empty() ? nullptr : &trace);
    if (!trace_path.empty()) {
        std::ostringstream os;
        os << kTraceHeader << '\n';
        for (const auto& r : trace) os << format_trace_row(r) << '\n';
        write_text(trace_path, os.str());
    }

    std::ostringstream os;
    os << "scheme," << scheme_name(scheme) << "\n"
       << axis_name(plan.axis) << "," << num(v) << "\n"
       << "seed," << sc.seed << "\n"
       << "superframes," << m.superframes << "\n"
       << "generated," << m.generated << "\n"
       << "delivered," << m.delivered << "\n"
       << "discarded," << m.discarded << "\n"
       << "dropped," << m.dropped << "\n"
       << "in_buffer," << m.in_buffer << "\n"
       << "collisions," << m.collisions << "\n"
       << "pdr," << num(m.pdr) << "\n"
       << "delay_ubp," << num(m.delay_mean) << "\n"
       << "delay_ms," << num(m.delay_mean * kUbpSeconds * 1e3) << "\n"
       << "energy_nodes_j," << num(m.energy_nodes_j) << "\n"
       << "energy_coordinator_j," << num(m.energy_coordinator_j) << "\n"
       << "energy_per_packet_j," << num(m.energy_per_packet_j) << "\n";
    write_text(out, os.str());
    return 0;
}

int cmd_sweep(const std::string& config, std::optional<std::uint64_t> seed, std::optional<int> threads,
              const std::string& out, bool quiet) {
    ExperimentPlan plan = load_plan(config);
    if (seed) {
        // Keep the replication count, restart the seed sequence.
        for (std::size_t i = 0; i < plan.seeds.size(); ++i) plan.seeds[i] = *seed + i;
    }
    if (threads) plan.threads = *threads;
    plan.validate();

    PolicyCache cache;
    load_cache(plan, cache);
    const auto before = cache.solver_invocations();
    std::function<void(const std::string&)> progress;
    if (!quiet) progress = [](const std::string& what) { std::cerr << "done " << what << "\n"; };
    const auto rows = execute(plan, cache, progress);
    store_cache(plan, cache, before);
    write_text(out.empty() ? plan.csv : out, format_csv(rows));
    return 0;
}

int cmd_analytics(const std::string& config, std::vector<int> nodes, std::vector<int> cfp, std::vector<double> theta,
                  const std::string& out) {
    SuperframeConfig cfg;
    MacParams mac;
    if (!config.empty()) {
        const ExperimentPlan plan = load_plan(config);
        cfg = plan.cfg;
        mac = plan.mac;
    }
    std::ostringstream os;
    os << "N,M,T_cap,theta,alpha,beta,p_cs,p_c,p_c_eff,kappa,goodput_per_cap,p_discard,p_drop,phi_cap,iterations\n";
    for (int n : nodes)
        for (int m : cfp)
            for (double th : theta) {
                SuperframeConfig c = cfg;
                c.cfp_slots = m;
                c.validate();
                const auto s = solve_saturation(n, c.cap_len(), c.tx_len, mac, th);
                os << n << ',' << m << ',' << c.cap_len() << ',' << num(th) << ',' << num(s.alpha) << ','
                   << num(s.beta) << ',' << num(s.p_cs) << ',' << num(s.p_c) << ',' << num(s.p_c_eff) << ','
                   << num(s.kappa) << ',' << num(s.kappa_per_cap()) << ',' << num(s.p_discard) << ','
                   << num(s.p_drop) << ',' << num(s.phi_cap) << ',' << s.iterations << '\n';
            }
    write_text(out, os.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid CSMA/CA-TDMA MAC solvers and simulator"};
    app.require_subcommand(1);

    std::string config, out, trace, scheme;
    std::optional<std::uint64_t> seed;
    std::optional<double> value;
    std::optional<int> threads;
    bool quiet = false;

    auto* solve = app.add_subcommand("solve", "Solve the MDCA policies a plan needs and write the policy cache");
    solve->add_option("config", config, "Experiment config")->required()->check(CLI::ExistingFile);
    solve->add_option("--out", out, "Policy cache file (default: output.policy_cache, else stdout)");

    auto* runc = app.add_subcommand("run", "Simulate one scenario of a plan");
    runc->add_option("config", config, "Experiment config")->required()->check(CLI::ExistingFile);
    runc->add_option("--seed", seed, "Seed (default: first plan seed)");
    runc->add_option("--value", value, "Axis value (default: first plan value)");
    runc->add_option("--scheme", scheme, "Scheme (default: first plan scheme)");
    runc->add_option("--out", out, "Metrics file (default: stdout)");
    runc->add_option("--trace", trace, "Per-superframe trace file");

    auto* sweep = app.add_subcommand("sweep", "Execute a plan and write the CSV result set");
    sweep->add_option("config", config, "Experiment config")->required()->check(CLI::ExistingFile);
    sweep->add_option("--seed", seed, "First seed; replication count is kept");
    sweep->add_option("--threads", threads, "Worker threads");
    sweep->add_option("--out", out, "CSV file (default: output.csv, else stdout)");
    sweep->add_flag("--quiet", quiet, "No progress on stderr");

    std::vector<int> nodes{2, 5, 10, 20}, cfp{0};
    std::vector<double> theta{0.0};
    auto* analytics = app.add_subcommand("analytics", "Tabulate saturation parameters");
    analytics->add_option("--config", config, "Take superframe and MAC parameters from a config")
        ->check(CLI::ExistingFile);
    analytics->add_option("--nodes", nodes, "Node counts")->delimiter(',');
    analytics->add_option("--cfp", cfp, "CFP slot counts M")->delimiter(',');
    analytics->add_option("--theta", theta, "Outage probabilities")->delimiter(',');
    analytics->add_option("--out", out, "CSV file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*solve) return cmd_solve(config, out);
        if (*runc) return cmd_run(config, seed, value, scheme, out, trace);
        if (*sweep) return cmd_sweep(config, seed, threads, out, quiet);
        if (*analytics) return cmd_analytics(config, nodes, cfp, theta, out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
