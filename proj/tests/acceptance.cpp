// Acceptance checks: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "hybridmac/csma_analytics.hpp"
#include "hybridmac/experiment.hpp"
#include "hybridmac/fading.hpp"
#include "hybridmac/mcca.hpp"
#include "hybridmac/mdca.hpp"
#include "hybridmac/simulator.hpp"
#include "hybridmac/traffic.hpp"
#include "oracles.hpp"

using namespace hybridmac;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::int64_t g_runs = 0;
std::int64_t g_unconserved = 0;

void note_run(const SimMetrics& m) {
    ++g_runs;
    if (!m.conserved()) ++g_unconserved;
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, a);
    return buf;
}

std::vector<std::uint64_t> seeds(int count) {
    std::vector<std::uint64_t> s(static_cast<std::size_t>(count));
    std::iota(s.begin(), s.end(), 1);
    return s;
}

// Simulated saturation goodput against kappa * T_cap.
Outcome saturation_agreement() {
    Outcome o;
    double worst = 0.0;
    for (int n : {5, 10, 20})
        for (double th : {0.0, 0.1, 0.2}) {
            Scenario sc;
            sc.cfg.cfp_slots = 0;
            sc.scheme = Scheme::Csma;
            sc.mac.drop_enabled = true;
            sc.traffic.assign(static_cast<std::size_t>(n), TrafficSpec{});
            sc.saturation = true;
            sc.horizon = 5000;
            sc.outage.assign(static_cast<std::size_t>(n), th);
            const auto m = run(sc);
            note_run(m);
            const auto sat = solve_saturation(n, sc.cfg.cap_len(), sc.cfg.tx_len, sc.mac, th);
            const double analytic = sat.kappa_per_cap();
            const double rel = std::abs(m.cap_goodput_per_node() - analytic) / analytic;
            worst = std::max(worst, rel);
            if (rel > 0.10) o.pass = false;
        }
    o.detail = "worst relative gap " + fmt("%.4f", worst) + " (limit 0.10)";
    return o;
}

// Value iteration on B_max = 2 instances against stationary-policy enumeration.
Outcome value_iteration_oracle() {
    Outcome o;
    double worst = 0.0;
    int mismatched = 0, instances = 0;
    auto check = [&](const FiniteMdp& m, double gamma) {
        const auto vi = value_iteration(m, gamma, 1e-11);
        const auto best = oracle::best_policy_by_enumeration(m, gamma);
        ++instances;
        if (vi.policy != best.policy) ++mismatched;
        for (std::size_t s = 0; s < best.value.size(); ++s) worst = std::max(worst, std::abs(vi.value[s] - best.value[s]));
    };
    Rng rng(2024);
    for (int t = 0; t < 100; ++t) check(oracle::random_mdp(3, 4, rng), 0.3 + 0.65 * rng.uniform());
    for (double load : {0.2, 0.6, 1.0, 1.4}) {
        MdcaParams p;
        p.buffer_max = 2;
        p.traffic = TrafficSpec::unit_batches_per_interval(lambda_for_load(20, load, p.cfg), p.cfg);
        check(build_mdca_mdp(make_mdca_context(20, p)), 0.9);
    }
    o.pass = mismatched == 0 && worst <= 1e-8;
    o.detail = std::to_string(instances) + " instances, argmax mismatches " + std::to_string(mismatched) +
               ", max |V - V_enum| " + fmt("%.2e", worst);
    return o;
}

// Contraction of successive residuals and finite stopping on the default profile.
Outcome contraction() {
    Outcome o;
    int most = 0, violations = 0;
    for (double load : {0.1, 0.3, 0.5, 0.8, 1.0, 1.2})
        for (int m : {0, 3, 7}) {
            MdcaParams p;
            p.cfg.cfp_slots = m;
            p.traffic = TrafficSpec::unit_batches_per_interval(lambda_for_load(20, load, p.cfg), p.cfg);
            const auto pol = solve_mdca(make_mdca_context(20, p), 1e-6);
            const double threshold = 1e-6 * (1 - p.gamma) / (2 * p.gamma);
            for (std::size_t k = 1; k < pol.residuals.size(); ++k)
                if (pol.residuals[k] > p.gamma * pol.residuals[k - 1] + 1e-12) ++violations;
            if (!(pol.residuals.back() < threshold)) ++violations;
            most = std::max(most, pol.iterations);
        }
    o.pass = violations == 0;
    o.detail = "violations " + std::to_string(violations) + ", at most " + std::to_string(most) + " iterations";
    return o;
}

// Loop counter of the sorted-prefix search.
Outcome enumeration_identity() {
    Outcome o;
    MccaModel model(MccaParams{});
    Rng rng(8);
    std::string bad;
    for (int n = 8; n <= 20; ++n) {
        std::vector<int> q(static_cast<std::size_t>(n));
        for (auto& x : q) x = static_cast<int>(rng.below(6));
        ScheduleStats stats;
        approx_schedule(q, std::vector<double>(static_cast<std::size_t>(n), 0.5), model, &stats);
        if (stats.family_candidates != 36 * n - 120 || action_space_size(n, 7) != 36 * n - 120) {
            o.pass = false;
            bad += " N=" + std::to_string(n);
        }
    }
    o.detail = o.pass ? "N = 8..20 all equal 36N-120" : "mismatch at" + bad;
    return o;
}

// Sorted-prefix search against brute-force enumeration on small instances.
Outcome small_instance_schedule() {
    Outcome o;
    Rng rng(55);
    int instances = 0, wrong = 0, global_agree = 0;
    for (int t = 0; t < 400; ++t) {
        const int n = 1 + static_cast<int>(rng.below(4));
        const int bmax = 1 + static_cast<int>(rng.below(3));
        MccaParams p;
        p.cfg.cfp_slots = static_cast<int>(rng.below(static_cast<std::uint64_t>(n) + 1));
        p.buffer_max = bmax;
        MccaModel model(p);
        std::vector<int> q(static_cast<std::size_t>(n));
        std::vector<double> r(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            q[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(static_cast<std::uint64_t>(bmax) + 1));
            r[static_cast<std::size_t>(i)] = 0.05 + 2.5 * rng.uniform();
        }
        const auto s = approx_schedule(q, r, model);
        const auto best = oracle::best_schedule_by_enumeration(q, r, model);
        ++instances;
        if (s.actions != best.actions || std::abs(s.utility - best.utility) > 1e-9) ++wrong;
        const auto global = oracle::best_schedule_by_enumeration(q, r, model, true);
        if (std::abs(global.utility - s.utility) <= 1e-9) ++global_agree;
    }
    o.pass = wrong == 0;
    o.detail = std::to_string(instances) + " instances, disagreements " + std::to_string(wrong) +
               "; matches the unrestricted optimum in " + std::to_string(global_agree);
    return o;
}

// Hidden-node expansion against subset enumeration.
Outcome hidden_formula() {
    Outcome o;
    Rng rng(99);
    double worst = 0.0;
    for (int t = 0; t < 300; ++t) {
        const int size = 10;
        const int node = static_cast<int>(rng.below(size));
        const int k = static_cast<int>(rng.below(6));
        const auto topo = oracle::random_topology(size, node, k, rng);
        std::map<std::vector<int>, double> table;
        auto busy = [&](const std::vector<int>& s) {
            auto it = table.find(s);
            if (it == table.end()) it = table.emplace(s, rng.uniform()).first;
            return it->second;
        };
        const double fast = hidden_collision(node, topo, busy);
        worst = std::max(worst, std::abs(fast - oracle::brute_hidden(node, topo, busy)));
    }
    // Psi_1 = {3, 4}, written out term by term.
    HiddenTopology t = HiddenTopology::none(std::vector<double>(5, 0.0));
    t.h[1][3] = 0.35;
    t.h[1][4] = 0.55;
    t.hidden[1] = {3, 4};
    const std::map<std::vector<int>, double> pb{{{1, 3}, 0.2}, {{1, 4}, 0.3}, {{1, 3, 4}, 0.45}};
    const double terms = 0.35 * (1 - 0.55) * 0.2 + (1 - 0.35) * 0.55 * 0.3 + 0.35 * 0.55 * 0.45;
    const double worked = std::abs(hidden_collision(1, t, [&](const std::vector<int>& s) { return pb.at(s); }) - terms);
    o.pass = worst <= 1e-12 && worked <= 1e-12;
    o.detail = "max |fast - brute| " + fmt("%.1e", worst) + ", worked example error " + fmt("%.1e", worked);
    return o;
}

struct SchemeStats {
    double pdr = 0.0;
    double energy = 0.0;
};

SchemeStats replicate(const ExperimentPlan& plan, const PlanPoint& pt, Scheme s, PolicyCache& cache, int count) {
    const auto sc = make_scenario(plan, pt, s, 1, cache);
    const auto rep = run_replicated(sc, seeds(count));
    for (const auto& m : rep.metrics) note_run(m);
    return {rep.pdr.mean, rep.energy_per_packet_j.mean};
}

// MDCA against CSMA2 (PDR) and CSMA (energy) at high load.
Outcome mdca_ordering() {
    Outcome o;
    ExperimentPlan plan;
    plan.schemes = {Scheme::Mdca, Scheme::Csma2, Scheme::Csma};
    PolicyCache cache;
    std::ostringstream d;
    for (double g : {0.8, 0.9, 1.0, 1.1, 1.2}) {
        const auto pt = plan_point(plan, g);
        const auto mdca = replicate(plan, pt, Scheme::Mdca, cache, 20);
        const auto csma2 = replicate(plan, pt, Scheme::Csma2, cache, 20);
        const auto csma = replicate(plan, pt, Scheme::Csma, cache, 20);
        if (!(mdca.pdr >= csma2.pdr) || !(mdca.energy <= csma.energy)) o.pass = false;
        d << " G=" << g << ": PDR " << fmt("%.3f", mdca.pdr) << "/" << fmt("%.3f", csma2.pdr) << ", mJ "
          << fmt("%.3f", mdca.energy * 1e3) << "/" << fmt("%.3f", csma.energy * 1e3) << ";";
    }
    o.detail = "MDCA vs CSMA2 PDR, MDCA vs CSMA energy per packet:" + d.str();
    return o;
}

// MCCA against the longest-queue baseline on energy per delivered packet.
Outcome mcca_energy() {
    Outcome o;
    ExperimentPlan plan;
    plan.schemes = {Scheme::Mcca, Scheme::Lqf};
    PolicyCache cache;
    std::ostringstream d;
    double tightest = INFINITY;
    for (int k = 1; k <= 12; ++k) {
        const double g = k / 10.0;
        const auto pt = plan_point(plan, g);
        const auto mcca = replicate(plan, pt, Scheme::Mcca, cache, 20);
        const auto lqf = replicate(plan, pt, Scheme::Lqf, cache, 20);
        if (!(mcca.energy <= lqf.energy)) {
            o.pass = false;
            d << " fails at G=" << g << ";";
        }
        tightest = std::min(tightest, (lqf.energy - mcca.energy) / lqf.energy);
    }
    o.detail = "12 loads, smallest relative margin " + fmt("%.4f", tightest) + ";" + d.str();
    return o;
}

// M = 0 replay, identity adjustments at theta = 0 and H = 0, and conservation.
Outcome degeneracies() {
    Outcome o;
    int replay_mismatch = 0, identity_fail = 0;
    ExperimentPlan plan;
    plan.cfg.cfp_slots = 0;
    plan.horizon = 1000;
    PolicyCache cache;
    for (double g : {0.2, 0.6, 1.0, 1.2})
        for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
            const auto pt = plan_point(plan, g);
            const auto a = run(make_scenario(plan, pt, Scheme::Mdca, seed, cache));
            const auto b = run(make_scenario(plan, pt, Scheme::Csma2, seed, cache));
            note_run(a);
            note_run(b);
            if (!(a == b)) ++replay_mismatch;
        }

    for (double pc : {0.0, 0.3, 0.8})
        if (fading_adjusted_collision(pc, 0.0, 0.0) != pc) ++identity_fail;
    for (int n : {2, 5, 20}) {
        MacParams mac;
        const auto plain = solve_saturation(n, 384, 10, mac, 0.0);
        std::vector<ContenderSpec> spec(static_cast<std::size_t>(n), ContenderSpec{mac, 0.0});
        const auto topo = HiddenTopology::none(std::vector<double>(static_cast<std::size_t>(n), 0.0));
        const auto het = solve_heterogeneous(spec, 384, 10, &topo);
        for (const auto& s : het.nodes) {
            if (std::abs(s.p_c_eff - plain.p_c) > 1e-9 || std::abs(s.alpha - plain.alpha) > 1e-9 ||
                std::abs(s.kappa - plain.kappa) > 1e-9 || s.hidden != 0.0)
                ++identity_fail;
        }
        if (plain.p_c_eff != plain.p_c) ++identity_fail;
        if (hidden_collision(0, topo, [](const std::vector<int>&) { return 1.0; }) != 0.0) ++identity_fail;
        if (alpha_with_hidden(0, topo, [&](const std::vector<int>&) { return plain.alpha; }) != plain.alpha)
            ++identity_fail;
    }
    o.pass = replay_mismatch == 0 && identity_fail == 0 && g_unconserved == 0;
    o.detail = "M=0 replay mismatches " + std::to_string(replay_mismatch) + " of 20, identity failures " +
               std::to_string(identity_fail) + ", conservation failures " + std::to_string(g_unconserved) + " of " +
               std::to_string(g_runs) + " runs";
    return o;
}

// Arrival pmf normalization and a Monte Carlo check per bin.
Outcome traffic_pmf() {
    Outcome o;
    std::ostringstream d;
    const int samples = 1000000;
    const Ubp gamma = 388;
    int bad_bins = 0;
    double worst_norm = 0.0;
    for (const auto& batch : {std::vector<double>{1.0}, std::vector<double>{0.6, 0.4}}) {
        const TrafficSpec spec{1.5 / static_cast<double>(gamma), batch};
        const int x_max = 14;
        const auto pmf = arrival_pmf(spec, gamma, x_max);
        double total = pmf.tail;
        for (double p : pmf.probs) total += p;
        worst_norm = std::max(worst_norm, std::abs(total - 1.0));

        std::vector<double> counts(static_cast<std::size_t>(x_max) + 2, 0.0);
        Rng rng(batch.size() == 1 ? 101 : 202);
        for (int k = 0; k < samples; ++k) {
            int x = 0;
            for (const auto& e : sample_arrivals(spec, gamma, rng)) x += e.batch;
            counts[static_cast<std::size_t>(std::min(x, x_max + 1))] += 1.0;
        }
        double worst_z = 0.0;
        for (int x = 0; x <= x_max + 1; ++x) {
            const double p = x <= x_max ? pmf.at(x) : pmf.tail;
            const double sd = std::sqrt(samples * p * (1 - p));
            const double dev = std::abs(counts[static_cast<std::size_t>(x)] - samples * p);
            if (sd > 0) worst_z = std::max(worst_z, dev / sd);
            if (dev > 3 * sd) ++bad_bins;
        }
        d << (batch.size() == 1 ? " unit" : " {1,2}") << " worst z " << fmt("%.2f", worst_z) << ";";
    }
    o.pass = worst_norm <= 1e-9 && bad_bins == 0;
    o.detail = "normalization error " + fmt("%.1e", worst_norm) + ", bins beyond 3 sigma " + std::to_string(bad_bins) +
               ";" + d.str();
    return o;
}

}  // namespace

int main() {
    using Clock = std::chrono::steady_clock;
    struct Item {
        int id;
        const char* name;
        Outcome (*fn)();
    };
    const Item items[] = {
        {1, "analytic vs simulated saturation goodput", saturation_agreement},
        {2, "value iteration vs policy enumeration", value_iteration_oracle},
        {3, "value iteration contraction and stopping", contraction},
        {4, "sorted-prefix candidate count 36N-120", enumeration_identity},
        {5, "sorted-prefix search vs exhaustive enumeration", small_instance_schedule},
        {6, "hidden-node collision expansion", hidden_formula},
        {7, "MDCA ordering at G >= 0.8", mdca_ordering},
        {8, "MCCA energy vs longest-queue baseline", mcca_energy},
        {9, "degeneracies and conservation", degeneracies},
        {10, "arrival pmf normalization and Monte Carlo", traffic_pmf},
    };
    int failed = 0;
    for (const auto& it : items) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = it.fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        std::printf("%s criterion %d: %s [%s] (%.1f s)\n", o.pass ? "PASS" : "FAIL", it.id, it.name, o.detail.c_str(),
                    secs);
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
