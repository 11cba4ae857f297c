#include <cmath>
#include <memory>

#include "doctest.h"
#include "hybridmac/csma_analytics.hpp"
#include "hybridmac/simulator.hpp"

using namespace hybridmac;

namespace {

Scenario uniform(int nodes, double load, Scheme scheme, int cfp_slots = 7, int horizon = 200) {
    Scenario sc;
    sc.cfg.cfp_slots = cfp_slots;
    sc.mac.drop_enabled = false;
    sc.scheme = scheme;
    sc.horizon = horizon;
    sc.traffic.assign(static_cast<std::size_t>(nodes),
                      TrafficSpec::unit_batches_per_interval(lambda_for_load(nodes, load, sc.cfg), sc.cfg));
    if (scheme == Scheme::Csma || scheme == Scheme::Csma2) sc.cfg.cfp_slots = 0;
    if (scheme == Scheme::Mdca) {
        MdcaParams p;
        p.cfg = sc.cfg;
        p.mac = sc.mac;
        p.traffic = sc.traffic.front();
        p.buffer_max = sc.buffer_max;
        sc.policies = {std::make_shared<const MdpPolicy>(solve_mdca(make_mdca_context(nodes, p)))};
    }
    return sc;
}

constexpr Scheme kSchemes[] = {Scheme::Mdca, Scheme::Mcca, Scheme::Csma, Scheme::Csma2, Scheme::Lqf};

}  // namespace

TEST_CASE("single node under capacity loses nothing") {
    for (Scheme s : {Scheme::Csma2, Scheme::Csma, Scheme::Mdca}) {
        auto sc = uniform(1, 0.01, s, 7, 2000);
        auto m = run(sc);
        CHECK(m.collisions == 0);
        CHECK(m.dropped == 0);
        CHECK(m.discarded == 0);
        CHECK(m.delivered + m.in_buffer == m.generated);
        CHECK(m.generated > 500);
        CHECK(m.pdr >= 1.0 - static_cast<double>(m.in_buffer) / static_cast<double>(m.generated));
    }
    auto sc = uniform(1, 0.01, Scheme::Csma2, 0, 2000);
    auto m = run(sc);
    CHECK(m.pdr == 1.0);
    CHECK(m.pdr == static_cast<double>(m.delivered) / static_cast<double>(m.generated));
    // MCCA schedules from lagging estimates, so a rare overflow is possible
    auto mc = run(uniform(1, 0.01, Scheme::Mcca, 7, 2000));
    CHECK(mc.collisions == 0);
    CHECK(mc.pdr > 0.99);
}

TEST_CASE("same seed, same metrics; different seed, different run") {
    for (Scheme s : kSchemes) {
        auto sc = uniform(10, 0.8, s);
        auto a = run(sc);
        auto b = run(sc);
        CHECK(a == b);
        sc.seed = 2;
        CHECK_FALSE(run(sc) == a);
    }
}

TEST_CASE("property: packet conservation on random scenarios") {
    Rng rng(77);
    for (int t = 0; t < 40; ++t) {
        const Scheme s = kSchemes[rng.below(5)];
        const int n = 1 + static_cast<int>(rng.below(25));
        const int m = static_cast<int>(rng.below(9));
        auto sc = uniform(n, 0.1 + 1.4 * rng.uniform(), s, m, 30 + static_cast<int>(rng.below(100)));
        sc.seed = rng.next();
        sc.mac.drop_enabled = rng.below(2) == 1;
        if (rng.below(3) == 0) sc.outage.assign(static_cast<std::size_t>(n), 0.3 * rng.uniform());
        if (rng.below(4) == 0) sc.traffic.assign(static_cast<std::size_t>(n), TrafficSpec{sc.traffic[0].rate, {0.5, 0.3, 0.2}});
        sc.saturation = rng.below(6) == 0;
        auto metrics = run(sc);
        CHECK(metrics.conserved());
        std::int64_t gen = 0, del = 0;
        for (const auto& p : metrics.per_node) {
            CHECK(p.generated == p.delivered + p.discarded + p.dropped + p.in_buffer);
            gen += p.generated;
            del += p.delivered;
        }
        CHECK(gen == metrics.generated);
        CHECK(del == metrics.delivered);
        if (s == Scheme::Csma2) CHECK(metrics.dropped == 0);
    }
}

TEST_CASE("MDCA with M = 0 replays CSMA2") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        for (double load : {0.3, 1.0}) {
            auto mdca = uniform(20, load, Scheme::Mdca, 0);
            auto csma2 = uniform(20, load, Scheme::Csma2, 0);
            mdca.seed = csma2.seed = seed;
            for (Action a : mdca.policies.front()->action) CHECK(!uses_slot(a));
            CHECK(run(mdca) == run(csma2));
        }
    }
}

TEST_CASE("outage: none delivered at theta = 1, losses grow with theta") {
    auto sc = uniform(5, 0.5, Scheme::Csma2, 0, 100);
    sc.outage.assign(5, 1.0);
    auto m = run(sc);
    CHECK(m.delivered == 0);
    double last = 2.0;
    for (double th : {0.0, 0.2, 0.5}) {
        auto c = uniform(5, 0.5, Scheme::Csma, 0, 400);
        c.outage.assign(5, th);
        const double pdr = run(c).pdr;
        CHECK(pdr < last);
        last = pdr;
    }
}

TEST_CASE("two unequal nodes in saturation follow the analytic goodput") {
    Scenario sc = uniform(2, 1.0, Scheme::Csma2, 0, 5000);
    sc.saturation = true;
    sc.outage = {0.0, 0.2};
    auto m = run(sc);
    std::vector<ContenderSpec> spec{{sc.mac, 0.0}, {sc.mac, 0.2}};
    auto an = solve_heterogeneous(spec, sc.cfg.cap_len(), sc.cfg.tx_len);
    for (int n = 0; n < 2; ++n) {
        const double sim = static_cast<double>(m.per_node[static_cast<std::size_t>(n)].cap_delivered) / m.superframes;
        const double ref = an.nodes[static_cast<std::size_t>(n)].kappa_per_cap();
        CHECK(std::abs(sim - ref) / ref < 0.10);
    }
    CHECK(m.per_node[0].cap_delivered > m.per_node[1].cap_delivered);
}

TEST_CASE("trace: one row per node and superframe, energies add up, no a1 CAP traffic") {
    auto sc = uniform(8, 1.0, Scheme::Mdca, 7, 60);
    std::vector<TraceRow> trace;
    auto m = run(sc, &trace);
    REQUIRE(trace.size() == 8u * 60u);
    std::vector<double> e(8, 0.0);
    std::vector<int> cfp_users(60, 0);
    for (const auto& r : trace) {
        e[static_cast<std::size_t>(r.node)] += r.energy_j;
        if (r.action == Action::Defer) CHECK(r.cap_sent == 0);
        if (r.cfp_sent > 0) ++cfp_users[static_cast<std::size_t>(r.superframe)];
    }
    for (int k = 0; k < 60; ++k) CHECK(cfp_users[static_cast<std::size_t>(k)] <= 7);
    double nodes = 0.0;
    for (int n = 0; n < 8; ++n) {
        CHECK(e[static_cast<std::size_t>(n)] == doctest::Approx(m.per_node[static_cast<std::size_t>(n)].energy_j).epsilon(1e-9));
        nodes += e[static_cast<std::size_t>(n)];
    }
    CHECK(nodes == doctest::Approx(m.energy_nodes_j).epsilon(1e-9));
    CHECK(m.energy_total_j == doctest::Approx(m.energy_nodes_j + m.energy_coordinator_j));
    CHECK(format_trace_row(trace.front()).find('\t') != std::string::npos);
}

TEST_CASE("every device's energy lies between all-sleep and all-receive") {
    for (Scheme s : kSchemes) {
        auto sc = uniform(6, 0.7, s, 7, 50);
        auto m = run(sc);
        const double span = 50.0 * static_cast<double>(sc.cfg.interval()) * kUbpSeconds;
        for (const auto& p : m.per_node) {
            CHECK(p.energy_j >= span * sc.energy.sleep_w * (1 - 1e-12));
            CHECK(p.energy_j <= span * sc.energy.receive_w * (1 + 1e-12));
        }
        CHECK(m.energy_coordinator_j <= span * sc.energy.receive_w * (1 + 1e-12));
        CHECK(m.superframes == 50);
    }
}

TEST_CASE("MCCA with no traffic sleeps in every CAP") {
    auto sc = uniform(5, 0.0, Scheme::Mcca, 7, 40);
    std::vector<TraceRow> trace;
    auto m = run(sc, &trace);
    CHECK(m.generated == 0);
    for (const auto& r : trace) {
        CHECK(r.action == Action::Defer);
        CHECK(r.cap_sent + r.cfp_sent == 0);
    }
    CHECK(std::isnan(m.energy_per_packet_j));
    CHECK(std::isnan(m.delay_mean));
    // no CAP grants: the coordinator sends the beacon, sleeps through the CAP, idles in the CFP
    const double per_sf = 320e-6 * (4 * 31.32e-3 + 216 * 36e-6 + 168 * 766.8e-6);
    CHECK(m.energy_coordinator_j == doctest::Approx(40 * per_sf).epsilon(1e-9));
    auto lqf = run(uniform(5, 0.0, Scheme::Lqf, 7, 40));
    CHECK(lqf.energy_coordinator_j > m.energy_coordinator_j);
}

TEST_CASE("slot tenure is bounded: short tenure forces evictions") {
    auto sc = uniform(20, 1.2, Scheme::Mdca, 7, 300);
    sc.cfg.max_tenure = 2;
    auto m = run(sc);
    std::int64_t grants = 0, evictions = 0;
    for (const auto& p : m.per_node) {
        grants += p.grants;
        evictions += p.evictions;
    }
    CHECK(grants > 0);
    CHECK(evictions > 0);
    CHECK(evictions <= grants);
}

TEST_CASE("longest-queue slot holders") {
    CHECK(lqf_slot_holders({3, 1, 4, 1, 5}, 2) == std::vector<int>{4, 2});
    CHECK(lqf_slot_holders({2, 2, 2}, 2) == std::vector<int>{0, 1});
    CHECK(lqf_slot_holders({0, 0, 0}, 3).empty());
    CHECK(lqf_slot_holders({0, 4, 0}, 3) == std::vector<int>{1});
}

TEST_CASE("replicated runs") {
    auto sc = uniform(20, 0.5, Scheme::Mdca, 7, 100);
    auto one = run_replicated(sc, {5});
    sc.seed = 5;
    auto direct = run(sc);
    CHECK(one.pdr.mean == direct.pdr);
    CHECK(one.pdr.min == direct.pdr);
    CHECK(one.metrics.front() == direct);

    auto fwd = run_replicated(sc, {1, 2, 3, 4, 5, 6}, 3);
    auto rev = run_replicated(sc, {6, 5, 4, 3, 2, 1});
    CHECK(fwd.pdr.mean == rev.pdr.mean);
    CHECK(fwd.energy_per_packet_j.mean == rev.energy_per_packet_j.mean);
    for (const auto* s : {&fwd.pdr, &fwd.delay_ubp, &fwd.energy_per_packet_j, &fwd.energy_total_j}) {
        CHECK(s->min <= s->mean);
        CHECK(s->mean <= s->max);
    }
    CHECK_THROWS_AS(run_replicated(sc, {}), ConfigError);
}

TEST_CASE("scenario validation") {
    auto sc = uniform(3, 0.5, Scheme::Mdca);
    sc.policies.clear();
    CHECK_THROWS_AS(run(sc), ConfigError);
    sc = uniform(3, 0.5, Scheme::Csma2);
    sc.outage = {0.1};
    CHECK_THROWS_AS(run(sc), ConfigError);
    sc.outage = {};
    sc.horizon = 0;
    CHECK_THROWS_AS(run(sc), ConfigError);
    CHECK(parse_scheme("LQF") == Scheme::Lqf);
    CHECK(scheme_name(Scheme::Csma2) == "CSMA2");
    CHECK_THROWS_AS(parse_scheme("ALOHA"), ConfigError);
}
