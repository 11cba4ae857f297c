#include <cstdio>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "hybridmac/experiment.hpp"

using namespace hybridmac;

namespace {

std::string line_error(const std::string& text) {
    try {
        parse_plan(text);
    } catch (const PlanError& e) {
        return std::to_string(e.line()) + "|" + e.what();
    } catch (const ConfigError& e) {
        return std::string("0|") + e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("minimal config takes the default profile") {
    auto p = parse_plan("[scheme]\nschemes = CSMA\n[network]\nnodes = 20\nhorizon = 100\n[sweep]\nseed = 1\n");
    CHECK(p.schemes == std::vector<Scheme>{Scheme::Csma});
    CHECK(p.nodes == 20);
    CHECK(p.horizon == 100);
    CHECK(p.seeds == std::vector<std::uint64_t>{1});
    CHECK(p.cfg == SuperframeConfig{});
    CHECK(p.cfg.slots == 16);
    CHECK(p.cfg.cfp_slots == 7);
    CHECK(p.cfg.packets_per_slot == 2);
    CHECK(p.cfg.max_tenure == 18);
    CHECK(p.cfg.tx_len == 10);
    CHECK(p.cfg.beacon_len == 4);
    CHECK(p.buffer_max == 5);
    CHECK(p.gamma == 0.9);
    CHECK(p.energy == EnergyModel{});
    CHECK_FALSE(p.mac.drop_enabled);
}

TEST_CASE("config errors carry a line or name the field") {
    CHECK(line_error("[network]\nslots = 16\ncfp_slots = 17\n").find("M=17") != std::string::npos);
    CHECK(line_error("[network]\nslots = 16\ncfp_slots = 17\n").find("K=16") != std::string::npos);
    CHECK(line_error("[network]\n\n# note\nbogus = 3\n").rfind("4|", 0) == 0);
    CHECK(line_error("[network]\nnodes = 3\nnodes = 4\n").rfind("3|", 0) == 0);
    CHECK(line_error("[nowhere]\n").rfind("1|", 0) == 0);
    CHECK(line_error("nodes = 3\n").rfind("1|", 0) == 0);
    CHECK(line_error("[network]\nnodes = three\n").find("network.nodes") != std::string::npos);
    CHECK(line_error("[network]\nnodes 3\n").rfind("2|", 0) == 0);
    CHECK(line_error("[scheme]\nschemes = MDCA, ALOHA\n").rfind("2|", 0) == 0);
    CHECK(line_error("[sweep]\naxis = heterogeneous\nvalues = 20\n").find("multiple of 3") != std::string::npos);
    CHECK(line_error("[sweep]\nseeds = 1, 2\nseed = 3\n") != "");
    CHECK(line_error("[network]\ntheta = 1.5\n").find("theta") != std::string::npos);
    CHECK(line_error("[network]\nnodes = 4 # trailing comment\n") == "");
}

TEST_CASE("serialize then parse gives the same plan") {
    ExperimentPlan p;
    p.nodes = 12;
    p.cfg.cfp_slots = 3;
    p.theta = 0.15;
    p.mac.cw_schedule = {4, 8, 16};
    p.mac.max_backoffs = 2;
    p.offered_traffic = 0.7;
    p.batch_pmf = {0.25, 0.75};
    p.schemes = {Scheme::Mcca, Scheme::Lqf, Scheme::Csma};
    p.gamma = 0.95;
    p.energy.idle_w = 1e-3;
    p.axis = SweepAxis::Theta;
    p.values = {0.0, 0.1, 1.0 / 3.0};
    p.seeds = {4, 9, 11};
    p.threads = 2;
    p.csv = "out.csv";
    p.policy_cache = "cache.txt";
    auto text = serialize_plan(p);
    auto back = parse_plan(text);
    CHECK(back == p);
    CHECK(serialize_plan(back) == text);
    CHECK(parse_plan(serialize_plan(ExperimentPlan{})) == ExperimentPlan{});
}

TEST_CASE("seed shorthand expands to consecutive seeds") {
    auto p = parse_plan("[sweep]\nseed = 7\nreplications = 3\n");
    CHECK(p.seeds == std::vector<std::uint64_t>{7, 8, 9});
}

TEST_CASE("axis semantics") {
    ExperimentPlan p;
    p.axis = SweepAxis::Nodes;
    auto pt = plan_point(p, 10);
    REQUIRE(pt.scenario.nodes() == 10);
    // lambda = (T_sf + T_beacon) / (T_tx N) packets per interval
    CHECK(pt.scenario.traffic[0].packet_rate() * 388 == doctest::Approx(388.0 / 100.0));

    p.axis = SweepAxis::Slots;
    CHECK(plan_point(p, 3).scenario.cfg.cfp_slots == 3);

    p.axis = SweepAxis::Theta;
    auto th = plan_point(p, 0.2);
    CHECK(th.scenario.outage_of(5) == 0.2);
    CHECK(mdca_params_for(p, th, 5).theta == 0.2);

    p.axis = SweepAxis::OfferedTraffic;
    auto g = plan_point(p, 0.9);
    CHECK(offered_traffic(20, g.scenario.traffic[0].packet_rate() * 388, g.scenario.cfg) == doctest::Approx(0.9));

    p.axis = SweepAxis::Heterogeneous;
    auto h = plan_point(p, 21);
    REQUIRE(h.scenario.nodes() == 21);
    CHECK(h.group[0] == 0);
    CHECK(h.group[7] == 1);
    CHECK(h.group[20] == 2);
    CHECK(h.scenario.traffic[20].packet_rate() * 388 == doctest::Approx(0.55 * 388 / (7 * 10.0)));

    p.batch_pmf = {0.5, 0.5};
    p.axis = SweepAxis::OfferedTraffic;
    auto b = plan_point(p, 1.0);
    CHECK(offered_traffic(20, b.scenario.traffic[0].packet_rate() * 388, b.scenario.cfg) == doctest::Approx(1.0));
}

TEST_CASE("one value, one scheme, one seed: one row") {
    auto p = parse_plan("[network]\nnodes = 6\nhorizon = 30\n[scheme]\nschemes = CSMA2\n");
    PolicyCache cache;
    auto rows = execute(p, cache);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].group == "all");
    CHECK(rows[0].replications == 1);
    CHECK(rows[0].pdr.min == rows[0].pdr.mean);
    CHECK(rows[0].delay_ms.mean == doctest::Approx(rows[0].delay_ubp.mean * 0.32));
    auto csv = format_csv(rows);
    CHECK(csv.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
}

TEST_CASE("heterogeneous plan adds per-group rows") {
    auto p = parse_plan(
        "[network]\nhorizon = 40\n[scheme]\nschemes = MDCA, MCCA\n[sweep]\naxis = heterogeneous\nvalues = 9, 12\n"
        "seed = 1\nreplications = 2\n");
    PolicyCache cache;
    auto rows = execute(p, cache);
    REQUIRE(rows.size() == 2 * 2 * 4);
    CHECK(rows[0].group == "all");
    CHECK(rows[1].group == "low");
    CHECK(rows[2].group == "medium");
    CHECK(rows[3].group == "high");
    CHECK(rows[4].scheme == "MCCA");
    CHECK(rows[8].value == 12);
    for (const auto& r : rows) {
        CHECK(r.pdr.min <= r.pdr.mean);
        CHECK(r.pdr.mean <= r.pdr.max);
        CHECK(r.energy_per_packet_j.min <= r.energy_per_packet_j.max);
    }
    // three traffic classes per node count
    CHECK(cache.size() == 6);
}

TEST_CASE("policy cache: one policy per node count, no re-solve on rerun, file round-trip") {
    auto p = parse_plan("[network]\nhorizon = 20\n[scheme]\nschemes = MDCA\n[sweep]\naxis = N\nvalues = 10, 15, 20\n");
    PolicyCache cache;
    CHECK(solve_and_cache_policies(p, cache) == 3);
    CHECK(cache.solver_invocations() == 3);
    CHECK(solve_and_cache_policies(p, cache) == 3);
    CHECK(cache.solver_invocations() == 3);
    execute(p, cache);
    CHECK(cache.solver_invocations() == 3);

    const auto path = (std::filesystem::temp_directory_path() / "hybridmac_policy_cache_test.txt").string();
    cache.save(path);
    PolicyCache reloaded;
    reloaded.load(path);
    std::remove(path.c_str());
    CHECK(reloaded.size() == 3);
    CHECK(reloaded.to_text() == cache.to_text());
    CHECK(solve_and_cache_policies(p, reloaded) == 3);
    CHECK(reloaded.solver_invocations() == 0);
    for (double n : {10.0, 15.0, 20.0}) {
        auto pt = plan_point(p, n);
        const auto key = PolicyCache::key(static_cast<int>(n), mdca_params_for(p, pt, 0));
        auto a = cache.find(key), b = reloaded.find(key);
        REQUIRE(a);
        REQUIRE(b);
        for (int s = 0; s <= 5; ++s) CHECK(a->at(s) == b->at(s));
    }

    PolicyCache missing;
    CHECK_NOTHROW(missing.load("/nonexistent/cache.txt"));
    CHECK_THROWS_AS(missing.from_text("key\t0\ta9\t1.0\n"), PlanError);
}

TEST_CASE("plans without MDCA need no policies") {
    auto p = parse_plan("[scheme]\nschemes = CSMA, LQF\n");
    PolicyCache cache;
    CHECK(solve_and_cache_policies(p, cache) == 0);
    CHECK(cache.size() == 0);
}

TEST_CASE("reruns produce byte-identical CSV, also across thread counts") {
    const std::string text =
        "[network]\nnodes = 10\nhorizon = 40\n[scheme]\nschemes = MDCA, CSMA2, LQF\n[sweep]\n"
        "values = 0.4, 1.1\nseed = 3\nreplications = 3\n";
    auto p = parse_plan(text);
    PolicyCache c1, c2;
    auto a = format_csv(execute(p, c1));
    p.threads = 3;
    auto b = format_csv(execute(p, c2));
    CHECK(a == b);
    std::istringstream in(a);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 1 + 2 * 3);
}

TEST_CASE("run errors name the axis value, scheme and seed") {
    ExperimentPlan p;
    p.horizon = 5;
    p.schemes = {Scheme::Csma2};
    p.cfg.slot_len = 5;  // a CFP slot shorter than one transmission
    p.cfg.cfp_slots = 7;
    p.schemes = {Scheme::Mcca};
    PolicyCache cache;
    try {
        execute(p, cache);
        FAIL("expected an error");
    } catch (const std::exception& e) {
        const std::string what = e.what();
        CHECK(what.find("offered_traffic=0.5") != std::string::npos);
        CHECK(what.find("MCCA") != std::string::npos);
        CHECK(what.find("seed 1") != std::string::npos);
    }
}
