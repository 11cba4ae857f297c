#include "doctest.h"
#include "hybridmac/core.hpp"

using namespace hybridmac;

TEST_CASE("superframe layout for the default geometry") {
    SuperframeConfig cfg;
    auto l = superframe_layout(cfg);
    CHECK(l.sf_len == 384);
    CHECK(l.cap_len == 216);
    CHECK(l.cfp_len == 168);
    CHECK(cfg.interval() == 388);
    REQUIRE(l.cfp_slots.size() == 7);
    CHECK(l.cfp_slots.front() == UbpSpan{216, 240});
}

TEST_CASE("layout extremes: pure CSMA and pure TDMA") {
    SuperframeConfig cfg;
    cfg.cfp_slots = 0;
    auto l = superframe_layout(cfg);
    CHECK(l.cap_len == 384);
    CHECK(l.cfp_len == 0);
    CHECK(l.cfp_slots.empty());
    cfg.cfp_slots = 16;
    CHECK(superframe_layout(cfg).cap_len == 0);
}

TEST_CASE("layout rejects M > K") {
    SuperframeConfig cfg;
    cfg.cfp_slots = 17;
    CHECK_THROWS_AS(superframe_layout(cfg), ConfigError);
    cfg.cfp_slots = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("CFP slots tile [T_cap, T_sf) for every M") {
    for (int k = 1; k <= 20; ++k) {
        for (int m = 0; m <= k; ++m) {
            SuperframeConfig cfg;
            cfg.slots = k;
            cfg.cfp_slots = m;
            cfg.slot_len = 3 + k % 5;
            auto l = superframe_layout(cfg);
            Ubp cursor = l.cap_len;
            for (const auto& s : l.cfp_slots) {
                CHECK(s.begin == cursor);
                CHECK(s.length() == cfg.slot_len);
                cursor = s.end;
            }
            CHECK(cursor == l.sf_len);
            CHECK(l.cap_len + l.cfp_len == l.sf_len);
        }
    }
}

TEST_CASE("offered traffic inversion and linearity") {
    SuperframeConfig cfg;
    CHECK(lambda_for_load(20, 1.0, cfg) == doctest::Approx(1.94).epsilon(1e-12));
    CHECK(offered_traffic(20, 1.94, cfg) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(offered_traffic(20, 0.0, cfg) == 0.0);
    CHECK(offered_traffic(20, 0.97, cfg) == doctest::Approx(0.5).epsilon(1e-12));
    for (int n = 1; n < 30; n += 7)
        for (double lam : {0.1, 0.7, 2.5}) {
            CHECK(offered_traffic(2 * n, lam, cfg) == doctest::Approx(2 * offered_traffic(n, lam, cfg)));
            CHECK(offered_traffic(n, 3 * lam, cfg) == doctest::Approx(3 * offered_traffic(n, lam, cfg)));
        }
}

TEST_CASE("MAC parameter validation and contention windows") {
    MacParams mac;
    CHECK_NOTHROW(mac.validate());
    CHECK(mac.cw(0) == 8);
    CHECK(mac.cw(4) == 32);
    CHECK(mac.cw(9) == 32);
    CHECK(cw_from_exponents(3, 5, 4) == std::vector<int>{8, 16, 32, 32, 32});
    mac.cw_schedule = {};
    CHECK_THROWS_AS(mac.validate(), ConfigError);
    mac.cw_schedule = {1, 8};
    CHECK_THROWS_AS(mac.validate(), ConfigError);
    mac.cw_schedule = {8};
    mac.max_retries = -1;
    CHECK_THROWS_AS(mac.validate(), ConfigError);
}

TEST_CASE("actions are totally ordered and round-trip through names") {
    CHECK(Action::Defer < Action::Cap);
    CHECK(Action::Cap < Action::Cfp);
    CHECK(Action::Cfp < Action::CapCfp);
    for (int i = 0; i < 4; ++i) {
        Action a = action_from_index(i);
        CHECK(action_index(a) == i);
        CHECK(parse_action(action_name(a)) == a);
    }
    CHECK(uses_slot(Action::Cfp));
    CHECK(uses_slot(Action::CapCfp));
    CHECK_FALSE(uses_slot(Action::Cap));
    CHECK(uses_cap(Action::CapCfp));
    CHECK_FALSE(uses_cap(Action::Defer));
    CHECK_FALSE(parse_action("a5").has_value());
}

TEST_CASE("node state invariants") {
    NodeState s{3, 2, true, 5};
    CHECK_NOTHROW(s.validate(5, 18));
    s.buffer = 6;
    CHECK_THROWS_AS(s.validate(5, 18), ConfigError);
    s = {0, 1, false, 1};
    CHECK_THROWS_AS(s.validate(5, 18), ConfigError);
    s = {0, 1, true, 19};
    CHECK_THROWS_AS(s.validate(5, 18), ConfigError);
}
