#include "doctest.h"
#include "pcss/server_pcss.hpp"

#include <vector>

using namespace pcss;

namespace {

ServerState server(int id, Tick q, Tick t, Tick d, Tick c) {
    ServerState s;
    s.id = id;
    s.budget = q;
    s.period = t;
    s.deadline = d;
    s.capacity = c;
    s.replenish_at = d;
    return s;
}

} // namespace

TEST_CASE("arrival at an idle server assigns a fresh pair when safe") {
    SUBCASE("deadline already in the past") {
        ServerState s = server(0, 2, 10, 8, 0);
        CHECK(on_job_arrival(s, 9, false));
        CHECK(s.deadline == 19);
        CHECK(s.capacity == 2);
        CHECK(s.replenish_at == 19);
        CHECK(s.active);
    }
    SUBCASE("current pair too rich to keep") {
        // c*T = 20 >= (d-t)*Q = 12: reusing (15, 2) would overcommit.
        ServerState s = server(0, 2, 10, 15, 2);
        CHECK(on_job_arrival(s, 9, false));
        CHECK(s.deadline == 19);
        CHECK(s.capacity == 2);
    }
    SUBCASE("current pair still lean enough") {
        // c*T = 10 < 12: the old pair serves the new job.
        ServerState s = server(0, 2, 10, 15, 1);
        CHECK(!on_job_arrival(s, 9, false));
        CHECK(s.deadline == 15);
        CHECK(s.capacity == 1);
        CHECK(s.active);
    }
}

TEST_CASE("arrival behind pending work changes nothing but activity") {
    ServerState s = server(0, 2, 10, 15, 1);
    CHECK(!on_job_arrival(s, 9, true));
    CHECK(s.deadline == 15);
    CHECK(s.capacity == 1);
    CHECK(s.active);
}

TEST_CASE("leftover capacity becomes residual inside the window") {
    RuleSet full = RuleSet::full();

    ServerState s = server(0, 5, 20, 20, 3);
    CHECK(release_leftover(s, 10, full) == 3);
    CHECK(s.residual == 3);
    CHECK(s.capacity == 0);

    SUBCASE("nothing left, nothing released") {
        ServerState e = server(0, 5, 20, 20, 0);
        CHECK(release_leftover(e, 10, full) == 0);
        CHECK(e.residual == 0);
    }
    SUBCASE("past the deadline the leftover is discarded") {
        ServerState l = server(0, 5, 20, 20, 3);
        CHECK(release_leftover(l, 20, full) == 0);
        CHECK(l.residual == 0);
        CHECK(l.capacity == 0);
    }
    SUBCASE("plain reservations keep their capacity") {
        ServerState c = server(0, 5, 20, 20, 3);
        CHECK(release_leftover(c, 10, RuleSet::cbs()) == 0);
        CHECK(c.capacity == 3);
        CHECK(c.residual == 0);
    }
}

TEST_CASE("source selection prefers residuals, then own, then stolen") {
    RuleSet full = RuleSet::full();
    std::vector<ServerState> sv;
    sv.push_back(server(0, 4, 20, 20, 2));     // the consumer
    sv.push_back(server(1, 5, 25, 25, 0));     // residual donor
    sv[1].residual = 1;
    sv.push_back(server(2, 4, 30, 15, 4));     // steal donor
    sv[2].isolated = false;
    sv[2].active = false;

    SUBCASE("residual wins over live own capacity") {
        auto src = select_capacity_source(0, 10, sv, full);
        REQUIRE(src.has_value());
        CHECK(src->kind == SourceKind::Residual);
        CHECK(src->server == 1);
        CHECK(src->effective_deadline == 25);   // runs at the donor's deadline
    }
    SUBCASE("own capacity next") {
        sv[1].residual = 0;
        auto src = select_capacity_source(0, 10, sv, full);
        REQUIRE(src.has_value());
        CHECK(src->kind == SourceKind::Own);
        CHECK(src->server == 0);
        CHECK(src->effective_deadline == 20);
    }
    SUBCASE("stolen capacity last, at the consumer's own deadline") {
        sv[1].residual = 0;
        sv[0].capacity = 0;
        auto src = select_capacity_source(0, 10, sv, full);
        REQUIRE(src.has_value());
        CHECK(src->kind == SourceKind::Stolen);
        CHECK(src->server == 2);
        CHECK(src->effective_deadline == 20);
    }
    SUBCASE("nothing eligible") {
        sv[1].residual = 0;
        sv[0].capacity = 0;
        sv[2].capacity = 0;
        CHECK(!select_capacity_source(0, 10, sv, full).has_value());
    }
}

TEST_CASE("residual eligibility window and deadline direction") {
    RuleSet full = RuleSet::full();
    std::vector<ServerState> sv;
    sv.push_back(server(0, 4, 20, 20, 0));
    sv.push_back(server(1, 5, 25, 25, 0));
    sv[1].residual = 2;

    SUBCASE("donor deadline before the consumer's disqualifies") {
        sv[1].deadline = 19;
        CHECK(!select_capacity_source(0, 10, sv, full).has_value());
    }
    SUBCASE("equal deadlines qualify") {
        sv[1].deadline = 20;
        auto src = select_capacity_source(0, 10, sv, full);
        REQUIRE(src.has_value());
        CHECK(src->kind == SourceKind::Residual);
    }
    SUBCASE("expires exactly at the donor deadline") {
        CHECK(select_capacity_source(0, 24, sv, full).has_value());
        CHECK(!select_capacity_source(0, 25, sv, full).has_value());
    }
    SUBCASE("a running reclaimer blocks a second consumer") {
        sv[1].residual_user = {UnitRef::JobUnit, 3};
        CHECK(!select_capacity_source(0, 10, sv, full).has_value());
    }
    SUBCASE("reclaiming disabled skips residuals entirely") {
        RuleSet no_reclaim{true, false, true};
        CHECK(!select_capacity_source(0, 10, sv, no_reclaim).has_value());
    }
}

TEST_CASE("steal eligibility requires inactive, non-isolated, no-later deadline") {
    RuleSet full = RuleSet::full();
    std::vector<ServerState> sv;
    sv.push_back(server(0, 4, 20, 20, 0));
    sv.push_back(server(1, 4, 30, 15, 4));
    sv[1].isolated = false;
    sv[1].active = false;

    CHECK(select_capacity_source(0, 10, sv, full).has_value());

    SUBCASE("isolated donors are untouchable") {
        sv[1].isolated = true;
        CHECK(!select_capacity_source(0, 10, sv, full).has_value());
    }
    SUBCASE("active donors are serving their own work") {
        sv[1].active = true;
        CHECK(!select_capacity_source(0, 10, sv, full).has_value());
    }
    SUBCASE("donor deadline after the consumer's disqualifies") {
        sv[1].deadline = 21;
        CHECK(!select_capacity_source(0, 10, sv, full).has_value());
        sv[1].deadline = 20;
        CHECK(select_capacity_source(0, 10, sv, full).has_value());
    }
    SUBCASE("a charged donor token blocks a second thief") {
        sv[1].capacity_user = {UnitRef::PJobUnit, 0};
        CHECK(!select_capacity_source(0, 10, sv, full).has_value());
    }
    SUBCASE("stealing disabled") {
        RuleSet no_steal{true, true, false};
        CHECK(!select_capacity_source(0, 10, sv, no_steal).has_value());
    }
}

TEST_CASE("equal-deadline donors break ties by lower id") {
    RuleSet full = RuleSet::full();
    std::vector<ServerState> sv;
    sv.push_back(server(3, 4, 20, 20, 0));
    sv.push_back(server(2, 5, 25, 25, 0));
    sv.push_back(server(1, 5, 25, 25, 0));
    sv[1].residual = 2;
    sv[2].residual = 2;

    auto src = select_capacity_source(0, 10, sv, full);
    REQUIRE(src.has_value());
    CHECK(sv[src->server].id == 1);

    SUBCASE("earlier deadline beats lower id") {
        sv[1].deadline = 24;
        src = select_capacity_source(0, 10, sv, full);
        REQUIRE(src.has_value());
        CHECK(sv[src->server].id == 2);
    }
}

TEST_CASE("charges decrement the matching pool and reject overdraws") {
    ServerState s = server(0, 5, 20, 20, 5);
    s.residual = 0;
    CHECK(charge(s, SourceKind::Own, 2) == 3);
    CHECK(s.capacity == 3);
    CHECK(charge(s, SourceKind::Stolen, 3) == 0);   // same pool as own
    CHECK_THROWS_AS(charge(s, SourceKind::Own, 1), SpecError);

    ServerState r = server(1, 5, 20, 20, 0);
    r.residual = 3;
    CHECK(charge(r, SourceKind::Residual, 3) == 0);
    CHECK(r.residual == 0);
    CHECK_THROWS_AS(charge(r, SourceKind::Residual, 1), SpecError);
    CHECK_THROWS_AS(charge(r, SourceKind::Own, -1), SpecError);
}

TEST_CASE("replenishment recharges to Q and slides the window") {
    ServerState s = server(0, 2, 10, 20, 0);
    s.residual = 1;               // stale leftover from the closing window
    replenish(s);
    CHECK(s.capacity == 2);
    CHECK(s.deadline == 30);
    CHECK(s.replenish_at == 30);
    CHECK(s.residual == 0);

    SUBCASE("unconsumed capacity is not carried over") {
        ServerState t = server(0, 2, 10, 30, 2);
        replenish(t);
        CHECK(t.capacity == 2);   // Q, not Q + leftover
        CHECK(t.deadline == 40);
    }
}
