#include "doctest.h"
#include "fixtures.hpp"
#include "pcss/analysis.hpp"

using namespace pcss;

TEST_CASE("hand-derived schedules reproduce tick-exactly") {
    for (const auto& f : fixtures::all()) {
        INFO("fixture ", f.name);
        REQUIRE(f.ts.validate().empty());
        Trace tr = run(f.ts, f.cfg);
        auto rows = fixtures::trace_rows(tr);
        size_t n = std::min(rows.size(), f.expected.size());
        for (size_t i = 0; i < n; ++i) {
            INFO("row ", i);
            CHECK(rows[i] == f.expected[i]);
        }
        CHECK(rows.size() == f.expected.size());
    }
}

TEST_CASE("the fixture schedules satisfy every trace checker") {
    for (const auto& f : fixtures::all()) {
        INFO("fixture ", f.name);
        Trace tr = run(f.ts, f.cfg);
        for (const auto& [name, res] : run_all_checks(f.ts, tr)) {
            INFO("checker ", name);
            CHECK(res.violations.empty());
        }
    }
}

TEST_CASE("with nothing shared or stolen the engine is plain CBS") {
    // The exhaustion-wait set never finishes early and has no donors, so the
    // full policy, the CBS policy, and the per-tick reference scheduler must
    // agree on it record for record.
    fixtures::Fixture const f = fixtures::exhaustion_wait();
    SimConfig cbs_cfg = f.cfg;
    cbs_cfg.policy = Policy::Cbs;
    cbs_cfg.steal = StealMode::Off;

    Trace engine_cbs = run(f.ts, cbs_cfg);
    Trace oracle = oracle_cbs_uniproc(f.ts, cbs_cfg);
    CHECK(trace_to_csv(engine_cbs) == trace_to_csv(oracle));

    Trace full = run(f.ts, f.cfg);
    CHECK(fixtures::trace_rows(full) == fixtures::trace_rows(engine_cbs));
}

TEST_CASE("the quiet-donor seed really keeps the donors quiet") {
    fixtures::Fixture const f = fixtures::steal_chain();
    for (int id : {1, 2})
        CHECK(arrivals(*f.ts.find(id), f.cfg.horizon, f.cfg.seed).empty());
}
