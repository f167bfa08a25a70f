// Acceptance gate: seven high-level claims about the scheduler, each printed
// as one pass/fail line. Exits nonzero when any claim does not hold.

#include "fixtures.hpp"
#include "pcss/analysis.hpp"

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

using namespace pcss;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int idx, const std::string& text, bool ok) {
    std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", idx,
                text.c_str());
    std::fflush(stdout);
    if (!ok)
        failures++;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Tick max_period(const TaskSet& ts) {
    Tick m = 0;
    for (const auto& t : ts.tasks)
        m = std::max(m, t.period);
    return m;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

// --- criterion 1: isolation across a broad seeded sweep ---------------------
void criterion1() {
    auto t0 = Clock::now();
    const int kRuns = 500;
    const int cores[] = {1, 2, 4, 8};
    long violations = 0;
    for (int i = 0; i < kRuns; ++i) {
        GenParams p;
        p.n_tasks = 3 + i % 5;
        p.total_u = {1 + i % 6, 8};   // 1/8 .. 6/8
        p.period = {20, 100};
        p.non_isolated_pct = 25 + 25 * (i % 3);
        p.seed = i;
        TaskSet ts = generate(p);
        SimConfig cfg{cores[i % 4], 100 * max_period(ts), p.seed, Policy::Pcss,
                      i % 2 ? StealMode::DeadlineCompare
                            : StealMode::QueueEmptyOnly};
        Trace tr = run(ts, cfg);
        violations += (long)check_isolation(ts, tr).violations.size();
    }
    double dt = seconds_since(t0);
    report(1,
           "isolation holds over " + std::to_string(kRuns) +
               " seeded runs on 1/2/4/8 cores, " + std::to_string(violations) +
               " violations, " + fmt(dt) + "s",
           violations == 0 && dt < 60.0);
}

// --- criterion 2: byte parity with the per-tick reference -------------------
void criterion2() {
    int mismatches = 0;
    for (int i = 0; i < 100; ++i) {
        GenParams p;
        p.n_tasks = 3 + i % 4;
        p.total_u = i % 2 ? Rational{7, 8} : Rational{3, 4};
        p.parallelism = {0, 0};
        p.non_isolated_pct = 0;
        p.full_budget = true;
        p.seed = i;
        TaskSet ts = generate(p);
        SimConfig cfg{1, 20 * max_period(ts), p.seed, Policy::Cbs,
                      StealMode::Off};
        if (trace_to_csv(run(ts, cfg)) != trace_to_csv(oracle_cbs_uniproc(ts, cfg)))
            mismatches++;
    }
    report(2,
           "100 uniprocessor budget-server runs byte-identical to the "
           "per-tick reference, " +
               std::to_string(mismatches) + " mismatches",
           mismatches == 0);
}

// --- criterion 3: queue and deque discipline on generated traces ------------
void criterion3() {
    long violations = 0;
    int runs = 0;
    for (int seed = 0; seed < 10; ++seed)
        for (int m : {2, 4})
            for (StealMode st :
                 {StealMode::DeadlineCompare, StealMode::QueueEmptyOnly}) {
                GenParams p;
                p.n_tasks = 5;
                p.total_u = {5, 4};
                p.period = {20, 100};
                p.non_isolated_pct = 50;
                p.seed = seed;
                TaskSet ts = generate(p);
                SimConfig cfg{m, 20 * max_period(ts), (std::uint64_t)seed,
                              Policy::Pcss, st};
                Trace tr = run(ts, cfg);
                violations += (long)check_edf_and_deques(ts, tr).violations.size();
                runs++;
            }
    report(3,
           "deadline ordering and deque discipline replayed on " +
               std::to_string(runs) + " generated traces, " +
               std::to_string(violations) + " violations",
           violations == 0);
}

// --- criterion 4: hand-derived schedules ------------------------------------
void criterion4() {
    int bad = 0;
    std::string first;
    for (const auto& f : fixtures::all()) {
        if (fixtures::trace_rows(run(f.ts, f.cfg)) != f.expected) {
            bad++;
            if (first.empty())
                first = f.name;
        }
    }
    report(4,
           "five hand-derived schedules reproduced tick-exactly" +
               (bad ? ", first mismatch: " + first : std::string()),
           bad == 0);
}

// --- criterion 5: stealing helps and never hurts ----------------------------
void criterion5() {
    // One parallel job whose three branches can ride two idle donors: with
    // stealing the branches run side by side and the job finishes at 5; with
    // the deques pinned it serializes and finishes at 13.
    TaskSet crafted;
    {
        TaskSpec target = fixtures::task(0, 13, 20, {{1, {4, 4, 4}}});
        TaskSpec donor = fixtures::task(1, 6, 15, {{1, {}}});
        donor.isolated = false;
        donor.arrival.kind = ArrivalKind::Sporadic;
        donor.arrival.min_gap = 9000;
        TaskSpec donor2 = donor;
        donor2.id = 2;
        crafted.tasks = {target, donor, donor2};
    }
    SimConfig cfg{4, 20, 0, Policy::Pcss, StealMode::DeadlineCompare};
    cfg.seed = fixtures::quiet_seed(crafted, {1, 2}, cfg.horizon);
    Trace par = run(crafted, cfg);
    cfg.steal = StealMode::Off;
    Trace seq = run(crafted, cfg);
    bool ratio_ok = speedup(par, seq, 0) == Rational(13, 5);

    // Across feasible sets, turning stealing on must never add a deadline
    // miss to an isolated task.
    int accepted = 0, regressions = 0;
    for (std::uint64_t seed = 0; accepted < 200 && seed < 5000; ++seed) {
        GenParams p;
        p.period = {20, 100};
        p.non_isolated_pct = 50;
        p.seed = seed;
        int m;
        if (accepted % 2) {
            m = 2;
            p.n_tasks = 5;
            p.total_u = {1, 1};
            p.full_budget = true;
            p.parallelism = {0, 0};
        } else {
            m = 4;
            p.n_tasks = 6;
            p.total_u = {2, 1};
            p.exec_pct = {40, 100};
        }
        TaskSet ts = generate(p);
        if (!gfb_sufficient(ts, m))
            continue;
        accepted++;
        SimConfig off{m, 50 * max_period(ts), seed, Policy::Pcss, StealMode::Off};
        SimConfig on = off;
        on.steal = StealMode::DeadlineCompare;
        auto misses_off = per_task_stats(ts, run(ts, off));
        auto misses_on = per_task_stats(ts, run(ts, on));
        for (size_t k = 0; k < ts.tasks.size(); ++k)
            if (ts.tasks[k].isolated &&
                misses_on[k].misses > misses_off[k].misses)
                regressions++;
    }
    report(5,
           "crafted 13/5 speedup " + std::string(ratio_ok ? "exact" : "wrong") +
               "; " + std::to_string(accepted) +
               " feasible sets with stealing toggled, " +
               std::to_string(regressions) + " isolated-task miss regressions",
           ratio_ok && accepted == 200 && regressions == 0);
}

// --- criterion 6: determinism and throughput --------------------------------
void criterion6() {
    GenParams p;
    p.n_tasks = 6;
    p.total_u = {5, 4};
    p.parallelism = {1, 3};
    p.period = {20, 100};
    p.non_isolated_pct = 50;
    p.seed = 13;
    TaskSet ts = generate(p);
    SimConfig cfg{4, 20 * max_period(ts), 13, Policy::Pcss,
                  StealMode::DeadlineCompare};
    bool deterministic = trace_to_csv(run(ts, cfg)) == trace_to_csv(run(ts, cfg));

    GenParams big = p;
    big.n_tasks = 8;
    big.total_u = {7, 4};
    big.period = {20, 60};
    big.seed = 99;
    TaskSet bts = generate(big);
    auto t0 = Clock::now();
    SimConfig bcfg{4, 2000000, 99, Policy::Pcss, StealMode::DeadlineCompare};
    Trace btr = run(bts, bcfg);
    double dt = seconds_since(t0);
    bool fast = btr.records.size() >= 1000000 && dt < 10.0;
    report(6,
           std::string("identical seeds reproduce byte-identical traces") +
               (deterministic ? "" : " (NO)") + "; " +
               std::to_string(btr.records.size()) + " records in " + fmt(dt) +
               "s",
           deterministic && fast);
}

// --- criterion 7: work conservation -----------------------------------------
void criterion7() {
    long violations = 0;
    int runs = 0;
    for (int seed = 30; seed < 40; ++seed)
        for (int m : {1, 2, 4})
            for (StealMode st : {StealMode::Off, StealMode::QueueEmptyOnly,
                                 StealMode::DeadlineCompare}) {
                GenParams p;
                p.n_tasks = 4;
                p.total_u = {3, 4};
                p.period = {20, 100};
                p.non_isolated_pct = 50;
                p.seed = seed;
                TaskSet ts = generate(p);
                SimConfig cfg{m, 20 * max_period(ts), (std::uint64_t)seed,
                              Policy::Pcss, st};
                Trace tr = run(ts, cfg);
                violations +=
                    (long)check_work_conservation(ts, tr).violations.size();
                runs++;
            }
    report(7,
           "no worker idles past eligible work in " + std::to_string(runs) +
               " runs, " + std::to_string(violations) + " violations",
           violations == 0);
}

} // namespace

int main() {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    if (failures) {
        std::printf("%d criteria failed\n", failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
