#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pcss/engine.hpp"

namespace pcss {

// Validation verdict; every entry is one human-readable violation with its
// time. Long lists are truncated with a trailing note.
struct CheckResult {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

// The checkers replay the trace against the task set with an independent
// mirror of server, queue, and deque state. They never throw on a bad
// trace; problems come back as violations.

// Budget algebra and the isolation guarantee: capacities stay in [0, Q],
// residuals are consumed inside their release window, at most one unit
// charges a pool at a time, charges never cross an invalidating event, and
// isolated servers are never used as steal donors.
CheckResult check_isolation(const TaskSet& ts, const Trace& tr);

// Scheduling discipline: dispatches come off the global queue or the own
// deque bottom, steals off another deque's top, preempted pjobs go back to
// that worker's bottom; and between boundaries no worker runs a unit while
// something it could access has a strictly earlier effective deadline.
CheckResult check_edf_and_deques(const TaskSet& ts, const Trace& tr);

// No worker idles while a unit it could legally start is available.
CheckResult check_work_conservation(const TaskSet& ts, const Trace& tr);

// Charged execution adds up: every unit's exec time equals its plan amount
// exactly when (and only when) its completion is recorded.
CheckResult check_tick_conservation(const TaskSet& ts, const Trace& tr);

std::vector<std::pair<std::string, CheckResult>> run_all_checks(const TaskSet& ts,
                                                                const Trace& tr);

struct TaskStats {
    int task = -1;
    int released = 0;
    int completed = 0;
    int misses = 0;          // completions after release + period
    Tick max_tardiness = 0;
    Tick max_response = 0;
    double avg_response = 0.0;
};

std::vector<TaskStats> per_task_stats(const TaskSet& ts, const Trace& tr);

// Response-time ratio sequential/parallel for the first completed job of
// `task_id` in each trace. Throws SpecError when the traces are not runs of
// the same task set or the job is missing from either.
Rational speedup(const Trace& parallel, const Trace& sequential, int task_id);

// Independent per-tick reference scheduler: uniprocessor hard-reservation
// CBS over sequential bodies. Byte-identical to the event engine under
// policy cbs on that class; used to pin the engine's semantics.
Trace oracle_cbs_uniproc(const TaskSet& ts, const SimConfig& cfg);

// Sufficient global-EDF feasibility bound for m cores, evaluated in exact
// rationals: sum(U) <= m - (m - 1) * max(U).
bool gfb_sufficient(const TaskSet& ts, int m);

// Headline numbers for a run as a small JSON document.
std::string metrics_json(const TaskSet& ts, const Trace& tr);

} // namespace pcss
