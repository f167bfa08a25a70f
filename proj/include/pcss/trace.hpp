#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pcss/model.hpp"

namespace pcss {

// Everything the simulator decides ends up in the trace; metrics and the
// checkers are pure functions of it.
enum class RecordKind {
    Arrival,      // job released; eff_deadline = server deadline after admission
    Dispatch,     // unit starts on worker (global queue job or own-deque bottom pjob)
    Steal,        // pjob taken from another worker's deque top and started
    Preempt,      // unit leaves its worker unfinished; job -> global queue,
                  // pjob -> that worker's deque bottom
    Exec,         // charge interval [t0, t1)
    Idle,         // worker idle interval [t0, t1)
    Spawn,        // pjob pushed to the spawning worker's deque bottom
    SeqDone,      // job's sequential part finished; it waits for its pjobs
    Completion,   // unit finished; eff_deadline = the job's release + period
    Release,      // leftover capacity turned into residual (r := c, c := 0)
    Exhaust,      // bound source hit zero with the unit unfinished
    Replenish,    // c := Q, d += T at h; eff_deadline = new deadline
    Expiry,       // residual discarded at the source deadline
    Deactivate,   // server went inactive
};

const char* record_kind_name(RecordKind k);
std::optional<RecordKind> record_kind_from(std::string_view name);

// Unit naming in the trace: jobs "J<task>.<index>", pjobs "P<task>.<index>.<seq>".
struct TraceUnit {
    int kind = 0;     // 0 none, 1 job, 2 pjob
    int task = -1;
    int index = -1;
    int seq = -1;

    std::string str() const;
    static TraceUnit parse(std::string_view s);
    static TraceUnit job(int task, int index) { return {1, task, index, -1}; }
    static TraceUnit pjob(int task, int index, int seq) { return {2, task, index, seq}; }
    friend bool operator==(const TraceUnit&, const TraceUnit&) = default;
};

struct TraceRecord {
    Tick t0 = 0;
    Tick t1 = 0;              // == t0 for point records
    int worker = -1;
    RecordKind kind = RecordKind::Exec;
    TraceUnit unit;
    int server = -1;          // task id of the unit's server, or the event server
    int source_kind = -1;     // SourceKind value, -1 when not applicable
    int source_server = -1;   // task id of the charged server
    Tick eff_deadline = -1;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct TraceMeta {
    int version = 1;
    int cores = 1;
    Tick horizon = 0;
    std::uint64_t seed = 0;
    std::string policy = "pcss";            // cbs | css | pcss
    std::string steal = "deadline-compare"; // off | queue-empty-only | deadline-compare
    std::uint64_t taskset_hash = 0;
};

struct Trace {
    TraceMeta meta;
    std::vector<TraceRecord> records;
};

std::string trace_to_csv(const Trace& t);
Trace trace_from_csv(std::string_view text);   // throws SpecError on malformed input

// Stable FNV-1a over the structural content of a task set; embedded in the
// trace header so downstream tools can spot mismatched inputs.
std::uint64_t taskset_hash(const TaskSet& ts);

// Merges per-worker activity into maximal [t0, t1) intervals. Both the event
// engine and the per-tick reference scheduler emit through this so their
// interval records line up exactly.
class IntervalBuilder {
public:
    explicit IntervalBuilder(int workers);

    struct RunningState {
        TraceUnit unit;
        int server = -1;
        int source_kind = -1;
        int source_server = -1;
        Tick eff_deadline = -1;
        friend bool operator==(const RunningState&, const RunningState&) = default;
    };

    // Declare worker w running `rs` (or idle when nullopt) from time t on.
    void set_state(int w, Tick t, const std::optional<RunningState>& rs);
    // Force an interval boundary at t: a preempted-and-redispatched unit must
    // show two runs even when its binding comes back identical, or the merged
    // interval would hide the re-selection from the trace checkers.
    void interrupt(int w, Tick t);
    // Close all open intervals at `end` and append them.
    void finish(Tick end);

    std::vector<TraceRecord>& records() { return records_; }

private:
    void flush(int w, Tick t);

    struct Open {
        Tick since = 0;
        bool idle = true;
        RunningState rs;
        bool any = false;
    };
    std::vector<Open> open_;
    std::vector<TraceRecord> records_;
};

// Chronological order for serialization: stable sort by interval start, so
// point records keep their emission order inside one instant.
void sort_records(std::vector<TraceRecord>& recs);

} // namespace pcss
