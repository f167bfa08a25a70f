#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcss/time.hpp"

namespace pcss {

enum class ArrivalKind { Periodic, Sporadic };

struct ArrivalModel {
    ArrivalKind kind = ArrivalKind::Periodic;
    Tick min_gap = 0;   // defaults to the server period when left 0 in input
};

// One sequential stretch of a job followed by the pjobs it forks. Spawned
// pjob costs are listed in spawn order.
struct Segment {
    Tick cost = 0;
    std::vector<Tick> spawn;
};

struct JobTemplate {
    std::vector<Segment> segments;

    Tick sequential_cost() const;
    Tick total_cost() const;   // sequential plus all spawned pjob ticks
};

struct TaskSpec {
    int id = -1;
    Tick budget = 0;    // Q
    Tick period = 0;    // T, also the relative deadline
    bool isolated = true;
    ArrivalModel arrival;
    JobTemplate body;
    // Actual per-job execution as a percent range of the template total;
    // the drawn amount truncates the template from the tail.
    std::array<int, 2> exec_pct{100, 100};
};

struct TaskSet {
    std::vector<TaskSpec> tasks;

    // Returns human-readable violations; empty means well formed.
    std::vector<std::string> validate() const;
    const TaskSpec* find(int id) const;
};

// Q/T as an exact rational. Throws SpecError unless 0 < Q <= T.
Rational utilization(Tick budget, Tick period);

struct JobId {
    int task = -1;   // task id, not vector position
    int index = -1;  // per-task job sequence number, 0-based
    friend bool operator==(const JobId&, const JobId&) = default;
};

struct PJobId {
    int task = -1;
    int index = -1;
    int seq = -1;    // spawn sequence within the job, 0-based
    friend bool operator==(const PJobId&, const PJobId&) = default;
};

// A job instance. `plan` is the template after applying the per-job actual
// execution draw, so plan totals are what this instance really needs.
struct Job {
    JobId id;
    int server = -1;          // index into the server vector
    Tick arrival = 0;
    Tick release = 0;
    std::vector<Segment> plan;
    Tick total_cost = 0;      // sequential + pjob ticks of the plan

    int seg = 0;              // current segment
    Tick seg_done = 0;        // sequential ticks done inside current segment
    Tick executed = 0;        // all ticks charged so far (sequential + pjobs)
    int spawned = 0;
    int pending_pjobs = 0;
    std::optional<Tick> finish;

    bool sequential_done() const { return seg >= (int)plan.size(); }
    bool done() const { return finish.has_value(); }
    // Sequential ticks until the next spawn point or sequential completion.
    Tick ticks_to_milestone() const {
        return sequential_done() ? 0 : plan[seg].cost - seg_done;
    }
};

struct PJob {
    PJobId id;
    int server = -1;
    int parent = -1;          // index into the job vector
    Tick cost = 0;
    Tick remaining = 0;
    Tick spawn_time = 0;
};

// Reference to a runnable unit (job or pjob) by pool index.
struct UnitRef {
    enum Kind { None = 0, JobUnit = 1, PJobUnit = 2 };
    Kind kind = None;
    int idx = -1;

    bool valid() const { return kind != None; }
    friend bool operator==(const UnitRef&, const UnitRef&) = default;
};

enum class SourceKind { Own = 0, Residual = 1, Stolen = 2 };

// The capacity a unit charges while it runs and the deadline it competes
// with under EDF. Residual sources carry the donor's deadline; own and
// stolen capacity run at the consumer's deadline.
struct CapacitySource {
    SourceKind kind = SourceKind::Own;
    int server = -1;            // source server index
    Tick effective_deadline = 0;
    friend bool operator==(const CapacitySource&, const CapacitySource&) = default;
};

struct ServerState {
    int id = -1;                // task id
    Tick budget = 0;            // Q
    Tick period = 0;            // T
    bool isolated = true;

    Tick deadline = 0;          // d
    Tick capacity = 0;          // c, 0 <= c <= Q
    Tick residual = 0;          // r, r > 0 implies c == 0
    Tick replenish_at = 0;      // h, always equal to d while the pair is live
    bool active = false;

    // Released, unfinished jobs in arrival order; front is the served job.
    std::deque<int> fifo;

    // Charging tokens: each capacity is consumed by at most one unit at a
    // time. Maintained by the engine, read during source selection.
    UnitRef capacity_user;
    UnitRef residual_user;

    Rational util() const { return utilization(budget, period); }
};

// True iff some released job of this server is unfinished at time t.
bool has_pending_work(const ServerState& s, std::span<const Job> jobs, Tick t);

// The admission test run when a job arrives at an idle server: a fresh
// (d, c) pair is safe iff c >= (d - t) * Q / T, evaluated exactly.
bool cbs_fresh_pair_ok(const ServerState& s, Tick t);

struct WorkerState {
    int id = -1;
    UnitRef current;
    CapacitySource source;      // valid while current.valid()
    // Local pjob deque: back is the bottom (owner side), front is the top
    // (thief side). Holds pjob pool indices.
    std::deque<int> dq;

    bool busy() const { return current.valid(); }
};

std::string unit_str(const UnitRef& u, std::span<const Job> jobs, std::span<const PJob> pjobs);

} // namespace pcss
