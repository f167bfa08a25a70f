#pragma once

#include <optional>
#include <vector>

#include "pcss/model.hpp"
#include "pcss/server_pcss.hpp"

namespace pcss {

// Work-stealing policy. Off keeps pjobs on the worker that spawned them;
// queue-empty-only steals only when no eligible job waits in the global
// queue; deadline-compare always weighs steal targets against the queue.
enum class StealMode { Off, QueueEmptyOnly, DeadlineCompare };

// Mutable view over the scheduler state shared by dispatch decisions.
struct SchedContext {
    std::vector<ServerState>& servers;
    std::vector<Job>& jobs;
    std::vector<PJob>& pjobs;
    std::vector<WorkerState>& workers;
    std::vector<int>& queue;   // released job indices, kept deadline-sorted
    RuleSet rules;
    StealMode steal = StealMode::DeadlineCompare;
};

// Global queue ordering: (server deadline, server id, job index).
void enqueue_job(SchedContext& ctx, int job_idx);      // ordered insert, rejects duplicates
void remove_queued_job(SchedContext& ctx, int job_idx);
void resort_queue(SchedContext& ctx);                  // after server deadlines moved

// What a worker would run next. Local bottom wins deadline ties, then the
// global queue, then a steal from another deque's top (ties by victim id).
struct Candidate {
    enum class From { Local, Global, Steal };
    From from = From::Local;
    UnitRef unit;
    CapacitySource source;
    int victim = -1;           // worker index for From::Steal
};

// Evaluates without binding anything; the same scan serves idle workers
// (dispatch) and busy ones (preemption test). Returns nullopt when nothing
// accessible to this worker is eligible.
std::optional<Candidate> next_work(const SchedContext& ctx, int worker, Tick t);

// A preemption is a directed handoff: the candidate that justified it takes
// the freed worker. Parking the victim first and re-running selection does
// not work, because the victim lands on its own deque bottom and hides the
// candidate that beat it.
struct Preemption {
    int victim = -1;           // worker index
    Candidate cand;
};

// Among workers where something accessible beats the running unit's
// effective deadline strictly, picks the one running the latest deadline
// and the candidate that will replace it. nullopt when none.
std::optional<Preemption> find_preemption(const SchedContext& ctx, Tick t);

// Fork the current segment's pjobs onto the executing worker's deque
// bottom, in listed order (so the owner pops the last-listed first).
// Returns the new pjob pool indices.
std::vector<int> spawn_pjobs(SchedContext& ctx, int worker, int job_idx, Tick t);

} // namespace pcss
