#include "pcss/analysis.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include <json.hpp>

#include "pcss/server_pcss.hpp"
#include "pcss/workload.hpp"

namespace pcss {

namespace {

constexpr int kMaxListed = 40;

void note(std::vector<std::string>& out, Tick t, const std::string& what) {
    if ((int)out.size() < kMaxListed)
        out.push_back("t=" + std::to_string(t) + ": " + what);
    else if ((int)out.size() == kMaxListed)
        out.push_back("(further violations suppressed)");
}

RuleSet rules_of(const std::string& policy) {
    auto p = policy_from(policy);
    if (p == Policy::Cbs)
        return RuleSet::cbs();
    if (p == Policy::Css)
        return {true, true, false};
    return RuleSet::full();
}

// Re-simulates the bookkeeping a valid trace implies: server budgets and
// deadlines, the global queue, the per-worker deques, and the bindings.
// Everything the records claim is verified against this mirror; findings
// land in one of three buckets.
class Replay {
public:
    Replay(const TaskSet& ts, const Trace& tr)
        : ts_(ts), tr_(tr),
          ctx_{servers_, jobs_, pjobs_, workers_, queue_, RuleSet::full(),
               StealMode::DeadlineCompare} {}

    void run();

    std::vector<std::string> algebra;    // budgets, windows, isolation
    std::vector<std::string> sched;      // deques, bindings, EDF
    std::vector<std::string> conserve;   // idle workers with eligible work

private:
    struct JobX {
        std::vector<Tick> spawn_costs;
        int spawn_cursor = 0;
        int pending = 0;
        bool seq_done = false;
    };
    struct Use {
        int src = -1;
        bool residual_pool = false;
        int kind = -1;
        int consumer = -1;
        Tick end = 0;
    };

    int sidx(int task_id) const {
        auto it = sidx_.find(task_id);
        return it == sidx_.end() ? -1 : it->second;
    }
    int find_job(const TraceUnit& u) const {
        auto it = job_ix_.find({u.task, u.index});
        return it == job_ix_.end() ? -1 : it->second;
    }
    int find_pjob(const TraceUnit& u) const {
        auto it = pjob_ix_.find({u.task, u.index, u.seq});
        return it == pjob_ix_.end() ? -1 : it->second;
    }
    int consumer_of(UnitRef u) const {
        return u.kind == UnitRef::JobUnit ? jobs_[u.idx].server : pjobs_[u.idx].server;
    }
    bool queued(int ji) const {
        return std::find(queue_.begin(), queue_.end(), ji) != queue_.end();
    }
    bool job_eligible(int ji, Tick t) const {
        UnitRef u{UnitRef::JobUnit, ji};
        for (const ServerState& s : servers_)
            if (s.residual_user == u)
                return true;   // kept reclaim link
        return select_capacity_source(jobs_[ji].server, t, servers_, rules_)
            .has_value();
    }

    void unbind_mirror(int w, Tick t) {
        WorkerState& wk = workers_[w];
        if (!wk.current.valid())
            return;
        ServerState& s = servers_[wk.source.server];
        UnitRef& tok = wk.source.kind == SourceKind::Residual ? s.residual_user
                                                              : s.capacity_user;
        if (tok == wk.current)
            tok = {};
        else if (tok.valid())   // cleared-by-event is fine; mismatch is not
            note(sched, t, "source token out of sync at unbind");
        wk.current = {};
        wk.source = {};
    }

    void bind_mirror(int w, UnitRef u, const CapacitySource& src, Tick t) {
        if (workers_[w].current.valid()) {
            note(sched, t, "worker " + std::to_string(w) + " given a unit while busy");
            unbind_mirror(w, t);
        }
        ServerState& s = servers_[src.server];
        UnitRef& tok =
            src.kind == SourceKind::Residual ? s.residual_user : s.capacity_user;
        if (!(tok == u && src.kind == SourceKind::Residual)) {
            if (tok.valid())
                note(algebra, t, "two units bound to one capacity of server " +
                                     std::to_string(s.id));
            tok = u;
        }
        workers_[w].current = u;
        workers_[w].source = src;
    }

    bool bad_worker(const TraceRecord& r) {
        if (r.worker >= 0 && r.worker < (int)workers_.size())
            return false;
        note(sched, r.t0, std::string(record_kind_name(r.kind)) +
                              " with out-of-range worker " + std::to_string(r.worker));
        return true;
    }

    CapacitySource rec_source(const TraceRecord& r) const {
        CapacitySource src;
        src.kind = (SourceKind)r.source_kind;
        src.server = sidx(r.source_server);
        src.effective_deadline = r.eff_deadline;
        return src;
    }

    void on_arrival(const TraceRecord& r);
    void on_replenish(const TraceRecord& r);
    void on_release(const TraceRecord& r);
    void on_expiry(const TraceRecord& r);
    void on_deactivate(const TraceRecord& r);
    void on_spawn(const TraceRecord& r);
    void on_seq_done(const TraceRecord& r);
    void on_completion(const TraceRecord& r);
    void on_preempt(const TraceRecord& r);
    void on_dispatch(const TraceRecord& r, bool steal);
    void on_exec(const TraceRecord& r);
    void on_idle(const TraceRecord& r);
    void apply(const TraceRecord& r);
    void stable_checks(Tick t, Tick next_t);

    const TaskSet& ts_;
    const Trace& tr_;
    RuleSet rules_;
    StealMode steal_ = StealMode::DeadlineCompare;
    Tick horizon_ = 0;

    std::vector<ServerState> servers_;
    std::vector<Job> jobs_;
    std::vector<PJob> pjobs_;
    std::vector<WorkerState> workers_;
    std::vector<int> queue_;
    SchedContext ctx_;

    std::vector<JobX> jobx_;
    std::map<std::pair<int, int>, int> job_ix_;
    std::map<std::tuple<int, int, int>, int> pjob_ix_;
    std::map<int, int> sidx_;
    std::vector<std::vector<Tick>> arr_;
    std::vector<int> arr_next_;
    std::vector<Use> uses_;
    // Pjobs preempted at the instant being processed, per worker. A handoff
    // pops its candidate from under the victim pushed back the same instant.
    std::vector<std::pair<int, int>> preempted_now_;
    // A preemption directly followed by a dispatch on the same worker is a
    // handoff; its candidate was picked before the victim's capacity pool
    // was released, so the steal gate must be judged in that state.
    struct LastPreempt {
        bool valid = false;
        int worker = -1;
        Tick t = 0;
        int freed_server = -1;   // capacity pool the preempt released, or -1
        UnitRef victim;
    };
    LastPreempt last_preempt_;
    LastPreempt handoff_;
    struct Cover {
        bool have = false;
        TraceRecord rec;
    };
    std::vector<Cover> cover_;
};

void Replay::on_arrival(const TraceRecord& r) {
    int si = sidx(r.server);
    if (si < 0 || r.unit.kind != 1) {
        note(sched, r.t0, "malformed arrival record");
        return;
    }
    ServerState& s = servers_[si];
    Tick t = r.t0;
    int index = r.unit.index;
    if (r.unit.task != s.id)
        note(sched, t, "arrival unit does not belong to the record's server");
    if (index != arr_next_[si])
        note(sched, t, "arrival out of sequence for task " + std::to_string(s.id));
    else if (index < (int)arr_[si].size() && arr_[si][index] != t)
        note(sched, t, "arrival at unexpected instant for task " + std::to_string(s.id));
    arr_next_[si] = index + 1;

    bool had = !s.fifo.empty();
    if (!had)
        for (const Use& u : uses_)
            if (u.src == si && !u.residual_pool && u.kind == (int)SourceKind::Stolen &&
                u.end > t)
                note(algebra, t, "steal keeps charging server " + std::to_string(s.id) +
                                     " across its arrival");

    const TaskSpec& task = ts_.tasks[si];
    Job j;
    j.id = {s.id, index};
    j.server = si;
    j.arrival = j.release = t;
    j.plan = truncate_plan(task.body, draw_actual_cost(task, tr_.meta.seed, index));
    j.total_cost = JobTemplate{j.plan}.total_cost();
    int ji = (int)jobs_.size();
    JobX x;
    for (const Segment& seg : j.plan)
        for (Tick c : seg.spawn)
            x.spawn_costs.push_back(c);
    jobs_.push_back(std::move(j));
    jobx_.push_back(std::move(x));
    job_ix_[{s.id, index}] = ji;
    s.fifo.push_back(ji);

    if (!had) {
        if (cbs_fresh_pair_ok(s, t)) {
            if (s.residual > 0)
                note(algebra, t, "fresh pair granted while a residual is outstanding");
            s.deadline = t + s.period;
            s.capacity = s.budget;
            s.replenish_at = s.deadline;
        }
    }
    if (r.eff_deadline != s.deadline)
        note(algebra, t, "admission outcome mismatch for server " + std::to_string(s.id) +
                             ": trace says d=" + std::to_string(r.eff_deadline) +
                             ", mirror has d=" + std::to_string(s.deadline));
    s.active = true;
    if (!had && !queued(ji))
        queue_.push_back(ji);
}

void Replay::on_replenish(const TraceRecord& r) {
    int si = sidx(r.server);
    if (si < 0)
        return;
    ServerState& s = servers_[si];
    Tick t = r.t0;
    for (const Use& u : uses_) {
        if (u.src == si && u.end > t)
            note(algebra, t, "charge crosses replenishment of server " +
                                 std::to_string(s.id));
        if (u.consumer == si && u.end > t)
            note(algebra, t, "unit of server " + std::to_string(s.id) +
                                 " keeps running across its replenishment");
    }
    if (!(s.active || (!s.isolated && rules_.steal)))
        note(algebra, t, "replenishment of a lapsed server " + std::to_string(s.id));
    Tick expect = s.deadline + s.period;
    if (r.eff_deadline != expect)
        note(algebra, t, "replenishment deadline mismatch for server " +
                             std::to_string(s.id));
    s.deadline = r.eff_deadline > 0 ? r.eff_deadline : expect;
    s.capacity = s.budget;
    s.residual = 0;
    s.replenish_at = s.deadline;
    s.capacity_user = {};
    s.residual_user = {};
    // Kept reclaim links of this server's units were priced on the old
    // deadline; they fall away with the replenishment.
    for (ServerState& o : servers_)
        if (o.residual_user.valid() && consumer_of(o.residual_user) == si)
            o.residual_user = {};
}

void Replay::on_release(const TraceRecord& r) {
    int si = sidx(r.server);
    if (si < 0)
        return;
    ServerState& s = servers_[si];
    Tick t = r.t0;
    if (!rules_.release_residual)
        note(algebra, t, "residual released under a policy without residuals");
    for (const Use& u : uses_)
        if (u.src == si && !u.residual_pool && u.end > t)
            note(algebra, t, "charge crosses the release of server " +
                                 std::to_string(s.id));
    if (s.capacity <= 0)
        note(algebra, t, "release with no leftover capacity");
    if (t >= s.deadline)
        note(algebra, t, "release at or past the server deadline");
    if (r.eff_deadline != s.deadline)
        note(algebra, t, "release deadline mismatch");
    s.residual = s.capacity;
    s.capacity = 0;
}

void Replay::on_expiry(const TraceRecord& r) {
    int si = sidx(r.server);
    if (si < 0)
        return;
    ServerState& s = servers_[si];
    Tick t = r.t0;
    for (const Use& u : uses_)
        if (u.src == si && u.residual_pool && u.end > t)
            note(algebra, t, "reclaim crosses the expiry of server " +
                                 std::to_string(s.id));
    if (s.residual <= 0)
        note(algebra, t, "expiry with no residual outstanding");
    if (s.deadline != t)
        note(algebra, t, "expiry away from the source deadline");
    s.residual = 0;
    s.residual_user = {};
}

void Replay::on_deactivate(const TraceRecord& r) {
    int si = sidx(r.server);
    if (si < 0)
        return;
    ServerState& s = servers_[si];
    Tick t = r.t0;
    if (!s.fifo.empty())
        note(sched, t, "deactivation of server " + std::to_string(s.id) +
                           " with jobs pending");
    if (s.capacity > 0 && rules_.release_residual) {
        if (t < s.deadline)
            note(algebra, t, "leftover capacity neither released nor discarded");
        s.capacity = 0;
    }
    s.active = false;
}

void Replay::on_spawn(const TraceRecord& r) {
    if (bad_worker(r) || r.unit.kind != 2)
        return;
    Tick t = r.t0;
    int ji = find_job(TraceUnit::job(r.unit.task, r.unit.index));
    if (ji < 0) {
        note(sched, t, "spawn for an unknown job");
        return;
    }
    WorkerState& wk = workers_[r.worker];
    if (!(wk.current == UnitRef{UnitRef::JobUnit, ji}))
        note(sched, t, "spawn from a job that is not running on that worker");
    JobX& x = jobx_[ji];
    Tick cost = 1;
    if (x.spawn_cursor >= (int)x.spawn_costs.size())
        note(sched, t, "spawn beyond the job's plan");
    else
        cost = x.spawn_costs[x.spawn_cursor];
    if (r.unit.seq != x.spawn_cursor)
        note(sched, t, "spawn sequence number out of order");
    x.spawn_cursor++;
    x.pending++;

    PJob p;
    p.id = {r.unit.task, r.unit.index, r.unit.seq};
    p.server = jobs_[ji].server;
    p.parent = ji;
    p.cost = p.remaining = cost;
    p.spawn_time = t;
    int pi = (int)pjobs_.size();
    pjobs_.push_back(p);
    pjob_ix_[{r.unit.task, r.unit.index, r.unit.seq}] = pi;
    wk.dq.push_back(pi);
}

void Replay::on_seq_done(const TraceRecord& r) {
    if (bad_worker(r))
        return;
    Tick t = r.t0;
    int ji = find_job(r.unit);
    if (ji < 0 || r.unit.kind != 1) {
        note(sched, t, "seq-done for an unknown job");
        return;
    }
    WorkerState& wk = workers_[r.worker];
    if (!(wk.current == UnitRef{UnitRef::JobUnit, ji}))
        note(sched, t, "seq-done for a job not running on that worker");
    else
        unbind_mirror(r.worker, t);
    JobX& x = jobx_[ji];
    x.seq_done = true;
    if (x.spawn_cursor != (int)x.spawn_costs.size())
        note(sched, t, "sequential part finished before all its spawns");
    if (x.pending == 0)
        note(sched, t, "seq-done recorded for a job with nothing outstanding");
}

void Replay::on_completion(const TraceRecord& r) {
    Tick t = r.t0;
    if (r.unit.kind == 2) {
        int pi = find_pjob(r.unit);
        if (pi < 0 || bad_worker(r)) {
            note(sched, t, "completion of an unknown pjob");
            return;
        }
        WorkerState& wk = workers_[r.worker];
        if (!(wk.current == UnitRef{UnitRef::PJobUnit, pi})) {
            note(sched, t, "pjob completion away from its worker");
            return;
        }
        unbind_mirror(r.worker, t);
        JobX& x = jobx_[pjobs_[pi].parent];
        if (x.pending <= 0)
            note(sched, t, "pjob completion with none outstanding");
        else
            x.pending--;
        return;
    }
    int ji = find_job(r.unit);
    if (ji < 0) {
        note(sched, t, "completion of an unknown job");
        return;
    }
    Job& j = jobs_[ji];
    for (auto& wk : workers_)
        if (wk.current == UnitRef{UnitRef::JobUnit, ji}) {
            if (wk.id != r.worker)
                note(sched, t, "job completion attributed to the wrong worker");
            unbind_mirror(wk.id, t);
        }
    if (jobx_[ji].pending != 0)
        note(sched, t, "job completed with pjobs outstanding");
    j.finish = t;
    ServerState& s = servers_[j.server];
    if (r.eff_deadline != j.release + s.period)
        note(sched, t, "completion deadline field mismatch");
    if (s.fifo.empty() || s.fifo.front() != ji) {
        note(sched, t, "completed job was not the served one");
        std::erase(s.fifo, ji);
    } else {
        s.fifo.pop_front();
    }
    if (queued(ji)) {
        note(sched, t, "completed job still sat in the global queue");
        std::erase(queue_, ji);
    }
    if (!s.fifo.empty() && !queued(s.fifo.front()))
        queue_.push_back(s.fifo.front());
}

void Replay::on_preempt(const TraceRecord& r) {
    if (bad_worker(r))
        return;
    Tick t = r.t0;
    WorkerState& wk = workers_[r.worker];
    UnitRef u = r.unit.kind == 1 ? UnitRef{UnitRef::JobUnit, find_job(r.unit)}
                                 : UnitRef{UnitRef::PJobUnit, find_pjob(r.unit)};
    if (u.idx < 0) {
        note(sched, t, "preemption of an unknown unit");
        return;
    }
    if (!(wk.current == u)) {
        note(sched, t, "preemption of a unit not on that worker");
        return;
    }
    CapacitySource src = rec_source(r);
    if (wk.source.kind != src.kind || wk.source.server != src.server ||
        wk.source.effective_deadline != src.effective_deadline)
        note(sched, t, "preemption record disagrees with the bound source");
    last_preempt_ = {true, r.worker, t, -1, u};
    if (wk.source.kind == SourceKind::Residual && wk.source.server >= 0 &&
        servers_[wk.source.server].residual > 0) {
        // A preempted reclaimer keeps its link; the token stays with it.
        wk.current = {};
        wk.source = {};
    } else {
        if (wk.source.kind != SourceKind::Residual && wk.source.server >= 0 &&
            servers_[wk.source.server].capacity_user == wk.current)
            last_preempt_.freed_server = wk.source.server;
        unbind_mirror(r.worker, t);
    }
    if (u.kind == UnitRef::JobUnit) {
        if (!queued(u.idx))
            queue_.push_back(u.idx);
    } else {
        wk.dq.push_back(u.idx);   // back to that worker's bottom
        preempted_now_.push_back({r.worker, u.idx});
    }
}

void Replay::on_dispatch(const TraceRecord& r, bool steal) {
    if (bad_worker(r))
        return;
    Tick t = r.t0;
    UnitRef u = r.unit.kind == 1 ? UnitRef{UnitRef::JobUnit, find_job(r.unit)}
                                 : UnitRef{UnitRef::PJobUnit, find_pjob(r.unit)};
    if (u.idx < 0) {
        note(sched, t, "dispatch of an unknown unit");
        return;
    }
    if (steal) {
        if (u.kind != UnitRef::PJobUnit) {
            note(sched, t, "steal of something that is not a pjob");
            return;
        }
        if (steal_ == StealMode::Off)
            note(sched, t, "steal while stealing is disabled");
        if (steal_ == StealMode::QueueEmptyOnly) {
            // Judge the gate as of the handoff decision: re-hold the pool the
            // paired preemption released an instant earlier, and skip the
            // victim itself, which was running then, not queued.
            int hold = handoff_.valid ? handoff_.freed_server : -1;
            UnitRef saved;
            if (hold >= 0) {
                saved = servers_[hold].capacity_user;
                servers_[hold].capacity_user = handoff_.victim;
            }
            for (int ji : queue_) {
                if (handoff_.valid && handoff_.victim == UnitRef{UnitRef::JobUnit, ji})
                    continue;
                if (job_eligible(ji, t))
                    note(sched, t, "steal while an eligible job was queued");
            }
            if (hold >= 0)
                servers_[hold].capacity_user = saved;
        }
        bool found = false;
        for (auto& wk : workers_)
            if (wk.id != r.worker && !wk.dq.empty() && wk.dq.front() == u.idx) {
                wk.dq.pop_front();
                found = true;
                break;
            }
        if (!found)
            note(sched, t, "stolen pjob was not at any other deque's top");
    } else if (u.kind == UnitRef::JobUnit) {
        if (queued(u.idx))
            std::erase(queue_, u.idx);
        else
            note(sched, t, "dispatched job was not in the global queue");
    } else {
        WorkerState& wk = workers_[r.worker];
        auto pushed_now = [&](int pi) {
            for (auto& [pw, pp] : preempted_now_)
                if (pw == r.worker && pp == pi)
                    return true;
            return false;
        };
        bool ok = false;
        for (int k = (int)wk.dq.size() - 1; k >= 0; --k) {
            if (wk.dq[k] == u.idx) {
                wk.dq.erase(wk.dq.begin() + k);
                ok = true;
                break;
            }
            if (!pushed_now(wk.dq[k]))
                break;   // only same-instant preemptees may sit below the pick
        }
        if (!ok)
            note(sched, t, "dispatched pjob was not at the own deque bottom");
    }
    CapacitySource src = rec_source(r);
    if (src.server < 0) {
        note(sched, t, "dispatch without a charged server");
        return;
    }
    bind_mirror(r.worker, u, src, t);
}

void Replay::on_exec(const TraceRecord& r) {
    if (bad_worker(r))
        return;
    Tick t = r.t0;
    Cover& cv = cover_[r.worker];
    if (cv.have && cv.rec.t1 != t)
        note(sched, t, "worker " + std::to_string(r.worker) +
                           " activity has a gap or overlap");
    if (!cv.have && t != 0)
        note(sched, t, "worker coverage starts late");
    cv.have = true;
    cv.rec = r;
    if (r.t1 <= r.t0) {
        note(sched, t, "empty interval recorded");
        return;
    }

    UnitRef u = r.unit.kind == 1 ? UnitRef{UnitRef::JobUnit, find_job(r.unit)}
                                 : UnitRef{UnitRef::PJobUnit, find_pjob(r.unit)};
    WorkerState& wk = workers_[r.worker];
    if (u.idx < 0 || !(wk.current == u)) {
        note(sched, t, "exec interval disagrees with the dispatched unit");
        return;
    }
    CapacitySource src = rec_source(r);
    if (wk.source.kind != src.kind || wk.source.server != src.server ||
        wk.source.effective_deadline != src.effective_deadline)
        note(sched, t, "exec interval disagrees with the bound source");
    if (src.server < 0)
        return;

    ServerState& s = servers_[src.server];
    int consumer = consumer_of(u);
    Tick amount = r.t1 - r.t0;
    bool rpool = src.kind == SourceKind::Residual;
    for (const Use& use : uses_)
        if (use.src == src.server && use.residual_pool == rpool && use.end > t)
            note(algebra, t, "capacity of server " + std::to_string(s.id) +
                                 " charged by two units at once");
    switch (src.kind) {
    case SourceKind::Own:
        if (src.server != consumer)
            note(algebra, t, "own-capacity charge against a foreign server");
        if (src.effective_deadline != s.deadline)
            note(algebra, t, "own charge priced at a stale deadline");
        break;
    case SourceKind::Residual:
        if (src.effective_deadline != s.deadline)
            note(algebra, t, "residual charge priced away from the donor deadline");
        if (s.deadline < servers_[consumer].deadline)
            note(algebra, t, "reclaimed residual has an earlier deadline than the consumer");
        if (r.t1 > s.deadline)
            note(algebra, t, "residual charged past its deadline");
        break;
    case SourceKind::Stolen:
        if (s.isolated)
            note(algebra, t, "isolation breach: capacity stolen from isolated server " +
                                 std::to_string(s.id));
        if (s.active)
            note(algebra, t, "capacity stolen from an active server");
        if (s.deadline > servers_[consumer].deadline)
            note(algebra, t, "stolen from a later-deadline donor");
        if (src.effective_deadline != servers_[consumer].deadline)
            note(algebra, t, "stolen charge not priced at the thief deadline");
        break;
    }
    Tick& pool = rpool ? s.residual : s.capacity;
    pool -= amount;
    if (pool < 0) {
        note(algebra, t, "server " + std::to_string(s.id) + " overdrawn by " +
                             std::to_string(-pool) + " ticks");
        pool = 0;
    }
    uses_.push_back({src.server, rpool, (int)src.kind, consumer, r.t1});
}

void Replay::on_idle(const TraceRecord& r) {
    if (bad_worker(r))
        return;
    Tick t = r.t0;
    Cover& cv = cover_[r.worker];
    if (cv.have && cv.rec.t1 != t)
        note(sched, t, "worker " + std::to_string(r.worker) +
                           " activity has a gap or overlap");
    if (!cv.have && t != 0)
        note(sched, t, "worker coverage starts late");
    cv.have = true;
    cv.rec = r;
    if (workers_[r.worker].current.valid())
        note(sched, t, "idle interval recorded for a busy worker");
}

void Replay::apply(const TraceRecord& r) {
    LastPreempt lp = std::exchange(last_preempt_, {});
    switch (r.kind) {
    case RecordKind::Arrival: on_arrival(r); break;
    case RecordKind::Replenish: on_replenish(r); break;
    case RecordKind::Release: on_release(r); break;
    case RecordKind::Expiry: on_expiry(r); break;
    case RecordKind::Deactivate: on_deactivate(r); break;
    case RecordKind::Spawn: on_spawn(r); break;
    case RecordKind::SeqDone: on_seq_done(r); break;
    case RecordKind::Completion: on_completion(r); break;
    case RecordKind::Preempt: on_preempt(r); break;
    case RecordKind::Dispatch: on_dispatch(r, false); break;
    case RecordKind::Steal:
        if (lp.valid && lp.worker == r.worker && lp.t == r.t0)
            handoff_ = lp;
        on_dispatch(r, true);
        handoff_ = {};
        break;
    case RecordKind::Exec: on_exec(r); break;
    case RecordKind::Idle: on_idle(r); break;
    case RecordKind::Exhaust: {
        int si = sidx(r.source_server);
        if (si >= 0) {
            Tick pool = r.source_kind == (int)SourceKind::Residual
                            ? servers_[si].residual
                            : servers_[si].capacity;
            if (pool != 0)
                note(algebra, r.t0, "exhaustion reported with budget left");
        }
        break;
    }
    }
}

void Replay::stable_checks(Tick t, Tick next_t) {
    for (int w = 0; w < (int)workers_.size(); ++w) {
        const WorkerState& wk = workers_[w];
        const Cover& cv = cover_[w];
        if (!cv.have || cv.rec.t0 > t || cv.rec.t1 < next_t) {
            note(sched, t, "worker " + std::to_string(w) + " time not covered by intervals");
        } else if (cv.rec.kind == RecordKind::Idle) {
            if (wk.busy())
                note(sched, t, "interval says idle but worker " + std::to_string(w) +
                                   " is bound");
        } else if (!wk.busy()) {
            note(sched, t, "interval says exec but worker " + std::to_string(w) +
                               " is free");
        }
        auto cand = next_work(ctx_, w, t);
        if (wk.busy()) {
            if (cand &&
                cand->source.effective_deadline < wk.source.effective_deadline)
                note(sched, t,
                     "EDF inversion on worker " + std::to_string(w) + ": runs d=" +
                         std::to_string(wk.source.effective_deadline) +
                         " with d=" +
                         std::to_string(cand->source.effective_deadline) +
                         " accessible");
        } else if (cand) {
            note(conserve, t, "worker " + std::to_string(w) +
                                  " idle while work with d=" +
                                  std::to_string(cand->source.effective_deadline) +
                                  " is eligible");
        }
    }
}

void Replay::run() {
    horizon_ = tr_.meta.horizon;
    if (horizon_ <= 0) {
        note(sched, 0, "trace header has no horizon");
        return;
    }
    if (!policy_from(tr_.meta.policy))
        note(sched, 0, "unknown policy in trace header");
    rules_ = rules_of(tr_.meta.policy);
    if (auto sm = steal_from(tr_.meta.steal))
        steal_ = *sm;
    else
        note(sched, 0, "unknown steal mode in trace header");
    ctx_.rules = rules_;
    ctx_.steal = steal_;
    if (tr_.meta.cores < 1) {
        note(sched, 0, "trace header has no workers");
        return;
    }
    if (taskset_hash(ts_) != tr_.meta.taskset_hash)
        note(sched, 0, "trace was produced from a different task set");

    servers_.resize(ts_.tasks.size());
    for (int i = 0; i < (int)ts_.tasks.size(); ++i) {
        const TaskSpec& task = ts_.tasks[i];
        ServerState& s = servers_[i];
        s.id = task.id;
        s.budget = task.budget;
        s.period = task.period;
        s.isolated = task.isolated;
        s.replenish_at = kNoTick;
        if (!task.isolated && rules_.steal) {
            s.capacity = task.budget;
            s.deadline = task.period;
            s.replenish_at = task.period;
        }
        sidx_[task.id] = i;
    }
    workers_.resize(tr_.meta.cores);
    for (int w = 0; w < tr_.meta.cores; ++w)
        workers_[w].id = w;
    cover_.resize(tr_.meta.cores);
    arr_.resize(ts_.tasks.size());
    arr_next_.assign(ts_.tasks.size(), 0);
    for (int i = 0; i < (int)ts_.tasks.size(); ++i)
        arr_[i] = arrivals(ts_.tasks[i], horizon_, tr_.meta.seed);

    const auto& recs = tr_.records;
    for (size_t i = 1; i < recs.size(); ++i)
        if (recs[i].t0 < recs[i - 1].t0) {
            note(sched, recs[i].t0, "records are not time-sorted");
            return;
        }
    size_t i = 0;
    while (i < recs.size()) {
        Tick t = recs[i].t0;
        std::erase_if(uses_, [t](const Use& u) { return u.end <= t; });
        preempted_now_.clear();
        for (; i < recs.size() && recs[i].t0 == t; ++i)
            apply(recs[i]);
        Tick next_t = i < recs.size() ? recs[i].t0 : horizon_;
        if (t < horizon_ && next_t > t)
            stable_checks(t, next_t);
    }
}

} // namespace

CheckResult check_isolation(const TaskSet& ts, const Trace& tr) {
    Replay rp(ts, tr);
    rp.run();
    return {std::move(rp.algebra)};
}

CheckResult check_edf_and_deques(const TaskSet& ts, const Trace& tr) {
    Replay rp(ts, tr);
    rp.run();
    return {std::move(rp.sched)};
}

CheckResult check_work_conservation(const TaskSet& ts, const Trace& tr) {
    Replay rp(ts, tr);
    rp.run();
    return {std::move(rp.conserve)};
}

CheckResult check_tick_conservation(const TaskSet& ts, const Trace& tr) {
    CheckResult res;
    std::map<int, const TaskSpec*> task_of;
    for (const TaskSpec& t : ts.tasks)
        task_of[t.id] = &t;

    struct UnitAcc {
        Tick exec = 0;
        bool milestone = false;   // completion (pjob) or seq-done/completion (job)
    };
    std::map<std::tuple<int, int, int, int>, UnitAcc> acc;   // (kind, task, index, seq)
    auto key = [](const TraceUnit& u) {
        return std::make_tuple(u.kind, u.task, u.index, u.seq);
    };

    struct JobSeen {
        Tick seq_total = 0;
        std::vector<Tick> spawn_costs;
        int spawned = 0;
        bool completed = false;
    };
    std::map<std::pair<int, int>, JobSeen> jobs;

    for (const TraceRecord& r : tr.records) {
        switch (r.kind) {
        case RecordKind::Arrival: {
            auto it = task_of.find(r.server);
            if (it == task_of.end()) {
                note(res.violations, r.t0, "arrival for an unknown task");
                break;
            }
            JobSeen js;
            auto plan = truncate_plan(it->second->body,
                                      draw_actual_cost(*it->second, tr.meta.seed,
                                                       r.unit.index));
            for (const Segment& seg : plan) {
                js.seq_total += seg.cost;
                for (Tick c : seg.spawn)
                    js.spawn_costs.push_back(c);
            }
            jobs[{r.unit.task, r.unit.index}] = std::move(js);
            break;
        }
        case RecordKind::Spawn:
            if (auto it = jobs.find({r.unit.task, r.unit.index}); it != jobs.end())
                it->second.spawned++;
            break;
        case RecordKind::Exec:
            acc[key(r.unit)].exec += r.t1 - r.t0;
            break;
        case RecordKind::SeqDone:
            acc[key(r.unit)].milestone = true;
            break;
        case RecordKind::Completion:
            acc[key(r.unit)].milestone = true;
            if (r.unit.kind == 1)
                if (auto it = jobs.find({r.unit.task, r.unit.index}); it != jobs.end())
                    it->second.completed = true;
            break;
        default:
            break;
        }
    }

    for (const auto& [id, js] : jobs) {
        TraceUnit ju = TraceUnit::job(id.first, id.second);
        const UnitAcc& a = acc[key(ju)];
        std::string who = ju.str();
        if (a.exec > js.seq_total)
            note(res.violations, 0, who + " charged beyond its sequential plan");
        else if (a.milestone && a.exec != js.seq_total)
            note(res.violations, 0, who + " finished its sequential part short of plan");
        else if (!a.milestone && js.seq_total > 0 && a.exec == js.seq_total)
            note(res.violations, 0, who + " ran out its plan without a milestone record");
        if (js.spawned > (int)js.spawn_costs.size())
            note(res.violations, 0, who + " spawned more pjobs than its plan holds");
        if (js.completed && js.spawned != (int)js.spawn_costs.size())
            note(res.violations, 0, who + " completed without emitting all spawns");
        for (int sq = 0; sq < js.spawned; ++sq) {
            TraceUnit pu = TraceUnit::pjob(id.first, id.second, sq);
            const UnitAcc& pa = acc[key(pu)];
            Tick cost = sq < (int)js.spawn_costs.size() ? js.spawn_costs[sq] : 0;
            if (pa.exec > cost)
                note(res.violations, 0, pu.str() + " charged beyond its cost");
            else if (pa.milestone && pa.exec != cost)
                note(res.violations, 0, pu.str() + " completed short of its cost");
            else if (!pa.milestone && pa.exec == cost)
                note(res.violations, 0, pu.str() + " ran out its cost without completing");
            if (js.completed && !pa.milestone)
                note(res.violations, 0,
                     pu.str() + " unfinished although its job completed");
        }
    }
    for (const auto& [k, a] : acc) {
        if (std::get<0>(k) == 0)
            continue;
        if (!jobs.count({std::get<1>(k), std::get<2>(k)}) && a.exec > 0)
            note(res.violations, 0, "execution charged with no matching arrival");
    }
    return res;
}

std::vector<std::pair<std::string, CheckResult>> run_all_checks(const TaskSet& ts,
                                                                const Trace& tr) {
    std::vector<std::pair<std::string, CheckResult>> out;
    out.emplace_back("isolation", check_isolation(ts, tr));
    out.emplace_back("edf-deques", check_edf_and_deques(ts, tr));
    out.emplace_back("work-conservation", check_work_conservation(ts, tr));
    out.emplace_back("tick-conservation", check_tick_conservation(ts, tr));
    return out;
}

std::vector<TaskStats> per_task_stats(const TaskSet& ts, const Trace& tr) {
    std::map<int, TaskStats> by_task;
    for (const TaskSpec& t : ts.tasks)
        by_task[t.id].task = t.id;
    std::map<std::pair<int, int>, Tick> release;
    for (const TraceRecord& r : tr.records) {
        if (r.kind == RecordKind::Arrival && r.unit.kind == 1) {
            release[{r.unit.task, r.unit.index}] = r.t0;
            if (by_task.count(r.unit.task))
                by_task[r.unit.task].released++;
        } else if (r.kind == RecordKind::Completion && r.unit.kind == 1) {
            auto it = release.find({r.unit.task, r.unit.index});
            if (it == release.end() || !by_task.count(r.unit.task))
                continue;
            TaskStats& st = by_task[r.unit.task];
            Tick resp = r.t0 - it->second;
            st.completed++;
            st.avg_response += (double)resp;
            st.max_response = std::max(st.max_response, resp);
            if (r.t0 > r.eff_deadline) {
                st.misses++;
                st.max_tardiness = std::max(st.max_tardiness, r.t0 - r.eff_deadline);
            }
        }
    }
    std::vector<TaskStats> out;
    for (auto& [id, st] : by_task) {
        if (st.completed > 0)
            st.avg_response /= st.completed;
        out.push_back(st);
    }
    return out;
}

namespace {

Tick first_job_response(const Trace& tr, int task_id) {
    Tick rel = kNoTick, fin = kNoTick;
    for (const TraceRecord& r : tr.records) {
        if (r.unit.kind != 1 || r.unit.task != task_id || r.unit.index != 0)
            continue;
        if (r.kind == RecordKind::Arrival)
            rel = r.t0;
        else if (r.kind == RecordKind::Completion)
            fin = r.t0;
    }
    if (rel == kNoTick || fin == kNoTick)
        throw SpecError("task " + std::to_string(task_id) +
                        ": first job did not complete in the trace");
    return fin - rel;
}

} // namespace

Rational speedup(const Trace& parallel, const Trace& sequential, int task_id) {
    if (parallel.meta.taskset_hash != sequential.meta.taskset_hash)
        throw SpecError("speedup over traces of different task sets");
    return {first_job_response(sequential, task_id),
            first_job_response(parallel, task_id)};
}

bool gfb_sufficient(const TaskSet& ts, int m) {
    if (m < 1)
        throw SpecError("need at least one core");
    Rational sum(0), umax(0);
    for (const TaskSpec& t : ts.tasks) {
        Rational u = utilization(t.budget, t.period);
        sum = sum + u;
        if (umax < u)
            umax = u;
    }
    return sum <= Rational(m) - Rational(m - 1) * umax;
}

std::string metrics_json(const TaskSet& ts, const Trace& tr) {
    nlohmann::ordered_json doc;
    doc["format"] = "pcss-metrics";
    doc["version"] = 1;
    doc["cores"] = tr.meta.cores;
    doc["horizon"] = tr.meta.horizon;
    doc["seed"] = tr.meta.seed;
    doc["policy"] = tr.meta.policy;
    doc["steal"] = tr.meta.steal;
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx",
                  (unsigned long long)tr.meta.taskset_hash);
    doc["taskset"] = hex;
    doc["records"] = tr.records.size();

    Tick busy = 0;
    for (const TraceRecord& r : tr.records)
        if (r.kind == RecordKind::Exec)
            busy += r.t1 - r.t0;
    doc["busy_ticks"] = busy;
    doc["busy_fraction"] =
        (double)busy / ((double)tr.meta.cores * (double)tr.meta.horizon);

    doc["tasks"] = nlohmann::ordered_json::array();
    int released = 0, completed = 0, misses = 0;
    for (const TaskStats& st : per_task_stats(ts, tr)) {
        nlohmann::ordered_json jt;
        jt["id"] = st.task;
        jt["released"] = st.released;
        jt["completed"] = st.completed;
        jt["misses"] = st.misses;
        jt["max_tardiness"] = st.max_tardiness;
        jt["max_response"] = st.max_response;
        jt["avg_response"] = st.avg_response;
        doc["tasks"].push_back(std::move(jt));
        released += st.released;
        completed += st.completed;
        misses += st.misses;
    }
    doc["totals"] = {{"released", released}, {"completed", completed},
                     {"misses", misses}};
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Per-tick reference scheduler.

Trace oracle_cbs_uniproc(const TaskSet& ts, const SimConfig& cfg) {
    if (cfg.cores != 1)
        throw SpecError("reference scheduler is uniprocessor only");
    if (cfg.policy != Policy::Cbs)
        throw SpecError("reference scheduler models the cbs policy");
    if (cfg.horizon <= 0)
        throw SpecError("horizon must be positive");
    for (const TaskSpec& t : ts.tasks)
        for (const Segment& s : t.body.segments)
            if (!s.spawn.empty())
                throw SpecError("reference scheduler covers sequential bodies only");
    {
        auto errs = ts.validate();
        if (!errs.empty())
            throw SpecError("invalid task set: " + errs.front());
    }

    int n = (int)ts.tasks.size();
    struct OJob {
        int index = 0;
        Tick release = 0;
        Tick remaining = 0;
    };
    struct OSrv {
        Tick c = 0, d = 0;
        std::vector<Tick> arr;
        int next = 0;
        std::deque<OJob> fifo;
    };
    std::vector<OSrv> srv(n);
    for (int i = 0; i < n; ++i)
        srv[i].arr = arrivals(ts.tasks[i], cfg.horizon, cfg.seed);

    IntervalBuilder ib(1);
    std::vector<TraceRecord> points;
    auto point = [&](Tick t, int worker, RecordKind k, TraceUnit u, int server,
                     int skind, int ssrv, Tick eff) {
        points.push_back({t, t, worker, k, u, server, skind, ssrv, eff});
    };

    struct Bound {
        int si = -1;
        Tick eff = 0;
    };
    std::optional<Bound> bound;
    std::optional<Bound> parked;   // preemption to record after arrivals

    auto head_unit = [&](int si) {
        return TraceUnit::job(ts.tasks[si].id, srv[si].fifo.front().index);
    };

    for (Tick t = 0;; ++t) {
        bool fin = t >= cfg.horizon;
        parked.reset();
        // Settle what the last tick finished.
        if (bound) {
            OSrv& s = srv[bound->si];
            int tid = ts.tasks[bound->si].id;
            if (s.fifo.front().remaining == 0) {
                OJob done = s.fifo.front();
                point(t, 0, RecordKind::Completion, TraceUnit::job(tid, done.index),
                      tid, -1, -1, done.release + ts.tasks[bound->si].period);
                s.fifo.pop_front();
                if (s.fifo.empty())
                    point(t, -1, RecordKind::Deactivate, {}, tid, -1, -1, s.d);
                bound.reset();
            } else if (!fin && s.c == 0) {
                point(t, 0, RecordKind::Exhaust, head_unit(bound->si), tid,
                      (int)SourceKind::Own, tid, bound->eff);
                parked = bound;
                bound.reset();
            }
        }
        if (fin)
            break;
        // Replenishments for servers with pending work at their deadline.
        for (int i = 0; i < n; ++i) {
            OSrv& s = srv[i];
            if (s.fifo.empty() || s.d != t)
                continue;
            if (bound && bound->si == i) {
                parked = bound;
                bound.reset();
            }
            s.c = ts.tasks[i].budget;
            s.d += ts.tasks[i].period;
            point(t, -1, RecordKind::Replenish, {}, ts.tasks[i].id, -1, -1, s.d);
        }
        // Arrivals.
        for (int i = 0; i < n; ++i) {
            OSrv& s = srv[i];
            const TaskSpec& task = ts.tasks[i];
            while (s.next < (int)s.arr.size() && s.arr[s.next] == t) {
                OJob j;
                j.index = s.next;
                j.release = t;
                j.remaining = [&] {
                    Tick total = 0;
                    for (const Segment& seg :
                         truncate_plan(task.body, draw_actual_cost(task, cfg.seed, j.index)))
                        total += seg.cost;
                    return total;
                }();
                bool had = !s.fifo.empty();
                s.fifo.push_back(j);
                if (!had && s.c * task.period >= (s.d - t) * task.budget) {
                    s.d = t + task.period;
                    s.c = task.budget;
                }
                point(t, -1, RecordKind::Arrival, TraceUnit::job(task.id, j.index),
                      task.id, -1, -1, s.d);
                s.next++;
            }
        }
        // Schedule: earliest deadline (ties by server id), sticky with the
        // running unit unless beaten strictly.
        int best = -1;
        for (int i = 0; i < n; ++i)
            if (!srv[i].fifo.empty() && srv[i].c > 0 &&
                (best < 0 || srv[i].d < srv[best].d ||
                 (srv[i].d == srv[best].d && ts.tasks[i].id < ts.tasks[best].id)))
                best = i;
        if (bound && best >= 0 && srv[best].d < bound->eff) {
            parked = bound;   // strict preemption only
            bound.reset();
        }
        if (parked) {
            int tid = ts.tasks[parked->si].id;
            point(t, 0, RecordKind::Preempt, head_unit(parked->si), tid,
                  (int)SourceKind::Own, tid, parked->eff);
        }
        if (!bound && best >= 0) {
            bound = Bound{best, srv[best].d};
            int tid = ts.tasks[best].id;
            point(t, 0, RecordKind::Dispatch, head_unit(best), tid,
                  (int)SourceKind::Own, tid, bound->eff);
        }
        if (bound) {
            int tid = ts.tasks[bound->si].id;
            ib.set_state(0, t,
                         IntervalBuilder::RunningState{head_unit(bound->si), tid,
                                                       (int)SourceKind::Own, tid,
                                                       bound->eff});
            srv[bound->si].c--;
            srv[bound->si].fifo.front().remaining--;
        } else {
            ib.set_state(0, t, std::nullopt);
        }
    }
    ib.finish(cfg.horizon);

    Trace tr;
    tr.meta = {1, cfg.cores, cfg.horizon, cfg.seed, policy_name(cfg.policy),
               steal_name(cfg.steal), taskset_hash(ts)};
    std::vector<TraceRecord> recs = std::move(points);
    recs.insert(recs.end(), ib.records().begin(), ib.records().end());
    sort_records(recs);
    tr.records = std::move(recs);
    return tr;
}

} // namespace pcss
