#include "pcss/engine.hpp"

#include <algorithm>
#include <queue>
#include <tuple>

#include "pcss/server_pcss.hpp"
#include "pcss/workload.hpp"

namespace pcss {

const char* policy_name(Policy p) {
    switch (p) {
    case Policy::Cbs: return "cbs";
    case Policy::Css: return "css";
    default: return "pcss";
    }
}

const char* steal_name(StealMode m) {
    switch (m) {
    case StealMode::Off: return "off";
    case StealMode::QueueEmptyOnly: return "queue-empty-only";
    default: return "deadline-compare";
    }
}

std::optional<Policy> policy_from(std::string_view s) {
    if (s == "cbs") return Policy::Cbs;
    if (s == "css") return Policy::Css;
    if (s == "pcss") return Policy::Pcss;
    return std::nullopt;
}

std::optional<StealMode> steal_from(std::string_view s) {
    if (s == "off") return StealMode::Off;
    if (s == "queue-empty-only") return StealMode::QueueEmptyOnly;
    if (s == "deadline-compare" || s == "on") return StealMode::DeadlineCompare;
    return std::nullopt;
}

namespace {

RuleSet rules_for(Policy p) {
    switch (p) {
    case Policy::Cbs: return RuleSet::cbs();
    case Policy::Css: return {true, true, false};
    default: return RuleSet::full();
    }
}

// Heap entry; rank orders same-instant events: expiries invalidate residuals
// before replenishments move deadlines, and arrivals see the settled state.
struct Ev {
    Tick t = 0;
    int rank = 0;   // 0 expiry, 1 replenish, 2 arrival
    int sid = 0;    // server index (== task index)
    friend bool operator>(const Ev& a, const Ev& b) {
        return std::tie(a.t, a.rank, a.sid) > std::tie(b.t, b.rank, b.sid);
    }
};

// A unit pulled off its worker mid-instant; it goes back to its origin in
// the reschedule phase, where the move is recorded as a preemption.
struct Parked {
    UnitRef unit;
    int worker = -1;
    CapacitySource source;
};

class Sim {
public:
    Sim(const TaskSet& ts, const SimConfig& cfg)
        : ts_(ts), cfg_(cfg), rules_(rules_for(cfg.policy)),
          ctx_{servers_, jobs_, pjobs_, workers_, queue_, rules_, cfg.steal},
          ib_(cfg.cores) {}

    Trace run();

private:
    // --- identity helpers -------------------------------------------------
    int unit_server(UnitRef u) const {
        return u.kind == UnitRef::JobUnit ? jobs_[u.idx].server : pjobs_[u.idx].server;
    }
    TraceUnit tunit(UnitRef u) const {
        if (u.kind == UnitRef::JobUnit) {
            const JobId& id = jobs_[u.idx].id;
            return TraceUnit::job(id.task, id.index);
        }
        if (u.kind == UnitRef::PJobUnit) {
            const PJobId& id = pjobs_[u.idx].id;
            return TraceUnit::pjob(id.task, id.index, id.seq);
        }
        return {};
    }
    int task_id(int sidx) const { return sidx >= 0 ? servers_[sidx].id : -1; }
    Tick job_deadline(int ji) const {
        return jobs_[ji].release + servers_[jobs_[ji].server].period;
    }
    Tick source_available(const CapacitySource& src) const {
        const ServerState& s = servers_[src.server];
        return src.kind == SourceKind::Residual ? s.residual : s.capacity;
    }

    void point(Tick t, int worker, RecordKind k, UnitRef u, int sidx,
               int source_kind, int source_sidx, Tick eff) {
        points_.push_back({t, t, worker, k, tunit(u), task_id(sidx),
                           source_kind, task_id(source_sidx), eff});
    }
    void point_src(Tick t, int worker, RecordKind k, UnitRef u, int sidx,
                   const CapacitySource& src) {
        point(t, worker, k, u, sidx, (int)src.kind, src.server, src.effective_deadline);
    }

    [[noreturn]] void fail(const std::string& msg) {
        throw EngineError(msg + " (t=" + std::to_string(now_) + ")", make_trace(now_));
    }

    Trace make_trace(Tick end) {
        Trace tr;
        tr.meta = {1, cfg_.cores, cfg_.horizon, cfg_.seed, policy_name(cfg_.policy),
                   steal_name(cfg_.steal), taskset_hash(ts_)};
        IntervalBuilder b = ib_;
        b.finish(end);
        std::vector<TraceRecord> recs = points_;
        recs.insert(recs.end(), b.records().begin(), b.records().end());
        sort_records(recs);
        tr.records = std::move(recs);
        return tr;
    }

    // --- binding ----------------------------------------------------------
    void bind(int w, UnitRef u, const CapacitySource& src) {
        WorkerState& wk = workers_[w];
        wk.current = u;
        wk.source = src;
        ServerState& s = servers_[src.server];
        UnitRef& tok = src.kind == SourceKind::Residual ? s.residual_user : s.capacity_user;
        if (tok == u && src.kind == SourceKind::Residual)
            return;   // resuming a kept reclaim link
        if (tok.valid())
            fail("capacity token already held");
        tok = u;
    }

    void unbind(int w) {
        WorkerState& wk = workers_[w];
        ServerState& s = servers_[wk.source.server];
        UnitRef& tok =
            wk.source.kind == SourceKind::Residual ? s.residual_user : s.capacity_user;
        if (tok != wk.current)
            fail("capacity token out of sync");
        tok = {};
        wk.current = {};
        wk.source = {};
    }

    // Free a worker whose unit is losing the processor. A unit preempted
    // while reclaiming keeps its residual link (and the source token with
    // it): reclaiming ends with exhaustion or an invalidating event, not
    // with losing the processor. That hysteresis is what makes the dispatch
    // fixed point converge; without it two jobs can trade a late-deadline
    // residual back and forth forever.
    void release_binding(int w) {
        WorkerState& wk = workers_[w];
        if (wk.source.kind == SourceKind::Residual &&
            servers_[wk.source.server].residual > 0) {
            if (servers_[wk.source.server].residual_user != wk.current)
                fail("capacity token out of sync");
            wk.current = {};
            wk.source = {};
        } else {
            unbind(w);
        }
    }

    // Pull a unit off whatever worker runs it. No-op when it is not bound,
    // so overlapping invalidations at one instant stay harmless.
    void park(UnitRef u) {
        for (auto& wk : workers_) {
            if (wk.current == u) {
                parked_.push_back({u, wk.id, wk.source});
                release_binding(wk.id);
                return;
            }
        }
    }

    void disconnect_consumers(int sidx) {
        ServerState& s = servers_[sidx];
        if (s.capacity_user.valid()) park(s.capacity_user);
        if (s.residual_user.valid()) {
            park(s.residual_user);   // no-op when the link holder is parked
            s.residual_user = {};
        }
    }

    // A replenished server's units lose any kept reclaim links: their
    // eligibility was judged against the old deadline.
    void drop_links_of(int sidx) {
        for (auto& t : servers_)
            if (t.residual_user.valid() && unit_server(t.residual_user) == sidx)
                t.residual_user = {};
    }

    void disconnect_running_of(int sidx) {
        for (auto& wk : workers_)
            if (wk.busy() && unit_server(wk.current) == sidx)
                park(wk.current);
    }

    // --- milestones -------------------------------------------------------
    void handle_job_milestones(int w, bool fin) {
        WorkerState& wk = workers_[w];
        int ji = wk.current.idx;
        Job& j = jobs_[ji];
        while (!j.sequential_done() && j.ticks_to_milestone() == 0) {
            for (int pi : spawn_pjobs(ctx_, w, ji, now_))
                point(now_, w, RecordKind::Spawn, {UnitRef::PJobUnit, pi}, j.server,
                      -1, -1, kNoTick);
            j.seg++;
            j.seg_done = 0;
        }
        if (j.sequential_done()) {
            UnitRef u = wk.current;
            CapacitySource src = wk.source;
            unbind(w);
            if (j.pending_pjobs == 0)
                complete_job(ji, w);
            else
                point_src(now_, w, RecordKind::SeqDone, u, j.server, src);
        } else if (!fin && source_available(wk.source) <= 0) {
            point_src(now_, w, RecordKind::Exhaust, wk.current, j.server, wk.source);
            park(wk.current);
        }
    }

    void complete_job(int ji, int w) {
        Job& j = jobs_[ji];
        j.finish = now_;
        int sidx = j.server;
        ServerState& s = servers_[sidx];
        point(now_, w, RecordKind::Completion, {UnitRef::JobUnit, ji}, sidx, -1, -1,
              job_deadline(ji));
        if (s.fifo.empty() || s.fifo.front() != ji)
            fail("completed job is not the served one");
        s.fifo.pop_front();
        if (!s.fifo.empty()) {
            enqueue_job(ctx_, s.fifo.front());
            return;
        }
        Tick r = release_leftover(s, now_, rules_);
        if (r > 0) {
            point(now_, -1, RecordKind::Release, {}, sidx, -1, -1, s.deadline);
            heap_.push({s.deadline, 0, sidx});
        }
        s.active = false;
        point(now_, -1, RecordKind::Deactivate, {}, sidx, -1, -1, s.deadline);
    }

    void settle_worker(int w, bool fin) {
        WorkerState& wk = workers_[w];
        if (!wk.busy())
            return;
        if (wk.current.kind == UnitRef::JobUnit) {
            Job& j = jobs_[wk.current.idx];
            if (j.ticks_to_milestone() == 0) {
                handle_job_milestones(w, fin);
            } else if (!fin && source_available(wk.source) <= 0) {
                point_src(now_, w, RecordKind::Exhaust, wk.current, j.server, wk.source);
                park(wk.current);
            }
            return;
        }
        PJob& p = pjobs_[wk.current.idx];
        if (p.remaining == 0) {
            UnitRef u = wk.current;
            unbind(w);
            point(now_, w, RecordKind::Completion, u, p.server, -1, -1,
                  job_deadline(p.parent));
            Job& parent = jobs_[p.parent];
            parent.pending_pjobs--;
            if (parent.sequential_done() && parent.pending_pjobs == 0)
                complete_job(p.parent, w);
        } else if (!fin && source_available(wk.source) <= 0) {
            point_src(now_, w, RecordKind::Exhaust, wk.current, p.server, wk.source);
            park(wk.current);
        }
    }

    void settle(bool fin) {
        for (int w = 0; w < cfg_.cores; ++w)
            settle_worker(w, fin);
    }

    // --- events -----------------------------------------------------------
    void schedule_arrival(int tidx) {
        if (arr_cur_[tidx] < (int)arr_[tidx].size())
            heap_.push({arr_[tidx][arr_cur_[tidx]], 2, tidx});
    }

    void handle_expiry(const Ev& ev) {
        ServerState& s = servers_[ev.sid];
        if (s.residual <= 0)
            return;   // consumed before its deadline
        if (s.deadline != ev.t)
            fail("live residual outlived its source deadline");
        if (s.residual_user.valid())
            park(s.residual_user);
        s.residual_user = {};
        s.residual = 0;
        point(now_, -1, RecordKind::Expiry, {}, ev.sid, -1, -1, ev.t);
    }

    void handle_replenish(const Ev& ev) {
        ServerState& s = servers_[ev.sid];
        if (s.replenish_at != ev.t)
            return;   // superseded by a fresh pair
        if (s.active) {
            // The deadline moves, so every binding priced on it, plus anyone
            // consuming this server's capacity, must re-select.
            disconnect_consumers(ev.sid);
            disconnect_running_of(ev.sid);
            drop_links_of(ev.sid);
        } else if (!s.isolated && rules_.steal) {
            disconnect_consumers(ev.sid);   // thieves lose the old pair
        } else {
            // Idle isolated (or no stealing at all): the pair lapses and the
            // next arrival re-admits fresh.
            s.replenish_at = kNoTick;
            return;
        }
        replenish(s);
        point(now_, -1, RecordKind::Replenish, {}, ev.sid, -1, -1, s.deadline);
        heap_.push({s.replenish_at, 1, ev.sid});
    }

    void handle_arrival(const Ev& ev) {
        int tidx = ev.sid;
        const TaskSpec& task = ts_.tasks[tidx];
        ServerState& s = servers_[tidx];
        bool had = !s.fifo.empty();
        if (!had && s.capacity_user.valid())
            park(s.capacity_user);   // a waking donor invalidates its thief
        int ji = (int)jobs_.size();
        Job j;
        j.id = {task.id, arr_cur_[tidx]};
        j.server = tidx;
        j.arrival = j.release = now_;
        j.plan = truncate_plan(task.body, draw_actual_cost(task, cfg_.seed, arr_cur_[tidx]));
        j.total_cost = JobTemplate{j.plan}.total_cost();
        jobs_.push_back(std::move(j));
        s.fifo.push_back(ji);
        if (on_job_arrival(s, now_, had))
            heap_.push({s.replenish_at, 1, tidx});
        point(now_, -1, RecordKind::Arrival, {UnitRef::JobUnit, ji}, tidx, -1, -1,
              s.deadline);
        if (!had)
            enqueue_job(ctx_, ji);
        arr_cur_[tidx]++;
        schedule_arrival(tidx);
    }

    void drain_events() {
        while (!heap_.empty() && heap_.top().t <= now_) {
            Ev ev = heap_.top();
            heap_.pop();
            if (ev.t < now_)
                fail("event fired late");
            switch (ev.rank) {
            case 0: handle_expiry(ev); break;
            case 1: handle_replenish(ev); break;
            default: handle_arrival(ev); break;
            }
        }
    }

    // --- scheduling -------------------------------------------------------
    void return_to_origin(UnitRef u, int worker) {
        if (u.kind == UnitRef::JobUnit)
            enqueue_job(ctx_, u.idx);
        else
            workers_[worker].dq.push_back(u.idx);
    }

    void take_candidate(int w, const Candidate& c) {
        if (c.from == Candidate::From::Global) {
            remove_queued_job(ctx_, c.unit.idx);
        } else if (c.from == Candidate::From::Local) {
            if (workers_[w].dq.empty() || workers_[w].dq.back() != c.unit.idx)
                fail("local candidate not at own deque bottom");
            workers_[w].dq.pop_back();
        } else {
            auto& vdq = workers_[c.victim].dq;
            if (vdq.empty() || vdq.front() != c.unit.idx)
                fail("steal candidate not at victim deque top");
            vdq.pop_front();
        }
    }

    void start_candidate(int w, const Candidate& c) {
        bind(w, c.unit, c.source);
        point_src(now_, w,
                  c.from == Candidate::From::Steal ? RecordKind::Steal
                                                   : RecordKind::Dispatch,
                  c.unit, unit_server(c.unit), c.source);
        // A zero-cost head settles on the spot; that can free the worker and
        // even finish the job before any time passes.
        if (c.unit.kind == UnitRef::JobUnit &&
            jobs_[c.unit.idx].ticks_to_milestone() == 0)
            handle_job_milestones(w, false);
    }

    void assign(int w, const Candidate& c) {
        take_candidate(w, c);
        start_candidate(w, c);
    }

    void reschedule() {
        resort_queue(ctx_);
        for (const Parked& pk : parked_) {
            point_src(now_, pk.worker, RecordKind::Preempt, pk.unit,
                      unit_server(pk.unit), pk.source);
            ib_.interrupt(pk.worker, now_);
            return_to_origin(pk.unit, pk.worker);
        }
        parked_.clear();
        long rounds = 0;
        long cap = 64 + 4l * (long)(jobs_.size() + pjobs_.size()) * cfg_.cores;
        for (;;) {
            if (++rounds > cap)
                fail("reschedule did not reach a fixed point");
            bool assigned = false;
            for (int w = 0; w < cfg_.cores; ++w) {
                if (workers_[w].busy())
                    continue;
                if (auto cand = next_work(ctx_, w, now_)) {
                    assign(w, *cand);
                    assigned = true;
                }
            }
            if (assigned)
                continue;   // a dispatch can free a worker or uncover new work
            auto pr = find_preemption(ctx_, now_);
            if (!pr)
                break;
            // Directed handoff: the candidate that beat the victim takes its
            // worker. Pop the candidate before the victim returns (the
            // victim's own deque bottom may be exactly where the candidate
            // sits), but return the victim before the candidate starts, so
            // anything the start spawns lands above it.
            WorkerState& wk = workers_[pr->victim];
            point_src(now_, pr->victim, RecordKind::Preempt, wk.current,
                      unit_server(wk.current), wk.source);
            ib_.interrupt(pr->victim, now_);
            UnitRef u = wk.current;
            take_candidate(pr->victim, pr->cand);
            release_binding(pr->victim);
            return_to_origin(u, pr->victim);
            start_candidate(pr->victim, pr->cand);
        }
        for (int w = 0; w < cfg_.cores; ++w) {
            const WorkerState& wk = workers_[w];
            if (wk.busy())
                ib_.set_state(w, now_,
                              IntervalBuilder::RunningState{
                                  tunit(wk.current), task_id(unit_server(wk.current)),
                                  (int)wk.source.kind, task_id(wk.source.server),
                                  wk.source.effective_deadline});
            else
                ib_.set_state(w, now_, std::nullopt);
        }
    }

    // --- invariants -------------------------------------------------------
    void check_invariants() {
        for (int i = 0; i < (int)servers_.size(); ++i) {
            const ServerState& s = servers_[i];
            std::string who = " (server " + std::to_string(s.id) + ")";
            if (s.capacity < 0 || s.capacity > s.budget)
                fail("capacity outside [0, Q]" + who);
            if (s.residual < 0)
                fail("negative residual" + who);
            if (s.residual > 0 && s.capacity > 0)
                fail("residual and capacity both positive" + who);
            if (s.replenish_at == kNoTick) {
                if (s.active)
                    fail("active server without replenishment" + who);
            } else if (s.replenish_at != s.deadline) {
                fail("replenishment detached from deadline" + who);
            }
            if (s.capacity_user.valid()) {
                bool found = false;
                for (const auto& wk : workers_)
                    found |= wk.busy() && wk.current == s.capacity_user &&
                             wk.source.server == i &&
                             wk.source.kind != SourceKind::Residual;
                if (!found)
                    fail("capacity token held by a unit that is not running" + who);
            }
            if (s.residual_user.valid()) {
                // The link may belong to a parked unit; it then waits in the
                // queue or a deque and resumes on this residual.
                if (s.residual <= 0)
                    fail("reclaim link on an exhausted residual" + who);
                UnitRef tok = s.residual_user;
                bool placed = false;
                for (const auto& wk : workers_) {
                    if (wk.current == tok) {
                        if (wk.source.kind != SourceKind::Residual ||
                            wk.source.server != i)
                            fail("reclaim link holder bound elsewhere" + who);
                        placed = true;
                    }
                    for (int pi : wk.dq)
                        placed |= tok == UnitRef{UnitRef::PJobUnit, pi};
                }
                for (int ji : queue_)
                    placed |= tok == UnitRef{UnitRef::JobUnit, ji};
                if (!placed)
                    fail("reclaim link holder neither running nor waiting" + who);
            }
        }
        for (const auto& wk : workers_) {
            if (!wk.busy())
                continue;
            const ServerState& src = servers_[wk.source.server];
            UnitRef tok = wk.source.kind == SourceKind::Residual ? src.residual_user
                                                                 : src.capacity_user;
            if (tok != wk.current)
                fail("running unit does not hold its source token");
            Tick need = wk.current.kind == UnitRef::JobUnit
                            ? jobs_[wk.current.idx].ticks_to_milestone()
                            : pjobs_[wk.current.idx].remaining;
            if (need <= 0)
                fail("running unit has no work to a milestone");
            if (source_available(wk.source) <= 0)
                fail("running unit bound to an empty source");
        }
        if (!parked_.empty())
            fail("parked units survived rescheduling");
    }

    // --- time -------------------------------------------------------------
    Tick next_boundary() {
        Tick best = cfg_.horizon;
        if (!heap_.empty())
            best = std::min(best, heap_.top().t);
        for (const auto& wk : workers_) {
            if (!wk.busy())
                continue;
            Tick need = wk.current.kind == UnitRef::JobUnit
                            ? jobs_[wk.current.idx].ticks_to_milestone()
                            : pjobs_[wk.current.idx].remaining;
            Tick have = source_available(wk.source);
            best = std::min(best, now_ + std::min(need, have));
        }
        if (best <= now_)
            fail("no forward progress");
        return best;
    }

    void advance_to(Tick stop) {
        Tick delta = stop - now_;
        if (delta > 0) {
            for (auto& wk : workers_) {
                if (!wk.busy())
                    continue;
                charge(servers_[wk.source.server], wk.source.kind, delta);
                if (wk.current.kind == UnitRef::JobUnit) {
                    Job& j = jobs_[wk.current.idx];
                    j.seg_done += delta;
                    j.executed += delta;
                } else {
                    PJob& p = pjobs_[wk.current.idx];
                    p.remaining -= delta;
                    jobs_[p.parent].executed += delta;
                }
            }
        }
        now_ = stop;
    }

    // --- state ------------------------------------------------------------
    const TaskSet& ts_;
    SimConfig cfg_;
    RuleSet rules_;
    std::vector<ServerState> servers_;
    std::vector<Job> jobs_;
    std::vector<PJob> pjobs_;
    std::vector<WorkerState> workers_;
    std::vector<int> queue_;
    SchedContext ctx_;
    std::vector<std::vector<Tick>> arr_;
    std::vector<int> arr_cur_;
    std::priority_queue<Ev, std::vector<Ev>, std::greater<Ev>> heap_;
    IntervalBuilder ib_;
    std::vector<TraceRecord> points_;
    std::vector<Parked> parked_;
    Tick now_ = 0;
};

Trace Sim::run() {
    servers_.resize(ts_.tasks.size());
    for (int i = 0; i < (int)ts_.tasks.size(); ++i) {
        const TaskSpec& t = ts_.tasks[i];
        ServerState& s = servers_[i];
        s.id = t.id;
        s.budget = t.budget;
        s.period = t.period;
        s.isolated = t.isolated;
        s.replenish_at = kNoTick;
        if (!t.isolated && rules_.steal) {
            // Donor capacity lives on the replenishment grid while the server
            // idles, otherwise there would never be anything to steal.
            s.capacity = t.budget;
            s.deadline = t.period;
            s.replenish_at = t.period;
            heap_.push({s.replenish_at, 1, i});
        }
    }
    workers_.resize(cfg_.cores);
    for (int w = 0; w < cfg_.cores; ++w)
        workers_[w].id = w;
    arr_.resize(ts_.tasks.size());
    arr_cur_.assign(ts_.tasks.size(), 0);
    for (int i = 0; i < (int)ts_.tasks.size(); ++i) {
        arr_[i] = arrivals(ts_.tasks[i], cfg_.horizon, cfg_.seed);
        schedule_arrival(i);
    }

    try {
        for (;;) {
            drain_events();
            reschedule();
            check_invariants();
            Tick nxt = next_boundary();
            bool fin = nxt >= cfg_.horizon;
            advance_to(fin ? cfg_.horizon : nxt);
            settle(fin);
            if (fin)
                break;
        }
    } catch (const SpecError& e) {
        fail(std::string("internal: ") + e.what());
    }
    ib_.finish(cfg_.horizon);

    Trace tr;
    tr.meta = {1, cfg_.cores, cfg_.horizon, cfg_.seed, policy_name(cfg_.policy),
               steal_name(cfg_.steal), taskset_hash(ts_)};
    std::vector<TraceRecord> recs = std::move(points_);
    recs.insert(recs.end(), ib_.records().begin(), ib_.records().end());
    sort_records(recs);
    tr.records = std::move(recs);
    return tr;
}

} // namespace

Trace run(const TaskSet& ts, const SimConfig& cfg) {
    if (cfg.horizon <= 0)
        throw SpecError("horizon must be positive");
    if (cfg.cores < 1)
        throw SpecError("need at least one core");
    if (cfg.policy != Policy::Pcss && cfg.cores != 1)
        throw SpecError("cbs and css are uniprocessor policies");
    auto errs = ts.validate();
    if (!errs.empty()) {
        std::string msg = "invalid task set:";
        for (const auto& e : errs)
            msg += " " + e + ";";
        throw SpecError(msg);
    }
    return Sim(ts, cfg).run();
}

} // namespace pcss
