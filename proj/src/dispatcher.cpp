#include "pcss/dispatcher.hpp"

#include <algorithm>
#include <tuple>

namespace pcss {

namespace {

std::tuple<Tick, int, int> queue_key(const SchedContext& ctx, int job_idx) {
    const Job& j = ctx.jobs[job_idx];
    const ServerState& s = ctx.servers[j.server];
    return {s.deadline, s.id, j.id.index};
}

} // namespace

void enqueue_job(SchedContext& ctx, int job_idx) {
    for (int q : ctx.queue)
        if (q == job_idx)
            throw SpecError("job already queued");
    auto key = queue_key(ctx, job_idx);
    auto it = std::lower_bound(ctx.queue.begin(), ctx.queue.end(), key,
                               [&ctx](int a, const auto& k) { return queue_key(ctx, a) < k; });
    ctx.queue.insert(it, job_idx);
}

void remove_queued_job(SchedContext& ctx, int job_idx) {
    auto it = std::find(ctx.queue.begin(), ctx.queue.end(), job_idx);
    if (it == ctx.queue.end())
        throw SpecError("job not queued");
    ctx.queue.erase(it);
}

void resort_queue(SchedContext& ctx) {
    std::stable_sort(ctx.queue.begin(), ctx.queue.end(),
                     [&ctx](int a, int b) { return queue_key(ctx, a) < queue_key(ctx, b); });
}

// A preempted reclaimer keeps its residual link (the source token stays
// with the unit); it resumes on that source rather than re-selecting.
std::optional<CapacitySource> kept_link(const SchedContext& ctx, UnitRef u) {
    for (int i = 0; i < (int)ctx.servers.size(); ++i)
        if (ctx.servers[i].residual_user == u)
            return CapacitySource{SourceKind::Residual, i, ctx.servers[i].deadline};
    return std::nullopt;
}

std::optional<Candidate> next_work(const SchedContext& ctx, int worker, Tick t) {
    const WorkerState& w = ctx.workers[worker];
    std::optional<Candidate> best;
    auto source_for = [&](UnitRef u, int server) {
        if (auto link = kept_link(ctx, u))
            return std::optional<CapacitySource>(link);
        return select_capacity_source(server, t, ctx.servers, ctx.rules);
    };
    auto rank = [](Candidate::From f) {
        return f == Candidate::From::Local ? 0 : f == Candidate::From::Global ? 1 : 2;
    };
    auto consider = [&](const Candidate& c) {
        if (!best ||
            c.source.effective_deadline < best->source.effective_deadline ||
            (c.source.effective_deadline == best->source.effective_deadline &&
             rank(c.from) < rank(best->from)))
            best = c;
    };

    if (!w.dq.empty()) {
        int pi = w.dq.back();
        const PJob& p = ctx.pjobs[pi];
        if (auto src = source_for({UnitRef::PJobUnit, pi}, p.server))
            consider({Candidate::From::Local, {UnitRef::PJobUnit, pi}, *src, -1});
    }

    bool global_eligible = false;
    {
        std::optional<Candidate> bg;
        for (int ji : ctx.queue) {
            const Job& j = ctx.jobs[ji];
            auto src = source_for({UnitRef::JobUnit, ji}, j.server);
            if (!src) continue;
            global_eligible = true;
            // Effective deadlines need not follow queue order (residual
            // sources carry the donor deadline), so scan the whole queue.
            if (!bg || src->effective_deadline < bg->source.effective_deadline)
                bg = Candidate{Candidate::From::Global, {UnitRef::JobUnit, ji}, *src, -1};
        }
        if (bg) consider(*bg);
    }

    bool try_steal = ctx.steal == StealMode::DeadlineCompare ||
                     (ctx.steal == StealMode::QueueEmptyOnly && !global_eligible);
    if (try_steal) {
        for (int v = 0; v < (int)ctx.workers.size(); ++v) {
            if (v == worker || ctx.workers[v].dq.empty()) continue;
            int pi = ctx.workers[v].dq.front();
            const PJob& p = ctx.pjobs[pi];
            auto src = source_for({UnitRef::PJobUnit, pi}, p.server);
            if (!src) continue;
            Candidate c{Candidate::From::Steal, {UnitRef::PJobUnit, pi}, *src, v};
            // Earliest deadline across tops; scan order breaks ties by victim id.
            if (!best || c.source.effective_deadline < best->source.effective_deadline)
                best = c;
        }
    }

    return best;
}

std::optional<Preemption> find_preemption(const SchedContext& ctx, Tick t) {
    std::optional<Preemption> out;
    Tick victim_d = 0;
    int victim_sid = 0;
    for (int wi = 0; wi < (int)ctx.workers.size(); ++wi) {
        const WorkerState& w = ctx.workers[wi];
        if (!w.busy()) continue;
        auto cand = next_work(ctx, wi, t);
        if (!cand || cand->source.effective_deadline >= w.source.effective_deadline)
            continue;
        Tick d = w.source.effective_deadline;
        int sid = w.current.kind == UnitRef::JobUnit
                      ? ctx.servers[ctx.jobs[w.current.idx].server].id
                      : ctx.servers[ctx.pjobs[w.current.idx].server].id;
        if (!out || d > victim_d || (d == victim_d && sid > victim_sid)) {
            out = Preemption{wi, *cand};
            victim_d = d;
            victim_sid = sid;
        }
    }
    return out;
}

std::vector<int> spawn_pjobs(SchedContext& ctx, int worker, int job_idx, Tick t) {
    Job& j = ctx.jobs[job_idx];
    const Segment& seg = j.plan[j.seg];
    std::vector<int> out;
    for (Tick cost : seg.spawn) {
        PJob p;
        p.id = {j.id.task, j.id.index, j.spawned++};
        p.server = j.server;
        p.parent = job_idx;
        p.cost = cost;
        p.remaining = cost;
        p.spawn_time = t;
        int pi = (int)ctx.pjobs.size();
        ctx.pjobs.push_back(p);
        ctx.workers[worker].dq.push_back(pi);   // bottom
        j.pending_pjobs++;
        out.push_back(pi);
    }
    return out;
}

} // namespace pcss
