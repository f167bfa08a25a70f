#include "pcss/model.hpp"

#include <charconv>
#include <set>

namespace pcss {

Rational Rational::parse(std::string_view s) {
    auto parse_int = [](std::string_view v) -> std::int64_t {
        std::int64_t out = 0;
        const char* first = v.data();
        const char* last = v.data() + v.size();
        auto [ptr, ec] = std::from_chars(first, last, out);
        if (ec != std::errc{} || ptr != last)
            throw SpecError("bad rational literal: " + std::string(v));
        return out;
    };
    auto slash = s.find('/');
    if (slash == std::string_view::npos)
        return Rational(parse_int(s));
    return Rational(parse_int(s.substr(0, slash)), parse_int(s.substr(slash + 1)));
}

Tick JobTemplate::sequential_cost() const {
    Tick sum = 0;
    for (const auto& seg : segments) sum += seg.cost;
    return sum;
}

Tick JobTemplate::total_cost() const {
    Tick sum = 0;
    for (const auto& seg : segments) {
        sum += seg.cost;
        for (Tick c : seg.spawn) sum += c;
    }
    return sum;
}

Rational utilization(Tick budget, Tick period) {
    if (period <= 0 || budget <= 0 || budget > period)
        throw SpecError("server parameters must satisfy 0 < Q <= T");
    return Rational(budget, period);
}

std::vector<std::string> TaskSet::validate() const {
    std::vector<std::string> errs;
    std::set<int> ids;
    for (const auto& t : tasks) {
        std::string at = "task " + std::to_string(t.id) + ": ";
        if (!ids.insert(t.id).second)
            errs.push_back(at + "duplicate id");
        if (t.period <= 0)
            errs.push_back(at + "period must be positive");
        if (t.budget <= 0 || t.budget > t.period)
            errs.push_back(at + "budget must satisfy 0 < Q <= T");
        if (t.arrival.min_gap < 0)
            errs.push_back(at + "min_gap must be nonnegative");
        if (t.body.segments.empty())
            errs.push_back(at + "needs at least one segment");
        for (const auto& seg : t.body.segments) {
            if (seg.cost < 0)
                errs.push_back(at + "segment cost must be nonnegative");
            for (Tick c : seg.spawn)
                if (c <= 0)
                    errs.push_back(at + "pjob cost must be positive");
        }
        if (t.body.total_cost() <= 0)
            errs.push_back(at + "template total cost must be positive");
        if (t.exec_pct[0] < 1 || t.exec_pct[0] > t.exec_pct[1] || t.exec_pct[1] > 100)
            errs.push_back(at + "exec_pct must satisfy 1 <= lo <= hi <= 100");
    }
    return errs;
}

const TaskSpec* TaskSet::find(int id) const {
    for (const auto& t : tasks)
        if (t.id == id) return &t;
    return nullptr;
}

bool has_pending_work(const ServerState& s, std::span<const Job> jobs, Tick t) {
    for (int ji : s.fifo) {
        const Job& j = jobs[ji];
        if (j.release <= t && !j.done())
            return true;
    }
    return false;
}

bool cbs_fresh_pair_ok(const ServerState& s, Tick t) {
    // c >= (d - t) * Q / T without division: c*T >= (d - t)*Q
    return s.capacity * s.period >= (s.deadline - t) * s.budget;
}

std::string unit_str(const UnitRef& u, std::span<const Job> jobs, std::span<const PJob> pjobs) {
    switch (u.kind) {
    case UnitRef::JobUnit: {
        const Job& j = jobs[u.idx];
        return "J" + std::to_string(j.id.task) + "." + std::to_string(j.id.index);
    }
    case UnitRef::PJobUnit: {
        const PJob& p = pjobs[u.idx];
        return "P" + std::to_string(p.id.task) + "." + std::to_string(p.id.index) +
               "." + std::to_string(p.id.seq);
    }
    default:
        return "-";
    }
}

} // namespace pcss
