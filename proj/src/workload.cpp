#include "pcss/workload.hpp"

#include <algorithm>
#include <json.hpp>

namespace pcss {

std::string LoadError::join(const std::vector<std::string>& v) {
    std::string out = "task set rejected:";
    for (const auto& s : v)
        out += "\n  - " + s;
    return out;
}

namespace rng {

std::uint64_t splitmix(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t s = a;
    std::uint64_t x = splitmix(s);
    s ^= b * 0xFF51AFD7ED558CCDull;
    x ^= splitmix(s);
    s ^= c * 0xC4CEB9FE1A85EC53ull;
    x ^= splitmix(s);
    return x;
}

std::uint64_t bounded(std::uint64_t& state, std::uint64_t n) {
    if (n == 0)
        throw SpecError("bounded draw over empty range");
    return splitmix(state) % n;
}

} // namespace rng

namespace {

using nlohmann::ordered_json;

Tick effective_gap(const TaskSpec& t) {
    return t.arrival.min_gap > 0 ? t.arrival.min_gap : t.period;
}

constexpr std::uint64_t kArrivalSalt = 0x41525256ull;   // distinct draw streams
constexpr std::uint64_t kCostSalt = 0x434F5354ull;
constexpr std::uint64_t kGenSalt = 0x47454E00ull;

} // namespace

std::vector<Tick> arrivals(const TaskSpec& t, Tick horizon, std::uint64_t seed) {
    std::vector<Tick> out;
    Tick gap = effective_gap(t);
    if (t.arrival.kind == ArrivalKind::Periodic) {
        for (Tick at = 0; at < horizon; at += gap)
            out.push_back(at);
        return out;
    }
    std::uint64_t st = rng::mix(seed, (std::uint64_t)t.id, kArrivalSalt);
    Tick at = (Tick)rng::bounded(st, (std::uint64_t)gap);
    while (at < horizon) {
        out.push_back(at);
        at += gap + (Tick)rng::bounded(st, (std::uint64_t)gap + 1);
    }
    return out;
}

Tick draw_actual_cost(const TaskSpec& t, std::uint64_t seed, int index) {
    Tick total = t.body.total_cost();
    int lo = t.exec_pct[0], hi = t.exec_pct[1];
    int pct = lo;
    if (hi > lo) {
        std::uint64_t st =
            rng::mix(seed, (std::uint64_t)t.id, kCostSalt ^ (std::uint64_t)index);
        pct = lo + (int)rng::bounded(st, (std::uint64_t)(hi - lo + 1));
    }
    return std::max<Tick>(1, total * pct / 100);
}

std::vector<Segment> truncate_plan(const JobTemplate& body, Tick actual) {
    std::vector<Segment> out;
    Tick left = actual;
    for (const Segment& s : body.segments) {
        if (left == 0)
            break;
        Segment ns;
        ns.cost = std::min(s.cost, left);
        left -= ns.cost;
        bool cut = ns.cost < s.cost;
        if (!cut) {
            for (Tick c : s.spawn) {
                if (left == 0)
                    break;
                Tick keep = std::min(c, left);
                left -= keep;
                ns.spawn.push_back(keep);
            }
        }
        out.push_back(std::move(ns));
        if (cut)
            break;
    }
    return out;
}

TaskSet load_spec(const std::string& text) {
    std::vector<std::string> issues;
    ordered_json doc = ordered_json::parse(text, nullptr, false);
    if (doc.is_discarded())
        throw LoadError({"not valid JSON"});
    if (doc.value("format", "") != "pcss-taskset")
        issues.push_back("format must be \"pcss-taskset\"");
    if (doc.value("version", 0) != 1)
        issues.push_back("unsupported version (expected 1)");
    TaskSet ts;
    if (!doc.contains("tasks") || !doc["tasks"].is_array()) {
        issues.push_back("missing tasks array");
    } else {
        int n = 0;
        for (const auto& jt : doc["tasks"]) {
            std::string at = "tasks[" + std::to_string(n++) + "]: ";
            if (!jt.is_object()) {
                issues.push_back(at + "not an object");
                continue;
            }
            TaskSpec t;
            try {
                t.id = jt.at("id").get<int>();
                t.budget = jt.at("Q").get<Tick>();
                t.period = jt.at("T").get<Tick>();
                t.isolated = jt.value("isolated", true);
                if (jt.contains("arrival")) {
                    const auto& ja = jt.at("arrival");
                    std::string kind = ja.value("kind", "periodic");
                    if (kind == "periodic")
                        t.arrival.kind = ArrivalKind::Periodic;
                    else if (kind == "sporadic")
                        t.arrival.kind = ArrivalKind::Sporadic;
                    else
                        issues.push_back(at + "unknown arrival kind \"" + kind + "\"");
                    t.arrival.min_gap = ja.value("min_gap", (Tick)0);
                }
                if (!jt.contains("segments") || !jt.at("segments").is_array()) {
                    issues.push_back(at + "missing segments array");
                } else {
                    for (const auto& js : jt.at("segments")) {
                        Segment seg;
                        seg.cost = js.at("cost").get<Tick>();
                        if (js.contains("spawn"))
                            seg.spawn = js.at("spawn").get<std::vector<Tick>>();
                        t.body.segments.push_back(std::move(seg));
                    }
                }
                if (jt.contains("exec_pct")) {
                    auto v = jt.at("exec_pct").get<std::vector<int>>();
                    if (v.size() != 2)
                        issues.push_back(at + "exec_pct must be [lo, hi]");
                    else
                        t.exec_pct = {v[0], v[1]};
                }
            } catch (const ordered_json::exception& e) {
                issues.push_back(at + e.what());
            }
            ts.tasks.push_back(std::move(t));
        }
    }
    for (auto& v : ts.validate())
        issues.push_back(std::move(v));
    if (!issues.empty())
        throw LoadError(std::move(issues));
    return ts;
}

std::string save_spec(const TaskSet& ts) {
    ordered_json doc;
    doc["format"] = "pcss-taskset";
    doc["version"] = 1;
    doc["tasks"] = ordered_json::array();
    for (const TaskSpec& t : ts.tasks) {
        ordered_json jt;
        jt["id"] = t.id;
        jt["Q"] = t.budget;
        jt["T"] = t.period;
        jt["isolated"] = t.isolated;
        jt["arrival"] = {
            {"kind", t.arrival.kind == ArrivalKind::Periodic ? "periodic" : "sporadic"},
            {"min_gap", t.arrival.min_gap}};
        jt["segments"] = ordered_json::array();
        for (const Segment& s : t.body.segments) {
            ordered_json js;
            js["cost"] = s.cost;
            js["spawn"] = s.spawn;
            jt["segments"].push_back(std::move(js));
        }
        jt["exec_pct"] = {t.exec_pct[0], t.exec_pct[1]};
        doc["tasks"].push_back(std::move(jt));
    }
    return doc.dump(2) + "\n";
}

// Utilizations are dealt in 1/840 quanta (840 = lcm of 1..8 denominators),
// and each period is a multiple of the reduced denominator, so Q = U * T is
// exact and the set's utilizations sum to total_u with no drift.
TaskSet generate(const GenParams& p) {
    constexpr Tick kGrid = 840;
    if (p.n_tasks < 1)
        throw LoadError({"n_tasks must be at least 1"});
    Rational quanta = p.total_u * Rational(kGrid);
    if (quanta.den() != 1)
        throw LoadError({"total_u must be a multiple of 1/840"});
    Tick N = quanta.num();
    if (N < p.n_tasks)
        throw LoadError({"total_u too small: needs at least n/840"});
    if (N > kGrid * p.n_tasks)
        throw LoadError({"total_u too large: capped at 1 per task"});
    if (p.parallelism[0] < 0 || p.parallelism[1] < p.parallelism[0])
        throw LoadError({"bad parallelism range"});
    if (p.period[0] < 1 || p.period[1] < p.period[0])
        throw LoadError({"bad period range"});
    if (p.exec_pct[0] < 1 || p.exec_pct[1] > 100 || p.exec_pct[1] < p.exec_pct[0])
        throw LoadError({"bad exec_pct range"});

    std::uint64_t st = rng::mix(p.seed, kGenSalt, (std::uint64_t)p.n_tasks);
    TaskSet ts;
    Tick left = N;
    for (int i = 0; i < p.n_tasks; ++i) {
        int slots = p.n_tasks - i;
        Tick lo = std::max<Tick>(1, left - kGrid * (slots - 1));
        Tick hi = std::min<Tick>(kGrid, left - (slots - 1));
        Tick k = lo + (Tick)rng::bounded(st, (std::uint64_t)(hi - lo + 1));
        left -= k;
        Rational u(k, kGrid);
        Tick q = u.den();
        Tick mlo = std::max<Tick>(1, (p.period[0] + q - 1) / q);
        Tick mhi = std::max(mlo, p.period[1] / q);
        Tick m = mlo + (Tick)rng::bounded(st, (std::uint64_t)(mhi - mlo + 1));

        TaskSpec t;
        t.id = i;
        t.period = m * q;
        t.budget = u.num() * m;   // = u * period, exactly
        t.isolated = (int)rng::bounded(st, 100) >= p.non_isolated_pct;
        t.arrival.kind = (int)rng::bounded(st, 100) < p.sporadic_pct
                             ? ArrivalKind::Sporadic
                             : ArrivalKind::Periodic;
        t.arrival.min_gap = t.period;

        if (p.full_budget) {
            t.body.segments = {{t.budget, {}}};
            t.exec_pct = {100, 100};
        } else {
            t.exec_pct = p.exec_pct;
            Tick total = t.budget;
            int np = p.parallelism[0] +
                     (int)rng::bounded(
                         st, (std::uint64_t)(p.parallelism[1] - p.parallelism[0] + 1));
            np = std::min<int>(np, (int)total);
            if (np == 0) {
                t.body.segments = {{total, {}}};
            } else {
                Tick head = (Tick)rng::bounded(st, (std::uint64_t)(total - np + 1));
                Tick rest = total - head;
                std::vector<Tick> spawn;
                for (int j = 0; j < np; ++j) {
                    int sl = np - j;
                    Tick c = sl == 1
                                 ? rest
                                 : 1 + (Tick)rng::bounded(
                                           st, (std::uint64_t)(rest - (sl - 1)));
                    spawn.push_back(c);
                    rest -= c;
                }
                Tick tail = head > 0 ? (Tick)rng::bounded(st, (std::uint64_t)head + 1) : 0;
                Segment first{head - tail, std::move(spawn)};
                t.body.segments = {std::move(first)};
                if (tail > 0)
                    t.body.segments.push_back({tail, {}});
            }
        }
        ts.tasks.push_back(std::move(t));
    }
    auto errs = ts.validate();
    if (!errs.empty())
        throw LoadError(std::move(errs));
    return ts;
}

} // namespace pcss
