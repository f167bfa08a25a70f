#include "pcss/trace.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace pcss {

namespace {

const char* kKindNames[] = {
    "ARRIVAL", "DISPATCH", "STEAL", "PREEMPT", "EXEC", "IDLE", "SPAWN",
    "SEQ_DONE", "COMPLETION", "RELEASE", "EXHAUST", "REPLENISH", "EXPIRY",
    "DEACTIVATE",
};

const char* kSourceNames[] = {"own", "residual", "stolen"};

std::int64_t parse_i64(std::string_view v) {
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw SpecError("bad integer field: " + std::string(v));
    return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    size_t pos = 0;
    while (true) {
        size_t next = s.find(sep, pos);
        if (next == std::string_view::npos) {
            out.push_back(s.substr(pos));
            break;
        }
        out.push_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
    return out;
}

} // namespace

const char* record_kind_name(RecordKind k) { return kKindNames[(int)k]; }

std::optional<RecordKind> record_kind_from(std::string_view name) {
    for (int i = 0; i < (int)std::size(kKindNames); ++i)
        if (name == kKindNames[i]) return (RecordKind)i;
    return std::nullopt;
}

std::string TraceUnit::str() const {
    switch (kind) {
    case 1: return "J" + std::to_string(task) + "." + std::to_string(index);
    case 2:
        return "P" + std::to_string(task) + "." + std::to_string(index) + "." +
               std::to_string(seq);
    default: return "-";
    }
}

TraceUnit TraceUnit::parse(std::string_view s) {
    if (s == "-") return {};
    if (s.empty() || (s[0] != 'J' && s[0] != 'P'))
        throw SpecError("bad unit field: " + std::string(s));
    auto parts = split(s.substr(1), '.');
    TraceUnit u;
    if (s[0] == 'J') {
        if (parts.size() != 2) throw SpecError("bad job unit: " + std::string(s));
        u.kind = 1;
        u.task = (int)parse_i64(parts[0]);
        u.index = (int)parse_i64(parts[1]);
    } else {
        if (parts.size() != 3) throw SpecError("bad pjob unit: " + std::string(s));
        u.kind = 2;
        u.task = (int)parse_i64(parts[0]);
        u.index = (int)parse_i64(parts[1]);
        u.seq = (int)parse_i64(parts[2]);
    }
    return u;
}

std::string trace_to_csv(const Trace& t) {
    std::ostringstream os;
    os << "pcss-trace v" << t.meta.version << " cores=" << t.meta.cores
       << " horizon=" << t.meta.horizon << " seed=" << t.meta.seed
       << " policy=" << t.meta.policy << " steal=" << t.meta.steal
       << " taskset=" << std::hex << t.meta.taskset_hash << std::dec << "\n";
    os << "t_start,t_end,worker,kind,unit,server,source_kind,source_server,eff_deadline\n";
    for (const auto& r : t.records) {
        os << r.t0 << ',' << r.t1 << ',' << r.worker << ','
           << kKindNames[(int)r.kind] << ',' << r.unit.str() << ',' << r.server
           << ',' << (r.source_kind < 0 ? "-" : kSourceNames[r.source_kind])
           << ',' << r.source_server << ',' << r.eff_deadline << "\n";
    }
    return os.str();
}

Trace trace_from_csv(std::string_view text) {
    Trace t;
    auto lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.size() < 2 || lines[0].substr(0, 10) != "pcss-trace")
        throw SpecError("not a pcss trace");
    for (auto field : split(lines[0], ' ')) {
        auto eq = field.find('=');
        if (eq == std::string_view::npos) {
            if (field.size() > 1 && field[0] == 'v')
                t.meta.version = (int)parse_i64(field.substr(1));
            continue;
        }
        auto key = field.substr(0, eq);
        auto val = field.substr(eq + 1);
        if (key == "cores") t.meta.cores = (int)parse_i64(val);
        else if (key == "horizon") t.meta.horizon = parse_i64(val);
        else if (key == "seed") t.meta.seed = (std::uint64_t)parse_i64(val);
        else if (key == "policy") t.meta.policy = std::string(val);
        else if (key == "steal") t.meta.steal = std::string(val);
        else if (key == "taskset")
            t.meta.taskset_hash = std::stoull(std::string(val), nullptr, 16);
    }
    for (size_t i = 2; i < lines.size(); ++i) {
        auto cols = split(lines[i], ',');
        if (cols.size() != 9)
            throw SpecError("trace line " + std::to_string(i + 1) + ": want 9 columns");
        TraceRecord r;
        r.t0 = parse_i64(cols[0]);
        r.t1 = parse_i64(cols[1]);
        r.worker = (int)parse_i64(cols[2]);
        auto k = record_kind_from(cols[3]);
        if (!k) throw SpecError("unknown record kind: " + std::string(cols[3]));
        r.kind = *k;
        r.unit = TraceUnit::parse(cols[4]);
        r.server = (int)parse_i64(cols[5]);
        if (cols[6] == "-") {
            r.source_kind = -1;
        } else {
            r.source_kind = -2;
            for (int s = 0; s < 3; ++s)
                if (cols[6] == kSourceNames[s]) r.source_kind = s;
            if (r.source_kind == -2)
                throw SpecError("unknown source kind: " + std::string(cols[6]));
        }
        r.source_server = (int)parse_i64(cols[7]);
        r.eff_deadline = parse_i64(cols[8]);
        t.records.push_back(r);
    }
    return t;
}

std::uint64_t taskset_hash(const TaskSet& ts) {
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](std::int64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (std::uint64_t)(v >> (8 * i)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    mix((std::int64_t)ts.tasks.size());
    for (const auto& t : ts.tasks) {
        mix(t.id);
        mix(t.budget);
        mix(t.period);
        mix(t.isolated ? 1 : 0);
        mix((int)t.arrival.kind);
        mix(t.arrival.min_gap);
        mix(t.exec_pct[0]);
        mix(t.exec_pct[1]);
        mix((std::int64_t)t.body.segments.size());
        for (const auto& seg : t.body.segments) {
            mix(seg.cost);
            mix((std::int64_t)seg.spawn.size());
            for (Tick c : seg.spawn) mix(c);
        }
    }
    return h;
}

IntervalBuilder::IntervalBuilder(int workers) : open_(workers) {}

void IntervalBuilder::flush(int w, Tick t) {
    Open& o = open_[w];
    if (!o.any || o.since == t) return;
    TraceRecord r;
    r.t0 = o.since;
    r.t1 = t;
    r.worker = w;
    if (o.idle) {
        r.kind = RecordKind::Idle;
    } else {
        r.kind = RecordKind::Exec;
        r.unit = o.rs.unit;
        r.server = o.rs.server;
        r.source_kind = o.rs.source_kind;
        r.source_server = o.rs.source_server;
        r.eff_deadline = o.rs.eff_deadline;
    }
    records_.push_back(r);
}

void IntervalBuilder::set_state(int w, Tick t, const std::optional<RunningState>& rs) {
    Open& o = open_[w];
    bool same = o.any && ((rs && !o.idle && o.rs == *rs) || (!rs && o.idle));
    if (same) return;
    flush(w, t);
    o.any = true;
    o.since = t;
    o.idle = !rs.has_value();
    if (rs) o.rs = *rs;
}

void IntervalBuilder::interrupt(int w, Tick t) {
    Open& o = open_[w];
    if (!o.any || o.since == t) return;
    flush(w, t);
    o.since = t;
}

void IntervalBuilder::finish(Tick end) {
    for (int w = 0; w < (int)open_.size(); ++w) {
        flush(w, end);
        open_[w].any = false;
    }
}

void sort_records(std::vector<TraceRecord>& recs) {
    std::stable_sort(recs.begin(), recs.end(),
                     [](const TraceRecord& a, const TraceRecord& b) { return a.t0 < b.t0; });
}

} // namespace pcss
