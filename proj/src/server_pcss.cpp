#include "pcss/server_pcss.hpp"

namespace pcss {

bool on_job_arrival(ServerState& s, Tick t, bool had_pending) {
    s.active = true;
    if (had_pending)
        return false;   // queues behind the served job, no state change
    if (cbs_fresh_pair_ok(s, t)) {
        if (s.residual > 0)
            throw SpecError("fresh pair with live residual");
        s.deadline = t + s.period;
        s.capacity = s.budget;
        s.replenish_at = s.deadline;
        return true;
    }
    return false;       // served with the current (d, c), possibly via own residual
}

Tick release_leftover(ServerState& s, Tick t, const RuleSet& rules) {
    if (!rules.release_residual)
        return 0;       // plain CBS keeps c
    if (s.capacity <= 0)
        return 0;
    if (t >= s.deadline) {
        s.capacity = 0; // stale leftover, nothing to donate
        return 0;
    }
    s.residual = s.capacity;
    s.capacity = 0;
    return s.residual;
}

std::optional<CapacitySource> select_capacity_source(int consumer,
                                                     Tick t,
                                                     std::span<const ServerState> servers,
                                                     const RuleSet& rules) {
    const ServerState& me = servers[consumer];

    // Residual reclaiming: earliest source deadline wins, ties by id. The
    // consumer runs with the source's deadline, so only sources at or past
    // its own deadline qualify.
    if (rules.reclaim) {
        const ServerState* best = nullptr;
        for (const auto& src : servers) {
            if (src.residual <= 0 || src.residual_user.valid()) continue;
            if (t >= src.deadline) continue;          // expires at d
            if (src.deadline < me.deadline) continue;
            if (!best || src.deadline < best->deadline ||
                (src.deadline == best->deadline && src.id < best->id))
                best = &src;
        }
        if (best)
            return CapacitySource{SourceKind::Residual, (int)(best - servers.data()),
                                  best->deadline};
    }

    if (me.capacity > 0 && !me.capacity_user.valid())
        return CapacitySource{SourceKind::Own, consumer, me.deadline};

    // Capacity stealing: inactive non-isolated servers whose deadline is no
    // later than the consumer's; the thief runs with its own deadline.
    if (rules.steal) {
        const ServerState* best = nullptr;
        for (const auto& src : servers) {
            if (src.isolated || src.active) continue;
            if (src.capacity <= 0 || src.capacity_user.valid()) continue;
            if (src.deadline > me.deadline) continue;
            if (!best || src.deadline < best->deadline ||
                (src.deadline == best->deadline && src.id < best->id))
                best = &src;
        }
        if (best)
            return CapacitySource{SourceKind::Stolen, (int)(best - servers.data()),
                                  me.deadline};
    }

    return std::nullopt;
}

Tick charge(ServerState& src, SourceKind kind, Tick amount) {
    if (amount < 0)
        throw SpecError("negative charge");
    if (kind == SourceKind::Residual) {
        if (amount > src.residual)
            throw SpecError("residual over-charge");
        src.residual -= amount;
        return src.residual;
    }
    if (amount > src.capacity)
        throw SpecError("capacity over-charge");
    src.capacity -= amount;
    return src.capacity;
}

void replenish(ServerState& s) {
    s.residual = 0;
    s.capacity = s.budget;
    s.deadline += s.period;
    s.replenish_at = s.deadline;
}

} // namespace pcss
