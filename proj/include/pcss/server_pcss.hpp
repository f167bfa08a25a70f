#pragma once

#include <optional>
#include <span>

#include "pcss/model.hpp"

namespace pcss {

// Which of the sharing/stealing rules are in force. Plain CBS keeps leftover
// capacity at completion and never reclaims or steals.
struct RuleSet {
    bool release_residual = true;   // leftover c becomes r at completion
    bool reclaim = true;            // consume other servers' residuals
    bool steal = true;              // consume inactive non-isolated capacity

    static RuleSet cbs() { return {false, false, false}; }
    static RuleSet full() { return {true, true, true}; }
};

// Admit a newly released job (already pushed to s.fifo). If the server had
// no other pending work, runs the admission test and either assigns a fresh
// pair d = t + T, c = Q or keeps the current one. Returns true on a fresh
// assignment (the caller schedules the replenishment at the new h).
bool on_job_arrival(ServerState& s, Tick t, bool had_pending);

// At a completion instant with no pending work left: leftover
// capacity is released as residual, reclaimable until d. Returns the
// released amount (0 when nothing was released). Past-deadline leftovers
// are discarded rather than released.
Tick release_leftover(ServerState& s, Tick t, const RuleSet& rules);

// Pick the capacity a unit of `consumer` would charge at time t:
// eligible residuals first (earliest source deadline, source deadline >=
// consumer deadline), then own capacity, then inactive non-isolated
// capacity with source deadline <= consumer deadline. Sources whose token
// is held by a running unit are skipped. Returns nullopt when the unit is
// not eligible to run.
std::optional<CapacitySource> select_capacity_source(int consumer,
                                                     Tick t,
                                                     std::span<const ServerState> servers,
                                                     const RuleSet& rules);

// Remove `amount` ticks from the chosen source. Returns the amount left on
// that source. Throws SpecError on over-charge.
Tick charge(ServerState& source_server, SourceKind kind, Tick amount);

// Replenishment at t == h for a server with pending work: c := Q,
// d := d + T, h := d. No carry-over. Stale residual is discarded first.
void replenish(ServerState& s);

} // namespace pcss
