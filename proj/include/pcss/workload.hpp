#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pcss/model.hpp"

namespace pcss {

// Structural problems found while loading or generating a task set.
class LoadError : public std::runtime_error {
public:
    explicit LoadError(std::vector<std::string> issues)
        : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
    const std::vector<std::string>& issues() const { return issues_; }

private:
    static std::string join(const std::vector<std::string>& v);
    std::vector<std::string> issues_;
};

// Task-set files are JSON: {"format": "pcss-taskset", "version": 1,
// "tasks": [{"id", "Q", "T", "isolated", "arrival": {"kind", "min_gap"},
// "segments": [{"cost", "spawn": [..]}], "exec_pct": [lo, hi]}]}.
TaskSet load_spec(const std::string& text);
std::string save_spec(const TaskSet& ts);

// Deterministic small-state generator used everywhere randomness is needed;
// identical seeds give identical draws on any platform.
namespace rng {
std::uint64_t splitmix(std::uint64_t& state);
std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);
// Uniform in [0, n), n > 0.
std::uint64_t bounded(std::uint64_t& state, std::uint64_t n);
} // namespace rng

// Release instants in [0, horizon). Periodic tasks release at k * min_gap
// from zero; sporadic tasks start at a seeded phase in [0, min_gap) with
// gaps drawn from [min_gap, 2 * min_gap]. min_gap defaults to the period.
std::vector<Tick> arrivals(const TaskSpec& t, Tick horizon, std::uint64_t seed);

// Actual execution of job `index`: a seeded percent of the template total
// in the task's exec_pct range, at least 1 tick.
Tick draw_actual_cost(const TaskSpec& t, std::uint64_t seed, int index);

// Cut the template down to `actual` total ticks, truncating from the tail:
// walk segments in order (sequential cost, then its spawns), keep what fits,
// shrink the crossing item, drop the rest.
std::vector<Segment> truncate_plan(const JobTemplate& body, Tick actual);

struct GenParams {
    int n_tasks = 4;
    Rational total_u{1, 2};       // exact utilization sum of the set
    std::array<int, 2> parallelism{0, 3};   // pjobs per job
    std::array<Tick, 2> period{20, 200};    // log-uniform-ish selection
    int non_isolated_pct = 25;
    int sporadic_pct = 50;
    std::array<int, 2> exec_pct{50, 100};
    // Single sequential segment of exactly Q per job, fixed execution.
    bool full_budget = false;
    std::uint64_t seed = 0;
};

// Utilizations are split on a 1/840 grid and periods are chosen so that
// Q = U * T holds exactly; the per-task utilizations then sum to total_u
// with no rounding. total_u must be representable on the grid and each
// share is capped at 1.
TaskSet generate(const GenParams& p);

} // namespace pcss
