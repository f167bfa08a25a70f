#pragma once

#include <optional>
#include <string_view>

#include "pcss/dispatcher.hpp"
#include "pcss/trace.hpp"

namespace pcss {

enum class Policy { Cbs, Css, Pcss };

const char* policy_name(Policy p);
const char* steal_name(StealMode m);
std::optional<Policy> policy_from(std::string_view s);
std::optional<StealMode> steal_from(std::string_view s);

struct SimConfig {
    int cores = 1;
    Tick horizon = 0;
    std::uint64_t seed = 0;
    Policy policy = Policy::Pcss;
    StealMode steal = StealMode::DeadlineCompare;
};

// Internal invariant violation. Carries the trace prefix up to the failing
// instant for diagnosis.
class EngineError : public std::runtime_error {
public:
    EngineError(const std::string& msg, Trace partial)
        : std::runtime_error(msg), partial_(std::move(partial)) {}
    const Trace& partial_trace() const { return partial_; }

private:
    Trace partial_;
};

// Simulate the task set over [0, horizon) and return the full trace.
// cbs and css policies require cores == 1.
Trace run(const TaskSet& ts, const SimConfig& cfg);

} // namespace pcss
