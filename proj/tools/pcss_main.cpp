#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "pcss/analysis.hpp"
#include "pcss/engine.hpp"
#include "pcss/workload.hpp"

using namespace pcss;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw SpecError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw SpecError("cannot write " + path);
    out << text;
}

Tick auto_horizon(const TaskSet& ts, int mult) {
    Tick maxT = 1;
    for (const TaskSpec& t : ts.tasks)
        maxT = std::max(maxT, t.period);
    return maxT * mult;
}

void print_summary(const TaskSet& ts, const Trace& tr) {
    std::printf("policy=%s steal=%s cores=%d horizon=%lld seed=%llu records=%zu\n",
                tr.meta.policy.c_str(), tr.meta.steal.c_str(), tr.meta.cores,
                (long long)tr.meta.horizon, (unsigned long long)tr.meta.seed,
                tr.records.size());
    std::printf("%6s %5s %9s %10s %7s %9s %9s %10s\n", "task", "isol", "released",
                "completed", "misses", "max_tard", "max_resp", "avg_resp");
    int released = 0, completed = 0, misses = 0;
    for (const TaskStats& st : per_task_stats(ts, tr)) {
        const TaskSpec* t = ts.find(st.task);
        std::printf("%6d %5s %9d %10d %7d %9lld %9lld %10.2f\n", st.task,
                    t && !t->isolated ? "no" : "yes", st.released, st.completed,
                    st.misses, (long long)st.max_tardiness,
                    (long long)st.max_response, st.avg_response);
        released += st.released;
        completed += st.completed;
        misses += st.misses;
    }
    std::printf("%6s %5s %9d %10d %7d\n", "total", "", released, completed, misses);
}

struct GenOpts {
    int tasks = 4;
    std::string util = "1/2";
    Tick period_min = 20, period_max = 200;
    int par_min = 0, par_max = 3;
    int non_isolated = 25;
    int sporadic = 50;
    int exec_min = 50, exec_max = 100;
    bool full_budget = false;

    TaskSet build(std::uint64_t seed) const {
        GenParams p;
        p.n_tasks = tasks;
        p.total_u = Rational::parse(util);
        p.period = {period_min, period_max};
        p.parallelism = {par_min, par_max};
        p.non_isolated_pct = non_isolated;
        p.sporadic_pct = sporadic;
        p.exec_pct = {exec_min, exec_max};
        p.full_budget = full_budget;
        p.seed = seed;
        return generate(p);
    }
};

void add_gen_flags(CLI::App* cmd, GenOpts& g) {
    cmd->add_option("--tasks", g.tasks, "number of tasks to generate");
    cmd->add_option("--util", g.util, "exact utilization sum, e.g. 3/4");
    cmd->add_option("--period-min", g.period_min, "shortest period");
    cmd->add_option("--period-max", g.period_max, "longest period");
    cmd->add_option("--par-min", g.par_min, "min pjobs per job");
    cmd->add_option("--par-max", g.par_max, "max pjobs per job");
    cmd->add_option("--non-isolated", g.non_isolated, "percent of tasks that donate");
    cmd->add_option("--sporadic", g.sporadic, "percent of tasks with sporadic arrivals");
    cmd->add_option("--exec-min", g.exec_min, "lower actual-execution percent");
    cmd->add_option("--exec-max", g.exec_max, "upper actual-execution percent");
    cmd->add_flag("--full-budget", g.full_budget,
                  "sequential jobs that always use the whole budget");
}

int cmd_run(const std::string& taskset_path, const GenOpts& gen, SimConfig cfg,
            int horizon_mult, const std::string& trace_path,
            const std::string& metrics_path, const std::string& save_path,
            bool quiet) {
    TaskSet ts = taskset_path.empty() ? gen.build(cfg.seed)
                                      : load_spec(slurp(taskset_path));
    if (!save_path.empty())
        spill(save_path, save_spec(ts));
    if (cfg.horizon <= 0)
        cfg.horizon = auto_horizon(ts, horizon_mult);

    Trace tr;
    try {
        tr = run(ts, cfg);
    } catch (const EngineError& e) {
        std::cerr << "engine error: " << e.what() << "\n";
        if (!trace_path.empty())
            spill(trace_path, trace_to_csv(e.partial_trace()));
        return 3;
    }
    if (!trace_path.empty())
        spill(trace_path, trace_to_csv(tr));
    if (!metrics_path.empty())
        spill(metrics_path, metrics_json(ts, tr));
    if (!quiet)
        print_summary(ts, tr);
    return 0;
}

int cmd_check(const std::string& taskset_path, const std::string& trace_path) {
    TaskSet ts = load_spec(slurp(taskset_path));
    Trace tr = trace_from_csv(slurp(trace_path));
    bool bad = false;
    for (const auto& [name, res] : run_all_checks(ts, tr)) {
        if (res.ok()) {
            std::printf("%-18s ok\n", name.c_str());
            continue;
        }
        bad = true;
        std::printf("%-18s %zu violation(s)\n", name.c_str(), res.violations.size());
        for (const std::string& v : res.violations)
            std::printf("    %s\n", v.c_str());
    }
    return bad ? 1 : 0;
}

int cmd_validate(const std::string& taskset_path, int cores) {
    TaskSet ts;
    try {
        ts = load_spec(slurp(taskset_path));
    } catch (const LoadError& e) {
        for (const std::string& v : e.issues())
            std::cerr << v << "\n";
        return 1;
    }
    Rational total(0);
    for (const TaskSpec& t : ts.tasks) {
        Rational u = utilization(t.budget, t.period);
        total = total + u;
        std::printf("task %d: Q=%lld T=%lld U=%s %s %s, %zu segment(s)\n", t.id,
                    (long long)t.budget, (long long)t.period, u.str().c_str(),
                    t.isolated ? "isolated" : "non-isolated",
                    t.arrival.kind == ArrivalKind::Periodic ? "periodic" : "sporadic",
                    t.body.segments.size());
    }
    std::printf("%zu task(s), total utilization %s\n", ts.tasks.size(),
                total.str().c_str());
    if (cores > 0)
        std::printf("density bound on %d core(s): %s\n", cores,
                    gfb_sufficient(ts, cores) ? "schedulable" : "not covered");
    return 0;
}

int cmd_sweep(const std::string& out_path, const std::string& utils_csv,
              const std::string& cores_csv, int runs, GenOpts gen,
              int horizon_mult) {
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty())
                out.push_back(item);
        return out;
    };
    std::ostringstream csv;
    csv << "util,cores,seed,steal,released,completed,misses,iso_released,"
           "iso_misses,busy_fraction\n";
    for (const std::string& u : split(utils_csv)) {
        gen.util = u;
        for (const std::string& c : split(cores_csv)) {
            int cores = std::stoi(c);
            for (int seed = 0; seed < runs; ++seed) {
                TaskSet ts = gen.build(seed);
                for (StealMode sm :
                     {StealMode::Off, StealMode::DeadlineCompare}) {
                    SimConfig cfg;
                    cfg.cores = cores;
                    cfg.horizon = auto_horizon(ts, horizon_mult);
                    cfg.seed = seed;
                    cfg.steal = sm;
                    Trace tr = run(ts, cfg);
                    int rel = 0, comp = 0, miss = 0, irel = 0, imiss = 0;
                    Tick busy = 0;
                    for (const TaskStats& st : per_task_stats(ts, tr)) {
                        rel += st.released;
                        comp += st.completed;
                        miss += st.misses;
                        const TaskSpec* t = ts.find(st.task);
                        if (t && t->isolated) {
                            irel += st.released;
                            imiss += st.misses;
                        }
                    }
                    for (const TraceRecord& r : tr.records)
                        if (r.kind == RecordKind::Exec)
                            busy += r.t1 - r.t0;
                    csv << u << ',' << cores << ',' << seed << ','
                        << steal_name(sm) << ',' << rel << ',' << comp << ','
                        << miss << ',' << irel << ',' << imiss << ','
                        << (double)busy / ((double)cores * (double)cfg.horizon)
                        << '\n';
                }
            }
        }
    }
    spill(out_path, csv.str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"capacity-sharing server scheduler simulator"};
    app.require_subcommand(1);

    // run
    auto* runc = app.add_subcommand("run", "simulate a task set and emit a trace");
    std::string taskset_path, trace_path, metrics_path, save_path;
    std::string policy = "pcss", steal = "deadline-compare";
    SimConfig cfg;
    GenOpts gen;
    int horizon_mult = 20;
    bool quiet = false;
    runc->add_option("--taskset", taskset_path, "task-set JSON (omit to generate)")
        ->check(CLI::ExistingFile);
    runc->add_option("--cores", cfg.cores, "worker count")->check(CLI::PositiveNumber);
    runc->add_option("--horizon", cfg.horizon, "simulated ticks (0 = 20 * max period)");
    runc->add_option("--seed", cfg.seed, "seed for arrivals, costs, and generation");
    runc->add_option("--policy", policy, "cbs | css | pcss");
    runc->add_option("--steal", steal, "off | queue-empty-only | deadline-compare");
    runc->add_option("--horizon-mult", horizon_mult, "auto horizon = mult * max period");
    runc->add_option("--trace", trace_path, "write the trace CSV here ('-' = stdout)");
    runc->add_option("--metrics", metrics_path, "write metrics JSON here");
    runc->add_option("--save-taskset", save_path, "write the task set used");
    runc->add_flag("--quiet", quiet, "suppress the summary table");
    add_gen_flags(runc, gen);

    // check
    auto* checkc = app.add_subcommand("check", "replay a trace against its task set");
    std::string ck_taskset, ck_trace;
    checkc->add_option("--taskset", ck_taskset, "task-set JSON")
        ->required()
        ->check(CLI::ExistingFile);
    checkc->add_option("--trace", ck_trace, "trace CSV")
        ->required()
        ->check(CLI::ExistingFile);

    // validate
    auto* valc = app.add_subcommand("validate", "check a task-set file");
    std::string v_taskset;
    int v_cores = 0;
    valc->add_option("--taskset", v_taskset, "task-set JSON")
        ->required()
        ->check(CLI::ExistingFile);
    valc->add_option("--cores", v_cores, "also report the density bound");

    // sweep
    auto* sweepc = app.add_subcommand("sweep", "grid of runs, stealing on vs off");
    std::string sw_out = "-", sw_utils = "1/4,1/2,3/4", sw_cores = "2,4";
    int sw_runs = 20, sw_mult = 20;
    GenOpts sw_gen;
    sweepc->add_option("--out", sw_out, "CSV output ('-' = stdout)");
    sweepc->add_option("--utils", sw_utils, "comma-separated utilization sums");
    sweepc->add_option("--cores-list", sw_cores, "comma-separated worker counts");
    sweepc->add_option("--runs", sw_runs, "seeds per grid cell");
    sweepc->add_option("--horizon-mult", sw_mult, "horizon = mult * max period");
    add_gen_flags(sweepc, sw_gen);

    CLI11_PARSE(app, argc, argv);

    try {
        if (runc->parsed()) {
            auto p = policy_from(policy);
            auto s = steal_from(steal);
            if (!p)
                throw SpecError("unknown policy: " + policy);
            if (!s)
                throw SpecError("unknown steal mode: " + steal);
            cfg.policy = *p;
            cfg.steal = *s;
            return cmd_run(taskset_path, gen, cfg, horizon_mult, trace_path,
                           metrics_path, save_path, quiet);
        }
        if (checkc->parsed())
            return cmd_check(ck_taskset, ck_trace);
        if (valc->parsed())
            return cmd_validate(v_taskset, v_cores);
        if (sweepc->parsed())
            return cmd_sweep(sw_out, sw_utils, sw_cores, sw_runs, sw_gen, sw_mult);
    } catch (const LoadError& e) {
        for (const std::string& v : e.issues())
            std::cerr << "taskset: " << v << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
