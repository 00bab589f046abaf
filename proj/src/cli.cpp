#include "fph/cli.hpp"
#include "fph/config.hpp"
#include "fph/errors.hpp"
#include "fph/fp_flow.hpp"
#include "fph/graph_io.hpp"
#include "fph/hierarchy.hpp"
#include "fph/oracle.hpp"
#include "fph/trajectories.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace fph::cli {

namespace {

std::string traj_field(const Trajectory& traj) {
    std::string field;
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        if (i > 0) field += "-";
        field += std::to_string(traj.states[i]);
    }
    return field;
}

// Flag holders for one subcommand; values are copied into the RunConfig only
// for flags the user actually passed, so precedence is defaults < config
// file < flags.
struct ConfigFlags {
    std::string config_path;
    double beta = 0.0;
    std::string entropy_mode;
    std::string ranking_mode;
    bool kd_symmetric = false;
    double epsilon = 0.0;
    double step = 0.0;
    long max_steps = 0;
    double tol = 0.0;
    std::uint64_t seed = 0;
    int n_random_orders = 0;
    std::string weighting;
    std::string score_policy;
    bool shortest_only = false;

    void attach(CLI::App& cmd) {
        cmd.add_option("--config", config_path, "JSON config file (flags override it)");
        cmd.add_option("--beta", beta, "inverse temperature (default 1.0)");
        cmd.add_option("--entropy-mode", entropy_mode, "plain|relative");
        cmd.add_option("--ranking-mode", ranking_mode, "signed|magnitude");
        cmd.add_flag("--kd-symmetric", kd_symmetric,
                     "route the flux kernel through the lower-J state");
        cmd.add_option("--epsilon", epsilon, "enumeration tail cutoff (default 1e-9)");
        cmd.add_option("--step", step, "integrator step h (default 0.01)");
        cmd.add_option("--max-steps", max_steps, "integrator step limit (default 100000)");
        cmd.add_option("--tol", tol, "convergence tolerance (default 1e-8)");
        cmd.add_option("--seed", seed, "PRNG seed (default 42)");
        cmd.add_option("--n-random-orders", n_random_orders,
                       "random query orders per task (default 100)");
        cmd.add_option("--weighting", weighting, "candidate weighting: uniform|prior");
        cmd.add_option("--score-policy", score_policy, "hierarchy scoring policy: prior|gibbs");
        cmd.add_flag("--shortest-only", shortest_only,
                     "restrict oracle candidates to shortest paths");
    }

    RunConfig resolve(const CLI::App& cmd) const {
        RunConfig config;
        if (cmd.count("--config") > 0) config = load_config(config_path);
        if (cmd.count("--beta") > 0) config.beta = beta;
        if (cmd.count("--entropy-mode") > 0)
            config.entropy_mode = parse_entropy_mode(entropy_mode);
        if (cmd.count("--ranking-mode") > 0)
            config.ranking_mode = parse_ranking_mode(ranking_mode);
        if (cmd.count("--kd-symmetric") > 0) config.kd_symmetric = kd_symmetric;
        if (cmd.count("--epsilon") > 0) config.epsilon = epsilon;
        if (cmd.count("--step") > 0) config.step = step;
        if (cmd.count("--max-steps") > 0) config.max_steps = max_steps;
        if (cmd.count("--tol") > 0) config.tol = tol;
        if (cmd.count("--seed") > 0) config.seed = seed;
        if (cmd.count("--n-random-orders") > 0) config.n_random_orders = n_random_orders;
        if (cmd.count("--weighting") > 0) config.weighting = parse_weighting(weighting);
        if (cmd.count("--score-policy") > 0)
            config.score_policy = parse_score_policy(score_policy);
        if (cmd.count("--shortest-only") > 0) config.shortest_only = shortest_only;
        validate_config(config);
        return config;
    }
};

struct GraphArgs {
    std::string graph_path;
    StateId start = -1;
    StateId goal = -1;
    bool has_start_goal = false;

    void attach(CLI::App& cmd, bool with_start_goal) {
        cmd.add_option("--graph", graph_path, "graph file")->required();
        has_start_goal = with_start_goal;
        if (with_start_goal) {
            cmd.add_option("--start", start, "start state (overrides the file's start)");
            cmd.add_option("--goal", goal,
                           "make this state the absorbing goal before running");
        }
    }

    Mdp load(const CLI::App& cmd) const {
        Mdp mdp = load_graph(graph_path);
        if (has_start_goal && cmd.count("--goal") > 0) mdp = with_goal(mdp, goal);
        if (has_start_goal && cmd.count("--start") > 0) mdp.start = start;
        return mdp;
    }
};

StateId require_start(const Mdp& mdp) {
    if (!mdp.start)
        throw InvariantError("graph has no start state; pass --start");
    return *mdp.start;
}

void require_goals(const Mdp& mdp) {
    if (mdp.absorbing_states().empty())
        throw InvariantError("graph has no absorbing state; pass --goal to designate one");
}

EntropyMode resolved_mode(const RunConfig& config, EntropyMode command_default) {
    return config.entropy_mode ? *config.entropy_mode : command_default;
}

ScorePolicy resolved_score_policy(const RunConfig& config, const Mdp& mdp) {
    if (config.score_policy) return *config.score_policy;
    // Regular task graphs score identically zero under the prior (constant
    // local free energy), so they default to the Gibbs marginal.
    return mdp.absorbing_states().empty() ? ScorePolicy::gibbs : ScorePolicy::prior;
}

int run_gibbs(const Mdp& mdp, const RunConfig& config, const std::string& out_path) {
    require_goals(mdp);
    const StateId x0 = require_start(mdp);
    const Policy prior = uniform_prior_policy(mdp);
    const TrajectoryDistribution dist = enumerate_trajectories(mdp, prior, x0, config.epsilon);
    const TrajectoryDistribution gibbs = gibbs_optimal(dist, mdp, config.beta);

    std::string csv = "trajectory,return,prior_probability,gibbs_probability\n";
    for (Eigen::Index i = 0; i < dist.size(); ++i) {
        csv += traj_field(dist.support[i]) + "," +
               format_double(trajectory_return(mdp, dist.support[i])) + "," +
               format_double(dist.prob[i]) + "," + format_double(gibbs.prob[i]) + "\n";
    }
    write_file_atomic(out_path, csv);
    std::cout << "trajectories " << dist.size() << "\n"
              << "tail_mass " << format_double(dist.tail_mass) << "\n"
              << "optimal_free_energy "
              << format_double(optimal_free_energy(dist, mdp, config.beta)) << "\n"
              << "truncation_bias_bound "
              << format_double(gibbs_truncation_bias_bound(dist, mdp, config.beta)) << "\n";
    return 0;
}

int run_flow(const Mdp& mdp, const RunConfig& config, const std::string& out_path) {
    require_goals(mdp);
    const StateId x0 = require_start(mdp);
    const EntropyMode mode = resolved_mode(config, EntropyMode::relative);
    const Policy prior = uniform_prior_policy(mdp);
    const TrajectoryDistribution dist = enumerate_trajectories(mdp, prior, x0, config.epsilon);
    const FlowState flow = simulate_flow(dist, mdp, config.beta, mode, config.step,
                                         config.max_steps, config.tol);

    std::string csv = "step,tau,free_energy,l1_delta\n";
    for (const FlowTracePoint& point : flow.trace) {
        csv += std::to_string(point.step) + "," + format_double(point.tau) + "," +
               format_double(point.free_energy) + "," + format_double(point.l1_delta) + "\n";
    }
    write_file_atomic(out_path, csv);
    std::cout << "steps " << flow.step_count << "\n"
              << "converged " << (flow.converged ? "true" : "false") << "\n"
              << "final_free_energy " << format_double(flow.trace.back().free_energy) << "\n";
    return flow.converged ? 0 : static_cast<int>(ErrorCode::nonconvergence);
}

HierarchyScore compute_hierarchy(const Mdp& mdp, const RunConfig& config) {
    const EntropyMode mode = resolved_mode(config, EntropyMode::plain);
    const ScorePolicy score_policy = resolved_score_policy(config, mdp);
    if (mdp.absorbing_states().empty()) {
        return task_averaged_hierarchy(mdp, all_tasks(mdp), mode, config.ranking_mode,
                                       score_policy, config.beta, config.kd_symmetric);
    }
    Policy policy = uniform_prior_policy(mdp);
    if (score_policy == ScorePolicy::gibbs)
        policy = gibbs_marginal_policy(mdp, policy, config.beta);
    const auto transient = mdp.transient_states();
    Vector task_dist = Vector::Zero(mdp.num_states());
    for (StateId x : transient) task_dist[x] = 1.0 / static_cast<double>(transient.size());
    return hierarchy_ranking(mdp, policy, task_dist, mode, config.ranking_mode,
                             config.kd_symmetric);
}

int run_hierarchy(const Mdp& mdp, const RunConfig& config, const std::string& out_path) {
    const HierarchyScore score = compute_hierarchy(mdp, config);
    std::vector<int> rank(static_cast<std::size_t>(mdp.num_states()), 0);
    for (std::size_t position = 0; position < score.ranking.size(); ++position)
        rank[score.ranking[position]] = static_cast<int>(position) + 1;

    std::string csv = "state,score_signed,score_magnitude,rank\n";
    for (StateId x = 0; x < mdp.num_states(); ++x) {
        csv += std::to_string(x) + "," + format_double(score.per_state[x]) + "," +
               format_double(std::abs(score.per_state[x])) + "," + std::to_string(rank[x]) +
               "\n";
    }
    write_file_atomic(out_path, csv);
    std::cout << "top_state " << score.ranking.front() << "\n";
    return 0;
}

int run_oracle(const Mdp& mdp, const RunConfig& config, const std::string& out_path,
               std::string summary_path) {
    if (summary_path.empty()) {
        summary_path = out_path;
        const auto dot = summary_path.rfind(".csv");
        if (dot != std::string::npos && dot == summary_path.size() - 4)
            summary_path.insert(dot, "_summary");
        else
            summary_path += "_summary.csv";
    }
    const HierarchyScore hierarchy = compute_hierarchy(mdp, config);
    const ExperimentResult result = experiment(mdp, hierarchy, config.n_random_orders,
                                               config.seed, config.weighting,
                                               config.shortest_only);

    std::string detail = "task_start,task_goal,order_label,query_count,entropy\n";
    char label[32];
    for (const TaskCurves& task : result.tasks) {
        const std::string head =
            std::to_string(task.task.start) + "," + std::to_string(task.task.goal) + ",";
        for (std::size_t q = 0; q < task.hierarchical.size(); ++q)
            detail += head + "hierarchical," + std::to_string(q) + "," +
                      format_double(task.hierarchical[q]) + "\n";
        for (std::size_t oi = 0; oi < task.randoms.size(); ++oi) {
            std::snprintf(label, sizeof label, "random_%03zu", oi);
            for (std::size_t q = 0; q < task.randoms[oi].size(); ++q)
                detail += head + label + "," + std::to_string(q) + "," +
                          format_double(task.randoms[oi][q]) + "\n";
        }
    }
    write_file_atomic(out_path, detail);

    std::string summary = "scope,order_label,query_count,mean_entropy\n";
    for (std::size_t q = 0; q < result.hierarchical_mean.size(); ++q)
        summary += "all,hierarchical," + std::to_string(q) + "," +
                   format_double(result.hierarchical_mean[q]) + "\n";
    for (std::size_t q = 0; q < result.random_mean.size(); ++q)
        summary += "all,random_mean," + std::to_string(q) + "," +
                   format_double(result.random_mean[q]) + "\n";
    for (const auto& [len, curve] : result.hierarchical_by_len)
        for (std::size_t q = 0; q < curve.size(); ++q)
            summary += "len_" + std::to_string(len) + ",hierarchical," + std::to_string(q) +
                       "," + format_double(curve[q]) + "\n";
    for (const auto& [len, curve] : result.random_by_len)
        for (std::size_t q = 0; q < curve.size(); ++q)
            summary += "len_" + std::to_string(len) + ",random_mean," + std::to_string(q) + "," +
                       format_double(curve[q]) + "\n";
    write_file_atomic(summary_path, summary);

    std::cout << "tasks " << result.tasks.size() << "\n"
              << "final_hierarchical_mean "
              << format_double(result.hierarchical_mean.back()) << "\n"
              << "final_random_mean " << format_double(result.random_mean.back()) << "\n";
    return 0;
}

int run_check(const Mdp& mdp, const RunConfig& config, const std::string& out_path) {
    require_goals(mdp);
    const StateId x0 = require_start(mdp);
    const Policy prior = uniform_prior_policy(mdp);
    const ConsistencyReport report =
        pullback_consistency_report(mdp, prior, config.beta, x0, config.epsilon);

    std::string csv = "metric,value\n";
    const auto row = [&csv](const std::string& name, double value) {
        csv += name + "," + format_double(value) + "\n";
    };
    row("state_flux_total", report.state_flux_total);
    row("trajectory_flux_total", report.trajectory_flux_total);
    row("gamma_flux_total", report.gamma_flux_total);
    row("abs_difference", report.abs_difference);
    row("rel_difference", report.rel_difference);
    row("tail_mass", report.tail_mass);
    row("horizon_cap", static_cast<double>(report.horizon_cap));
    row("support_size", static_cast<double>(report.support_size));
    row("transition_identity_max_err", report.transition_identity_max_err);
    row("pair_identity_max_err", report.pair_identity_max_err);
    row("fundamental_matrix_residual", report.fundamental_matrix_residual);
    if (!out_path.empty()) write_file_atomic(out_path, csv);
    std::cout << csv;
    return 0;
}

int run_gen(int room_size, int degree, const RunConfig& config, const std::string& out_path) {
    const TwoRoomGraph graph = generate_two_room(room_size, degree, config.seed);
    save_graph(graph.mdp, out_path);
    std::cout << "states " << graph.mdp.num_states() << "\n"
              << "left_bottleneck " << graph.left_bottleneck << "\n"
              << "right_bottleneck " << graph.right_bottleneck << "\n";
    return 0;
}

} // namespace

std::string format_double(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.17g", value);
    return buffer;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ParseError("cannot write " + tmp);
        out << content;
        out.flush();
        if (!out) throw ParseError("failed writing " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw ParseError("cannot rename " + tmp + " to " + path);
}

int run(const std::vector<std::string>& args) {
    CLI::App app{"state-space hierarchies from discrete Fokker-Planck policy flow"};
    app.require_subcommand(1);

    struct Sub {
        CLI::App* cmd = nullptr;
        ConfigFlags flags;
        GraphArgs graph;
        std::string out_path;
        std::string summary_path;
    };

    Sub gibbs, flow, hierarchy, oracle, check, gen;
    int room_size = 5;
    int degree = 3;

    gibbs.cmd = app.add_subcommand("gibbs", "closed-form optimal trajectory distribution");
    gibbs.graph.attach(*gibbs.cmd, true);
    gibbs.cmd->add_option("--out", gibbs.out_path, "output CSV")->required();
    gibbs.flags.attach(*gibbs.cmd);

    flow.cmd = app.add_subcommand("flow", "integrate the discrete Fokker-Planck flow");
    flow.graph.attach(*flow.cmd, true);
    flow.cmd->add_option("--out", flow.out_path, "trace CSV")->required();
    flow.flags.attach(*flow.cmd);

    hierarchy.cmd = app.add_subcommand("hierarchy", "per-state flux scores and ranking");
    hierarchy.graph.attach(*hierarchy.cmd, false);
    hierarchy.cmd->add_option("--out", hierarchy.out_path, "scores CSV")->required();
    hierarchy.flags.attach(*hierarchy.cmd);

    oracle.cmd = app.add_subcommand("oracle", "oracle-planner entropy experiment");
    oracle.graph.attach(*oracle.cmd, false);
    oracle.cmd->add_option("--out", oracle.out_path, "per-task curves CSV")->required();
    oracle.cmd->add_option("--summary-out", oracle.summary_path,
                           "task-averaged curves CSV (default: <out>_summary.csv)");
    oracle.flags.attach(*oracle.cmd);

    check.cmd = app.add_subcommand("check", "flux pull-back consistency report");
    check.graph.attach(*check.cmd, true);
    check.cmd->add_option("--out", check.out_path, "report CSV (also printed)");
    check.flags.attach(*check.cmd);

    gen.cmd = app.add_subcommand("gen", "generate a two-room graph file");
    gen.cmd->add_option("--room-size", room_size, "nodes per room")->required();
    gen.cmd->add_option("--degree", degree, "target node degree")->required();
    gen.cmd->add_option("--out", gen.out_path, "graph file to write")->required();
    gen.flags.attach(*gen.cmd);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : static_cast<int>(ErrorCode::usage);
    }

    try {
        if (gibbs.cmd->parsed())
            return run_gibbs(gibbs.graph.load(*gibbs.cmd), gibbs.flags.resolve(*gibbs.cmd),
                             gibbs.out_path);
        if (flow.cmd->parsed())
            return run_flow(flow.graph.load(*flow.cmd), flow.flags.resolve(*flow.cmd),
                            flow.out_path);
        if (hierarchy.cmd->parsed())
            return run_hierarchy(hierarchy.graph.load(*hierarchy.cmd),
                                 hierarchy.flags.resolve(*hierarchy.cmd), hierarchy.out_path);
        if (oracle.cmd->parsed())
            return run_oracle(oracle.graph.load(*oracle.cmd), oracle.flags.resolve(*oracle.cmd),
                              oracle.out_path, oracle.summary_path);
        if (check.cmd->parsed())
            return run_check(check.graph.load(*check.cmd), check.flags.resolve(*check.cmd),
                             check.out_path);
        if (gen.cmd->parsed())
            return run_gen(room_size, degree, gen.flags.resolve(*gen.cmd), gen.out_path);
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return static_cast<int>(err.code());
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return static_cast<int>(ErrorCode::usage);
    }
    return static_cast<int>(ErrorCode::usage);
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

} // namespace fph::cli
