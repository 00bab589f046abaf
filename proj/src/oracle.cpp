#include "fph/oracle.hpp"
#include "fph/errors.hpp"
#include "fph/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <string>

namespace fph {

namespace {

double entropy_of_weights(const Vector& weights) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < weights.size(); ++i)
        if (weights[i] > 0.0) h -= weights[i] * std::log(weights[i]);
    return h;
}

void check_task(const Mdp& mdp, const PlanningTask& task) {
    const int n = mdp.num_states();
    if (task.start < 0 || task.start >= n || task.goal < 0 || task.goal >= n)
        throw InvariantError("task endpoint out of range");
    if (task.start == task.goal) throw InvariantError("task start equals its goal");
}

struct SimplePathEnumerator {
    const Mdp& mdp;
    StateId goal;
    long cap;
    std::vector<Trajectory> found;
    std::vector<StateId> path;
    std::vector<bool> on_path;

    void walk(StateId x) {
        if (x == goal) {
            if (static_cast<long>(found.size()) >= cap)
                throw CapacityError("simple-path enumeration exceeded " + std::to_string(cap) +
                                    " paths on a graph with " +
                                    std::to_string(mdp.num_states()) + " states");
            found.push_back(Trajectory{path});
            return;
        }
        for (StateId y : mdp.out[x]) {
            if (y == x || on_path[y]) continue;
            on_path[y] = true;
            path.push_back(y);
            walk(y);
            path.pop_back();
            on_path[y] = false;
        }
    }
};

// Per-candidate successor table: next[q] is the state after q, or -1 when the
// candidate does not leave q (not visited, or q is its terminal goal).
std::vector<std::vector<StateId>> successor_tables(const std::vector<Trajectory>& candidates,
                                                   int n) {
    std::vector<std::vector<StateId>> tables;
    tables.reserve(candidates.size());
    for (const auto& cand : candidates) {
        std::vector<StateId> next(static_cast<std::size_t>(n), -1);
        for (std::size_t t = 0; t + 1 < cand.states.size(); ++t)
            next[cand.states[t]] = cand.states[t + 1];
        tables.push_back(std::move(next));
    }
    return tables;
}

std::vector<std::vector<bool>> visit_tables(const std::vector<Trajectory>& candidates, int n) {
    std::vector<std::vector<bool>> tables;
    tables.reserve(candidates.size());
    for (const auto& cand : candidates) {
        std::vector<bool> visited(static_cast<std::size_t>(n), false);
        for (StateId x : cand.states) visited[x] = true;
        tables.push_back(std::move(visited));
    }
    return tables;
}

// Shared fast path for run_order/experiment: curves over candidate indices.
struct TaskRunner {
    const Mdp& mdp;
    PlanningTask task;
    CandidateSet base;
    Trajectory canonical;
    std::vector<StateId> canonical_next; // -1 off the canonical path
    std::vector<std::vector<StateId>> next;
    std::vector<std::vector<bool>> visited;

    TaskRunner(const Mdp& mdp_in, const PlanningTask& task_in, Weighting weighting,
               bool shortest_only)
        : mdp(mdp_in), task(task_in),
          base(initial_candidates(mdp_in, task_in, weighting, shortest_only)),
          canonical(canonical_shortest_path(mdp_in, task_in)),
          canonical_next(static_cast<std::size_t>(mdp_in.num_states()), -1),
          next(successor_tables(base.candidates, mdp_in.num_states())),
          visited(visit_tables(base.candidates, mdp_in.num_states())) {
        for (std::size_t t = 0; t + 1 < canonical.states.size(); ++t)
            canonical_next[canonical.states[t]] = canonical.states[t + 1];
    }

    std::vector<double> run(const std::vector<StateId>& order) const {
        std::vector<std::size_t> alive(base.candidates.size());
        std::iota(alive.begin(), alive.end(), std::size_t{0});
        Vector weights = base.weights;
        std::vector<double> curve;
        curve.reserve(order.size() + 1);
        double h = entropy_of_weights(weights);
        curve.push_back(h);
        for (StateId q : order) {
            if (h == 0.0 && alive.size() == 1) {
                curve.push_back(0.0);
                continue;
            }
            std::vector<std::size_t> survivors;
            survivors.reserve(alive.size());
            double mass = 0.0;
            const StateId wanted = canonical_next[q];
            for (std::size_t c : alive) {
                bool keep;
                if (!visited[c][q]) {
                    keep = true;
                } else if (wanted >= 0) {
                    keep = next[c][q] == wanted;
                } else {
                    keep = false; // q is off the canonical shortest path
                }
                if (keep) {
                    survivors.push_back(c);
                    mass += weights[static_cast<Eigen::Index>(c)];
                }
            }
            if (survivors.empty())
                throw InvariantError("oracle refinement eliminated every candidate");
            for (std::size_t c : survivors) weights[static_cast<Eigen::Index>(c)] /= mass;
            alive = std::move(survivors);
            Vector alive_weights(static_cast<Eigen::Index>(alive.size()));
            for (std::size_t k = 0; k < alive.size(); ++k)
                alive_weights[static_cast<Eigen::Index>(k)] =
                    weights[static_cast<Eigen::Index>(alive[k])];
            h = alive.size() == 1 ? 0.0 : entropy_of_weights(alive_weights);
            curve.push_back(h);
        }
        return curve;
    }
};

std::vector<StateId> queryable_states(const Mdp& mdp, const PlanningTask& task) {
    std::vector<StateId> states;
    for (StateId x = 0; x < mdp.num_states(); ++x)
        if (x != task.goal) states.push_back(x);
    return states;
}

} // namespace

Trajectory canonical_shortest_path(const Mdp& mdp, const PlanningTask& task) {
    check_task(mdp, task);
    const int n = mdp.num_states();
    std::vector<int> dist(static_cast<std::size_t>(n), -1);
    std::vector<StateId> parent(static_cast<std::size_t>(n), -1);
    std::deque<StateId> frontier{task.start};
    dist[task.start] = 0;
    while (!frontier.empty()) {
        const StateId x = frontier.front();
        frontier.pop_front();
        for (StateId y : mdp.out[x]) {
            if (y == x) continue;
            if (dist[y] < 0) {
                dist[y] = dist[x] + 1;
                parent[y] = x; // first setter is the smallest predecessor at
                frontier.push_back(y); // this depth: neighbors scan ascending
            } else if (dist[y] == dist[x] + 1 && x < parent[y]) {
                parent[y] = x;
            }
        }
    }
    if (dist[task.goal] < 0)
        throw InvariantError("goal " + std::to_string(task.goal) +
                             " is unreachable from start " + std::to_string(task.start));
    std::vector<StateId> states;
    for (StateId x = task.goal; x != -1; x = parent[x]) states.push_back(x);
    std::reverse(states.begin(), states.end());
    return Trajectory{states};
}

CandidateSet initial_candidates(const Mdp& mdp, const PlanningTask& task, Weighting weighting,
                                bool shortest_only, long cap) {
    check_task(mdp, task);
    SimplePathEnumerator walker{mdp, task.goal, cap, {}, {task.start}, {}};
    walker.on_path.assign(static_cast<std::size_t>(mdp.num_states()), false);
    walker.on_path[task.start] = true;
    walker.walk(task.start);
    if (walker.found.empty())
        throw InvariantError("no path from " + std::to_string(task.start) + " to " +
                             std::to_string(task.goal));

    CandidateSet cs;
    cs.candidates = std::move(walker.found);
    std::sort(cs.candidates.begin(), cs.candidates.end());
    int shortest = std::numeric_limits<int>::max();
    for (const auto& cand : cs.candidates) shortest = std::min(shortest, cand.num_transitions());
    cs.shortest_len = shortest;
    if (shortest_only) {
        std::erase_if(cs.candidates,
                      [&](const Trajectory& t) { return t.num_transitions() != shortest; });
    }
    cs.weights.resize(static_cast<Eigen::Index>(cs.candidates.size()));
    if (weighting == Weighting::uniform) {
        cs.weights.setConstant(1.0 / static_cast<double>(cs.candidates.size()));
    } else {
        const Policy prior = uniform_prior_policy(mdp);
        for (Eigen::Index i = 0; i < cs.weights.size(); ++i)
            cs.weights[i] = trajectory_probability(prior, cs.candidates[i]);
        cs.weights /= cs.weights.sum();
    }
    return cs;
}

CandidateSet oracle_query(const CandidateSet& cs, const Mdp& mdp, const PlanningTask& task,
                          StateId state) {
    check_task(mdp, task);
    if (state < 0 || state >= mdp.num_states())
        throw InvariantError("queried state out of range");
    const Trajectory canonical = canonical_shortest_path(mdp, task);
    StateId wanted = -1;
    for (std::size_t t = 0; t + 1 < canonical.states.size(); ++t)
        if (canonical.states[t] == state) wanted = canonical.states[t + 1];

    CandidateSet out;
    std::vector<double> kept_weights;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(cs.candidates.size()); ++i) {
        const auto& cand = cs.candidates[static_cast<std::size_t>(i)];
        bool keep = true;
        for (std::size_t t = 0; t < cand.states.size(); ++t) {
            if (cand.states[t] != state) continue;
            if (wanted >= 0) {
                keep = t + 1 < cand.states.size() && cand.states[t + 1] == wanted;
            } else {
                keep = state == task.goal; // goal visits carry no information
            }
            break; // simple paths visit a state at most once
        }
        if (keep) {
            out.candidates.push_back(cand);
            kept_weights.push_back(cs.weights[i]);
        }
    }
    if (out.candidates.empty())
        throw InvariantError("oracle refinement eliminated every candidate");
    out.weights = Eigen::Map<const Vector>(kept_weights.data(),
                                           static_cast<Eigen::Index>(kept_weights.size()));
    out.weights /= out.weights.sum();
    out.shortest_len = cs.shortest_len;
    return out;
}

EntropyCurve run_order(const Mdp& mdp, const PlanningTask& task,
                       const std::vector<StateId>& order, Weighting weighting,
                       bool shortest_only) {
    std::vector<StateId> expected = queryable_states(mdp, task);
    std::vector<StateId> sorted_order = order;
    std::sort(sorted_order.begin(), sorted_order.end());
    if (sorted_order != expected)
        throw InvariantError("query order must be a permutation of all non-goal states");
    const TaskRunner runner(mdp, task, weighting, shortest_only);
    EntropyCurve curve;
    curve.entropy = runner.run(order);
    curve.task = task;
    return curve;
}

ExperimentResult experiment(const Mdp& mdp, const HierarchyScore& hierarchy,
                            int n_random_orders, std::uint64_t seed, Weighting weighting,
                            bool shortest_only) {
    if (n_random_orders < 1) throw InvariantError("need at least one random order");
    const std::vector<PlanningTask> tasks = all_tasks(mdp);
    if (tasks.empty()) throw InvariantError("graph admits no planning task");
    const std::size_t points = static_cast<std::size_t>(mdp.num_states()); // n-1 queries + start

    ExperimentResult result;
    result.hierarchical_mean.assign(points, 0.0);
    result.random_mean.assign(points, 0.0);
    std::map<int, int> tasks_per_len;

    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
        const PlanningTask& task = tasks[ti];
        const TaskRunner runner(mdp, task, weighting, shortest_only);

        std::vector<StateId> hier_order;
        for (StateId x : hierarchy.ranking)
            if (x != task.goal) hier_order.push_back(x);

        TaskCurves curves;
        curves.task = task;
        curves.shortest_len = runner.canonical.num_transitions();
        curves.hierarchical = runner.run(hier_order);

        std::vector<StateId> order = queryable_states(mdp, task);
        for (int oi = 0; oi < n_random_orders; ++oi) {
            Rng rng(derive_stream(seed, ti, static_cast<std::uint64_t>(oi)));
            std::vector<StateId> shuffled = order;
            rng.shuffle(shuffled);
            curves.randoms.push_back(runner.run(shuffled));
        }

        for (std::size_t q = 0; q < points; ++q) {
            result.hierarchical_mean[q] += curves.hierarchical[q];
            double random_sum = 0.0;
            for (const auto& rc : curves.randoms) random_sum += rc[q];
            result.random_mean[q] += random_sum / static_cast<double>(n_random_orders);
        }
        auto& hier_len = result.hierarchical_by_len[curves.shortest_len];
        auto& rand_len = result.random_by_len[curves.shortest_len];
        if (hier_len.empty()) {
            hier_len.assign(points, 0.0);
            rand_len.assign(points, 0.0);
        }
        for (std::size_t q = 0; q < points; ++q) {
            hier_len[q] += curves.hierarchical[q];
            double random_sum = 0.0;
            for (const auto& rc : curves.randoms) random_sum += rc[q];
            rand_len[q] += random_sum / static_cast<double>(n_random_orders);
        }
        tasks_per_len[curves.shortest_len] += 1;
        result.tasks.push_back(std::move(curves));
    }

    const double task_count = static_cast<double>(tasks.size());
    for (std::size_t q = 0; q < points; ++q) {
        result.hierarchical_mean[q] /= task_count;
        result.random_mean[q] /= task_count;
    }
    for (auto& [len, curve] : result.hierarchical_by_len)
        for (double& v : curve) v /= static_cast<double>(tasks_per_len[len]);
    for (auto& [len, curve] : result.random_by_len)
        for (double& v : curve) v /= static_cast<double>(tasks_per_len[len]);
    return result;
}

} // namespace fph
