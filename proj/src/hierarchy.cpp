#include "fph/hierarchy.hpp"
#include "fph/errors.hpp"
#include "fph/fp_flow.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>

namespace fph {

namespace {

std::vector<StateId> rank_states(const Vector& score, RankingMode ranking) {
    std::vector<StateId> order(static_cast<std::size_t>(score.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](StateId a, StateId b) {
        const double va = ranking == RankingMode::magnitude ? std::abs(score[a]) : score[a];
        const double vb = ranking == RankingMode::magnitude ? std::abs(score[b]) : score[b];
        if (va != vb) return va > vb;
        return a < b;
    });
    return order;
}

double kd_from_values(const FundamentalMatrix& fm, StateId x0, StateId x, StateId other,
                      double j_x, double j_other, bool lower_routing) {
    const double via_other = fm.visits(x0, other) * fm.visits(other, x);
    const double via_x = fm.visits(x0, x) * fm.visits(x, other);
    if (j_other > j_x) return lower_routing ? via_x : via_other;
    if (j_other < j_x) return lower_routing ? via_other : via_x;
    return std::min(via_other, via_x);
}

} // namespace

std::vector<PlanningTask> all_tasks(const Mdp& mdp) {
    const int n = mdp.num_states();
    std::vector<PlanningTask> tasks;
    for (StateId s = 0; s < n; ++s) {
        std::vector<bool> reached(static_cast<std::size_t>(n), false);
        std::deque<StateId> frontier{s};
        reached[s] = true;
        while (!frontier.empty()) {
            const StateId x = frontier.front();
            frontier.pop_front();
            for (StateId y : mdp.out[x])
                if (!reached[y]) {
                    reached[y] = true;
                    frontier.push_back(y);
                }
        }
        for (StateId g = 0; g < n; ++g)
            if (g != s && reached[g]) tasks.push_back({s, g});
    }
    return tasks;
}

double gamma_state_pair(const Mdp& mdp, const Policy& policy, StateId from1, StateId to1,
                        StateId from2, StateId to2, EntropyMode mode) {
    return transition_potential(mdp, policy, from2, to2, mode) -
           transition_potential(mdp, policy, from1, to1, mode);
}

double kernel_KD(const Mdp& mdp, const Policy& policy, const FundamentalMatrix& fm, StateId x0,
                 StateId x, StateId other, EntropyMode mode, bool lower_routing) {
    const double j_x = local_free_energy(mdp, policy, x, mode);
    const double j_other = local_free_energy(mdp, policy, other, mode);
    return kd_from_values(fm, x0, x, other, j_x, j_other, lower_routing);
}

HierarchyScore state_flux(const Mdp& mdp, const Policy& policy, const FundamentalMatrix& fm,
                          StateId x0, EntropyMode mode, RankingMode ranking,
                          bool lower_routing) {
    const int n = mdp.num_states();
    const Vector j = local_free_energy_all(mdp, policy, mode);
    HierarchyScore score;
    score.per_state = Vector::Zero(n);
    for (StateId x = 0; x < n; ++x) {
        double acc = 0.0;
        for (StateId other = 0; other < n; ++other) {
            if (other == x || j[other] == j[x]) continue;
            acc += kd_from_values(fm, x0, x, other, j[x], j[other], lower_routing) *
                   (j[other] - j[x]);
        }
        score.per_state[x] = acc;
    }
    score.ranking = rank_states(score.per_state, ranking);
    score.x0_weights = Vector::Zero(n);
    score.x0_weights[x0] = 1.0;
    return score;
}

HierarchyScore hierarchy_ranking(const Mdp& mdp, const Policy& policy, const Vector& task_dist,
                                 EntropyMode mode, RankingMode ranking, bool lower_routing) {
    const int n = mdp.num_states();
    if (task_dist.size() != n) throw InvariantError("task distribution length mismatch");
    if (task_dist.minCoeff() < 0.0) throw InvariantError("task distribution has negative mass");
    if (std::abs(task_dist.sum() - 1.0) > 1e-12)
        throw InvariantError("task distribution does not sum to 1");
    const FundamentalMatrix fm = fundamental_matrix(mdp, policy);
    HierarchyScore score;
    score.per_state = Vector::Zero(n);
    for (StateId x0 = 0; x0 < n; ++x0) {
        const double w = task_dist[x0];
        if (w == 0.0) continue;
        if (mdp.is_absorbing(x0))
            throw InvariantError("task distribution puts mass on absorbing state " +
                                 std::to_string(x0));
        score.per_state += w * state_flux(mdp, policy, fm, x0, mode, ranking, lower_routing)
                                   .per_state;
    }
    score.ranking = rank_states(score.per_state, ranking);
    score.x0_weights = task_dist;
    return score;
}

HierarchyScore task_averaged_hierarchy(const Mdp& mdp, const std::vector<PlanningTask>& tasks,
                                       EntropyMode mode, RankingMode ranking,
                                       ScorePolicy score_policy, double beta,
                                       bool lower_routing) {
    if (tasks.empty()) throw InvariantError("task-averaged hierarchy needs at least one task");
    const int n = mdp.num_states();
    HierarchyScore score;
    score.per_state = Vector::Zero(n);
    score.x0_weights = Vector::Zero(n);
    const double w = 1.0 / static_cast<double>(tasks.size());
    for (const PlanningTask& task : tasks) {
        const Mdp task_mdp = with_goal(mdp, task.goal);
        Policy policy = uniform_prior_policy(task_mdp);
        if (score_policy == ScorePolicy::gibbs)
            policy = gibbs_marginal_policy(task_mdp, policy, beta);
        const FundamentalMatrix fm = fundamental_matrix(task_mdp, policy);
        score.per_state +=
            w * state_flux(task_mdp, policy, fm, task.start, mode, ranking, lower_routing)
                    .per_state;
        score.x0_weights[task.start] += w;
    }
    score.ranking = rank_states(score.per_state, ranking);
    return score;
}

ConsistencyReport pullback_consistency_report(const Mdp& mdp, const Policy& policy, double beta,
                                              StateId x0, double cutoff,
                                              long max_trajectories) {
    constexpr EntropyMode mode = EntropyMode::plain; // the pull-back is written plainly
    ConsistencyReport report;

    const FundamentalMatrix fm = fundamental_matrix(mdp, policy);
    const HierarchyScore score = state_flux(mdp, policy, fm, x0, mode);
    report.state_flux_total = score.per_state.sum();

    const TrajectoryDistribution dist =
        enumerate_trajectories(mdp, policy, x0, cutoff, max_trajectories);
    report.support_size = dist.size();
    report.tail_mass = dist.tail_mass;
    report.horizon_cap = dist.horizon_cap;
    report.trajectory_flux_total = fp_rhs(dist, mdp, beta, mode).sum();
    report.gamma_flux_total = total_flux_gamma(dist, mdp, beta, mode);
    report.abs_difference = std::abs(report.state_flux_total - report.trajectory_flux_total);
    const double scale =
        std::max(std::abs(report.state_flux_total), std::abs(report.trajectory_flux_total));
    report.rel_difference = scale > 0.0 ? report.abs_difference / scale : 0.0;

    // Expectation-identity legs, checked against the enumerated measure.
    const int n = mdp.num_states();
    Matrix enum_transitions = Matrix::Zero(n, n);
    Matrix enum_pairs = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < dist.size(); ++i) {
        const auto& states = dist.support[i].states;
        const double d = dist.prob[i];
        for (std::size_t t = 0; t + 1 < states.size(); ++t)
            enum_transitions(states[t], states[t + 1]) += d;
        for (std::size_t t = 0; t < states.size(); ++t)
            for (std::size_t u = t; u < states.size(); ++u)
                enum_pairs(states[t], states[u]) += d;
    }
    double max_transition_err = 0.0;
    for (StateId x : mdp.transient_states())
        for (StateId y : mdp.out[x])
            if (policy.prob(x, y) > 0.0)
                max_transition_err =
                    std::max(max_transition_err, std::abs(fm.visits(x0, x) * policy.prob(x, y) -
                                                          enum_transitions(x, y)));
    report.transition_identity_max_err = max_transition_err;

    double max_pair_err = 0.0;
    for (StateId x = 0; x < n; ++x)
        for (StateId y = 0; y < n; ++y)
            max_pair_err = std::max(
                max_pair_err, std::abs(fm.visits(x0, x) * fm.visits(x, y) - enum_pairs(x, y)));
    report.pair_identity_max_err = max_pair_err;

    const int nt = static_cast<int>(fm.transient.size());
    Matrix q(nt, nt);
    for (int i = 0; i < nt; ++i)
        for (int j = 0; j < nt; ++j) q(i, j) = policy.prob(fm.transient[i], fm.transient[j]);
    report.fundamental_matrix_residual =
        nt == 0 ? 0.0
                : (fm.transient_visits * (Matrix::Identity(nt, nt) - q) -
                   Matrix::Identity(nt, nt))
                      .cwiseAbs()
                      .maxCoeff();
    return report;
}

} // namespace fph
