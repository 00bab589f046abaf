#include "fph/mdp.hpp"
#include "fph/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <string>

namespace fph {

namespace {

std::string edge_name(StateId from, StateId to) {
    return "(" + std::to_string(from) + " -> " + std::to_string(to) + ")";
}

} // namespace

bool Mdp::has_edge(StateId from, StateId to) const {
    const auto& row = out[from];
    return std::binary_search(row.begin(), row.end(), to);
}

std::vector<StateId> Mdp::transient_states() const {
    std::vector<StateId> result;
    for (StateId x = 0; x < num_states(); ++x)
        if (!absorbing[x]) result.push_back(x);
    return result;
}

std::vector<StateId> Mdp::absorbing_states() const {
    std::vector<StateId> result;
    for (StateId x = 0; x < num_states(); ++x)
        if (absorbing[x]) result.push_back(x);
    return result;
}

Mdp make_mdp(int num_states, const std::vector<std::pair<StateId, StateId>>& edges,
             const Vector& reward, const std::vector<StateId>& absorbing,
             std::optional<StateId> start) {
    if (num_states <= 0) throw InvariantError("graph must have at least one state");
    if (reward.size() != num_states)
        throw InvariantError("reward vector length " + std::to_string(reward.size()) +
                             " does not match state count " + std::to_string(num_states));
    Mdp mdp;
    mdp.out.resize(static_cast<std::size_t>(num_states));
    mdp.reward = reward;
    mdp.absorbing.assign(static_cast<std::size_t>(num_states), false);
    for (StateId g : absorbing) {
        if (g < 0 || g >= num_states)
            throw InvariantError("absorbing state " + std::to_string(g) + " out of range");
        mdp.absorbing[g] = true;
    }
    std::set<std::pair<StateId, StateId>> seen;
    for (const auto& [from, to] : edges) {
        if (from < 0 || from >= num_states || to < 0 || to >= num_states)
            throw InvariantError("edge endpoint out of range in " + edge_name(from, to));
        if (!seen.insert({from, to}).second)
            throw InvariantError("duplicate edge " + edge_name(from, to));
        mdp.out[from].push_back(to);
    }
    for (auto& row : mdp.out) std::sort(row.begin(), row.end());
    mdp.start = start;
    validate_mdp(mdp);
    return mdp;
}

void validate_mdp(const Mdp& mdp) {
    const int n = mdp.num_states();
    if (mdp.start && (*mdp.start < 0 || *mdp.start >= n))
        throw InvariantError("start state " + std::to_string(*mdp.start) + " out of range");
    for (StateId x = 0; x < n; ++x) {
        const auto& row = mdp.out[x];
        if (mdp.absorbing[x]) {
            if (row.size() != 1 || row[0] != x)
                throw InvariantError("absorbing state " + std::to_string(x) +
                                     " must carry exactly its self-loop");
        } else if (row.empty()) {
            throw InvariantError("state " + std::to_string(x) +
                                 " has no outgoing edge and is not absorbing");
        }
        if (std::adjacent_find(row.begin(), row.end()) != row.end())
            throw InvariantError("duplicate edge out of state " + std::to_string(x));
    }
    // Every transient state must reach the absorbing set (absorption w.p. 1
    // under any fully supported policy). Skipped when the graph has no goals:
    // such "task graphs" get a goal attached per task via with_goal().
    const auto goals = mdp.absorbing_states();
    if (goals.empty()) return;
    std::vector<bool> reaches(static_cast<std::size_t>(n), false);
    std::deque<StateId> frontier;
    for (StateId g : goals) {
        reaches[g] = true;
        frontier.push_back(g);
    }
    // reverse reachability over the edge relation
    std::vector<std::vector<StateId>> in(static_cast<std::size_t>(n));
    for (StateId x = 0; x < n; ++x)
        for (StateId y : mdp.out[x]) in[y].push_back(x);
    while (!frontier.empty()) {
        const StateId y = frontier.front();
        frontier.pop_front();
        for (StateId x : in[y])
            if (!reaches[x]) {
                reaches[x] = true;
                frontier.push_back(x);
            }
    }
    for (StateId x = 0; x < n; ++x)
        if (!reaches[x])
            throw InvariantError("no absorbing state is reachable from state " +
                                 std::to_string(x));
}

Mdp with_goal(const Mdp& mdp, StateId goal) {
    if (goal < 0 || goal >= mdp.num_states())
        throw InvariantError("goal state " + std::to_string(goal) + " out of range");
    Mdp result = mdp;
    result.out[goal] = {goal};
    result.absorbing[goal] = true;
    result.reward[goal] = 0.0;
    validate_mdp(result);
    return result;
}

bool absorption_certain(const Mdp& mdp, const Matrix& transition, StateId x0) {
    const int n = mdp.num_states();
    std::vector<bool> reached(static_cast<std::size_t>(n), false);
    std::deque<StateId> frontier{x0};
    reached[x0] = true;
    while (!frontier.empty()) {
        const StateId x = frontier.front();
        frontier.pop_front();
        for (StateId y : mdp.out[x])
            if (transition(x, y) > 0.0 && !reached[y]) {
                reached[y] = true;
                frontier.push_back(y);
            }
    }
    // every reached state must itself reach a goal through the support
    std::vector<bool> reaches_goal(static_cast<std::size_t>(n), false);
    std::vector<std::vector<StateId>> in(static_cast<std::size_t>(n));
    for (StateId x = 0; x < n; ++x)
        for (StateId y : mdp.out[x])
            if (transition(x, y) > 0.0) in[y].push_back(x);
    std::deque<StateId> back;
    for (StateId g = 0; g < n; ++g)
        if (mdp.absorbing[g]) {
            reaches_goal[g] = true;
            back.push_back(g);
        }
    while (!back.empty()) {
        const StateId y = back.front();
        back.pop_front();
        for (StateId x : in[y])
            if (!reaches_goal[x]) {
                reaches_goal[x] = true;
                back.push_back(x);
            }
    }
    for (StateId x = 0; x < n; ++x)
        if (reached[x] && !reaches_goal[x]) return false;
    return true;
}

void validate_policy(const Mdp& mdp, const Policy& policy) {
    const int n = mdp.num_states();
    if (policy.prob.rows() != n || policy.prob.cols() != n)
        throw InvariantError("policy matrix must be " + std::to_string(n) + "x" +
                             std::to_string(n));
    for (StateId x = 0; x < n; ++x) {
        double row_sum = 0.0;
        for (StateId y = 0; y < n; ++y) {
            const double p = policy.prob(x, y);
            if (p < 0.0)
                throw InvariantError("negative probability at " + edge_name(x, y));
            if (p > 0.0 && !mdp.has_edge(x, y))
                throw InvariantError("policy puts mass on non-edge " + edge_name(x, y));
            row_sum += p;
        }
        if (std::abs(row_sum - 1.0) > 1e-12)
            throw InvariantError("policy row " + std::to_string(x) + " sums to " +
                                 std::to_string(row_sum));
        if (mdp.absorbing[x] && policy.prob(x, x) != 1.0)
            throw InvariantError("absorbing row " + std::to_string(x) +
                                 " must be the identity row");
    }
}

Policy uniform_prior_policy(const Mdp& mdp) {
    const int n = mdp.num_states();
    Policy policy{Matrix::Zero(n, n)};
    for (StateId x = 0; x < n; ++x) {
        const auto& row = mdp.out[x];
        if (row.empty())
            throw InvariantError("state " + std::to_string(x) +
                                 " has no outgoing edge and is not absorbing");
        const double p = 1.0 / static_cast<double>(row.size());
        for (StateId y : row) policy.prob(x, y) = p;
    }
    return policy;
}

int FundamentalMatrix::transient_index(StateId x) const {
    const auto it = std::lower_bound(transient.begin(), transient.end(), x);
    if (it == transient.end() || *it != x) return -1;
    return static_cast<int>(it - transient.begin());
}

FundamentalMatrix fundamental_matrix(const Mdp& mdp, const Policy& policy) {
    const int n = mdp.num_states();
    FundamentalMatrix fm;
    fm.transient = mdp.transient_states();
    const int nt = static_cast<int>(fm.transient.size());
    if (mdp.absorbing_states().empty())
        throw NumericalError("chain has no absorbing state; fundamental matrix undefined");
    for (StateId x : fm.transient)
        if (!absorption_certain(mdp, policy.prob, x))
            throw NumericalError("absorption is not certain from state " + std::to_string(x) +
                                 " under the policy support");

    Matrix q(nt, nt);
    for (int i = 0; i < nt; ++i)
        for (int j = 0; j < nt; ++j) q(i, j) = policy.prob(fm.transient[i], fm.transient[j]);
    const Matrix system = Matrix::Identity(nt, nt) - q;
    Eigen::PartialPivLU<Matrix> lu(system);
    fm.transient_visits = lu.solve(Matrix::Identity(nt, nt));

    // Absorption reachability makes (I - Q) nonsingular; the residual gate
    // only catches catastrophic breakdown. Mere ill-conditioning is flagged,
    // not fatal.
    const double residual =
        nt == 0 ? 0.0 : (fm.transient_visits * system - Matrix::Identity(nt, nt))
                            .cwiseAbs()
                            .maxCoeff();
    if (!std::isfinite(residual) || residual > 1e-2)
        throw NumericalError("(I - Q) is numerically singular; chain is not absorbing");

    const double norm_a = nt == 0 ? 0.0 : system.cwiseAbs().colwise().sum().maxCoeff();
    const double norm_d = nt == 0 ? 0.0 : fm.transient_visits.cwiseAbs().colwise().sum().maxCoeff();
    fm.condition_estimate = norm_a * norm_d;
    fm.ill_conditioned = fm.condition_estimate > kIllConditionedThreshold;

    // Extended visit matrix: terminal absorbing visit counted exactly once.
    fm.visits = Matrix::Zero(n, n);
    for (int i = 0; i < nt; ++i)
        for (int j = 0; j < nt; ++j) fm.visits(fm.transient[i], fm.transient[j]) =
            fm.transient_visits(i, j);
    for (StateId g : mdp.absorbing_states()) {
        fm.visits(g, g) = 1.0;
        for (int i = 0; i < nt; ++i) {
            double absorbed = 0.0; // P(absorbed at g | start fm.transient[i])
            for (int j = 0; j < nt; ++j)
                absorbed += fm.transient_visits(i, j) * policy.prob(fm.transient[j], g);
            fm.visits(fm.transient[i], g) = absorbed;
        }
    }
    // inverses can leave harmless -1e-17 entries; clamp to keep N nonnegative
    fm.visits = fm.visits.cwiseMax(0.0);
    fm.transient_visits = fm.transient_visits.cwiseMax(0.0);
    return fm;
}

double expected_state_visits(const FundamentalMatrix& fm, StateId x0, StateId x) {
    return fm.visits(x0, x);
}

double expected_transition_function(const FundamentalMatrix& fm, const Mdp& mdp,
                                    const Policy& policy, StateId x0, const TransitionFn& f) {
    double total = 0.0;
    for (StateId x : fm.transient) {
        double inner = 0.0;
        for (StateId y : mdp.out[x])
            if (policy.prob(x, y) > 0.0) inner += policy.prob(x, y) * f(x, y);
        total += fm.visits(x0, x) * inner;
    }
    return total;
}

double expected_pair_function(const FundamentalMatrix& fm, StateId x0, const StatePairFn& g) {
    const int n = static_cast<int>(fm.visits.rows());
    double total = 0.0;
    for (StateId x = 0; x < n; ++x) {
        const double first = fm.visits(x0, x);
        if (first == 0.0) continue;
        for (StateId y = 0; y < n; ++y) {
            const double second = fm.visits(x, y);
            if (second == 0.0) continue;
            total += first * second * g(x, y);
        }
    }
    return total;
}

double expected_transition_pair_function(const FundamentalMatrix& fm, const Mdp& mdp,
                                         const Policy& policy, StateId x0,
                                         const TransitionFn& f) {
    const int n = mdp.num_states();
    Vector inner(n);
    for (StateId x = 0; x < n; ++x) {
        double e = 0.0;
        for (StateId y : mdp.out[x])
            if (policy.prob(x, y) > 0.0) e += policy.prob(x, y) * f(x, y);
        inner[x] = e;
    }
    return expected_pair_function(fm, x0,
                                  [&](StateId x, StateId y) { return inner[x] + inner[y]; });
}

double transition_potential(const Mdp& mdp, const Policy& policy, StateId x, StateId to,
                            EntropyMode mode) {
    const double p = policy.prob(x, to);
    if (p <= 0.0)
        throw InvariantError("transition potential undefined on zero-probability edge " +
                             edge_name(x, to));
    if (mode == EntropyMode::plain) return std::log(p) - mdp.reward[x];
    const double prior = 1.0 / static_cast<double>(mdp.out_degree(x));
    return std::log(p / prior) - mdp.reward[x];
}

double local_free_energy(const Mdp& mdp, const Policy& policy, StateId x, EntropyMode mode) {
    double expectation = 0.0;
    for (StateId y : mdp.out[x]) {
        const double p = policy.prob(x, y);
        if (p <= 0.0) continue;
        if (mode == EntropyMode::plain) {
            expectation += p * std::log(p);
        } else {
            const double prior = 1.0 / static_cast<double>(mdp.out_degree(x));
            expectation += p * std::log(p / prior);
        }
    }
    return -mdp.reward[x] + expectation;
}

Vector local_free_energy_all(const Mdp& mdp, const Policy& policy, EntropyMode mode) {
    Vector values(mdp.num_states());
    for (StateId x = 0; x < mdp.num_states(); ++x)
        values[x] = local_free_energy(mdp, policy, x, mode);
    return values;
}

} // namespace fph
