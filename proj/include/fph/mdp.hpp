#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

namespace fph {

using StateId = int;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Which entropy term enters potentials and free energies.
/// `plain` uses log pi directly; `relative` measures against the uniform
/// prior policy, so the Gibbs distribution is the exact fixed point.
enum class EntropyMode { plain, relative };

/// Deterministic-transition MDP summarized as a directed graph with
/// per-state rewards and an absorbing goal set. States are dense 0..n-1.
/// Absorbing states carry exactly their self-loop; trajectories terminate
/// on first entry to one.
struct Mdp {
    std::vector<std::vector<StateId>> out; // adjacency, each list sorted ascending
    Vector reward;
    std::vector<bool> absorbing;
    std::optional<StateId> start;

    int num_states() const { return static_cast<int>(out.size()); }
    int out_degree(StateId x) const { return static_cast<int>(out[x].size()); }
    bool has_edge(StateId from, StateId to) const;
    bool is_absorbing(StateId x) const { return absorbing[x]; }
    std::vector<StateId> transient_states() const;
    std::vector<StateId> absorbing_states() const;
};

/// Build an Mdp from an edge list and validate every structural invariant.
/// Throws InvariantError naming the offending state or edge.
Mdp make_mdp(int num_states, const std::vector<std::pair<StateId, StateId>>& edges,
             const Vector& reward, const std::vector<StateId>& absorbing,
             std::optional<StateId> start = std::nullopt);

/// Re-check all Mdp invariants (used after loading and by tests).
void validate_mdp(const Mdp& mdp);

/// Copy of `mdp` with `goal` turned into the (additional) absorbing state:
/// its out-edges are replaced by the self-loop and its reward zeroed.
/// Existing absorbing states are kept.
Mdp with_goal(const Mdp& mdp, StateId goal);

/// True when every state reachable from `x0` along positive-probability
/// transitions can reach some absorbing state.
bool absorption_certain(const Mdp& mdp, const Matrix& transition, StateId x0);

/// Row-stochastic transition matrix supported on the graph's edges.
/// Absorbing rows are identity rows.
struct Policy {
    Matrix prob; // (x, x') = pi(x'|x)
};

/// Throws InvariantError if `policy` violates any Policy invariant for `mdp`.
void validate_policy(const Mdp& mdp, const Policy& policy);

/// pi_prior: probability 1/out-degree on each outgoing edge.
Policy uniform_prior_policy(const Mdp& mdp);

/// Expected visit counts of the absorbing chain generated by a policy.
/// `transient_visits` is D = (I - Q)^-1 over transient states; `visits` is
/// the full n-by-n extension N with absorbing rows e_g and N(x0, g) equal to
/// the absorption probability into g (terminal visit counted once).
struct FundamentalMatrix {
    std::vector<StateId> transient; // ascending; columns/rows of D in this order
    Matrix transient_visits;        // D
    Matrix visits;                  // N, n x n
    double condition_estimate = 0.0;
    bool ill_conditioned = false;

    int transient_index(StateId x) const; // -1 when x is absorbing
};

/// Condition-number threshold above which a result is flagged ill-conditioned.
inline constexpr double kIllConditionedThreshold = 1e12;

FundamentalMatrix fundamental_matrix(const Mdp& mdp, const Policy& policy);

/// N(x0, x): expected number of visits to x before absorption from x0.
double expected_state_visits(const FundamentalMatrix& fm, StateId x0, StateId x);

using TransitionFn = std::function<double(StateId, StateId)>;
using StatePairFn = std::function<double(StateId, StateId)>;

/// E_pi[sum_t f(x_t, x_{t+1})] = sum over transient x of
/// N(x0,x) E_{x'~pi(.|x)}[f(x,x')]. Sums range over policy support only.
double expected_transition_function(const FundamentalMatrix& fm, const Mdp& mdp,
                                    const Policy& policy, StateId x0, const TransitionFn& f);

/// E over ordered position pairs (t <= t') of g(x_t, x_t'):
/// sum_{x,x'} N(x0,x) N(x,x') g(x,x').
double expected_pair_function(const FundamentalMatrix& fm, StateId x0, const StatePairFn& g);

/// Transition-pair variant: inner expectations over pi at both ends,
/// sum_{x,x'} N(x0,x) N(x,x') { E_y[f(x,y)] + E_y'[f(x',y')] }.
/// Positions at the terminal state use the absorbing self-loop row.
double expected_transition_pair_function(const FundamentalMatrix& fm, const Mdp& mdp,
                                         const Policy& policy, StateId x0,
                                         const TransitionFn& f);

/// Contribution of one transition to the generalized potential:
/// plain log pi(x'|x) - R(x), or the prior-relative log ratio.
/// Throws InvariantError off the policy support.
double transition_potential(const Mdp& mdp, const Policy& policy, StateId x, StateId to,
                            EntropyMode mode);

/// Local free energy J_pi(x): -R(x) - H_pi(x) in plain mode,
/// -R(x) + KL(pi(.|x) || pi_prior(.|x)) in relative mode.
double local_free_energy(const Mdp& mdp, const Policy& policy, StateId x, EntropyMode mode);

/// J_pi over all states as a vector.
Vector local_free_energy_all(const Mdp& mdp, const Policy& policy, EntropyMode mode);

} // namespace fph
