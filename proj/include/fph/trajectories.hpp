#pragma once

#include "fph/mdp.hpp"

#include <compare>
#include <optional>
#include <vector>

namespace fph {

/// A complete state trajectory x_0 .. x_T. For absorbing-chain semantics the
/// last state is absorbing and no earlier one is; candidate paths in the
/// oracle planner reuse the same value type with simple-path semantics.
struct Trajectory {
    std::vector<StateId> states;

    auto operator<=>(const Trajectory&) const = default;
    int num_transitions() const { return static_cast<int>(states.size()) - 1; }
};

/// Throws InvariantError unless `traj` is a valid absorbing-chain trajectory
/// of `mdp` (edges exist, terminal absorbing, no earlier absorbing state).
void validate_trajectory(const Mdp& mdp, const Trajectory& traj);

/// Explicit finite trajectory distribution. Support is lexicographically
/// sorted; probabilities are aligned with it. `tail_mass` is the mass cut by
/// the horizon cap and is never silently renormalized away.
struct TrajectoryDistribution {
    std::vector<Trajectory> support;
    Vector prob;
    double tail_mass = 0.0;
    int horizon_cap = 0;
    double cutoff = 0.0;

    Eigen::Index size() const { return static_cast<Eigen::Index>(support.size()); }
    double total_mass() const { return prob.size() == 0 ? 0.0 : prob.sum(); }
    std::optional<Eigen::Index> index_of(const Trajectory& traj) const;
};

/// Throws InvariantError if normalization (sum + tail = 1) or nonnegativity
/// is violated beyond 1e-12.
void validate_distribution(const TrajectoryDistribution& dist);

/// Sum of R over every state of the trajectory, terminal included.
double trajectory_return(const Mdp& mdp, const Trajectory& traj);

/// Product of transition probabilities; 0 off the policy support.
double trajectory_probability(const Policy& policy, const Trajectory& traj);

inline constexpr long kDefaultTrajectoryCap = 1000000;

/// Depth-first enumeration of all trajectories from x0 whose horizon cap H is
/// the smallest one leaving residual (non-absorbed) mass <= cutoff. Entries
/// are exact path probabilities; the residual is recorded as tail_mass.
TrajectoryDistribution enumerate_trajectories(const Mdp& mdp, const Policy& policy, StateId x0,
                                              double cutoff,
                                              long max_trajectories = kDefaultTrajectoryCap);

/// Gibbs-Boltzmann reweighting of the enumerated prior: entries proportional
/// to prior(x) exp(beta R(x)), normalized to 1 over the enumerated support
/// (tail_mass 0; truncation bias is bounded by gibbs_truncation_bias_bound).
TrajectoryDistribution gibbs_optimal(const TrajectoryDistribution& prior, const Mdp& mdp,
                                     double beta);

/// Upper bound on the normalization bias induced by truncating the support:
/// tail * exp(beta * max enumerated return).
double gibbs_truncation_bias_bound(const TrajectoryDistribution& prior, const Mdp& mdp,
                                   double beta);

/// Closed-form minimum of the free energy: -(1/beta) log E_prior[exp(beta R)],
/// evaluated by log-sum-exp over the enumerated support.
double optimal_free_energy(const TrajectoryDistribution& prior, const Mdp& mdp, double beta);

/// Free energy of a trajectory distribution: E[-R] plus the (1/beta)-weighted
/// entropy term, relative to `prior` in relative mode (prior may be null in
/// plain mode). Throws InvariantError when dist's support escapes the prior's.
double free_energy(const TrajectoryDistribution& dist, const Mdp& mdp, double beta,
                   EntropyMode mode, const TrajectoryDistribution* prior = nullptr);

/// Shannon entropy (nats) of the normalized entries.
double trajectory_entropy(const TrajectoryDistribution& dist);

/// Per-transition marginal of a trajectory distribution:
/// pi(x'|x) = E[count of x -> x'] / E[visits to x as a transition source].
/// Rows of states never visited as a source fall back to uniform.
Policy marginal_transition_policy(const TrajectoryDistribution& dist, const Mdp& mdp);

/// Exact Gibbs marginal policy via the desirability recursion
/// z(x) = exp(beta R(x)) sum_y pi_prior(y|x) z(y):
/// pi*(y|x) proportional to pi_prior(y|x) z(y). Scales to graphs whose
/// trajectory space is far too large to enumerate.
Policy gibbs_marginal_policy(const Mdp& mdp, const Policy& prior, double beta);

} // namespace fph
