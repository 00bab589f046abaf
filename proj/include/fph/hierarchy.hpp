#pragma once

#include "fph/tasks.hpp"
#include "fph/trajectories.hpp"

#include <vector>

namespace fph {

/// Order states by signed score or by score magnitude (both descending).
enum class RankingMode { signed_value, magnitude };

/// Which policy the per-task hierarchy is scored under.
enum class ScorePolicy { prior, gibbs };

/// Per-state flux scores with a deterministic ranking (ties break toward the
/// smaller state id). `x0_weights` records the start distribution in effect.
struct HierarchyScore {
    Vector per_state;
    std::vector<StateId> ranking;
    Vector x0_weights;
};

/// Potential difference between two policy-supported transitions:
/// psi(to2|from2) - psi(to1|from1).
double gamma_state_pair(const Mdp& mdp, const Policy& policy, StateId from1, StateId to1,
                        StateId from2, StateId to2, EntropyMode mode);

/// Fundamental-matrix kernel between two states: visit-count products routed
/// through the higher-J end, N(x0, hi) * N(hi, lo). Ties take the smaller of
/// the two products; `lower_routing` flips the case selection for sensitivity
/// analysis.
double kernel_KD(const Mdp& mdp, const Policy& policy, const FundamentalMatrix& fm, StateId x0,
                 StateId x, StateId other, EntropyMode mode, bool lower_routing = false);

/// Discrete Laplacian of the local free energy at every state:
/// score(x) = sum_x' K_D(x, x') [J(x') - J(x)].
HierarchyScore state_flux(const Mdp& mdp, const Policy& policy, const FundamentalMatrix& fm,
                          StateId x0, EntropyMode mode,
                          RankingMode ranking = RankingMode::magnitude,
                          bool lower_routing = false);

/// Start-weighted average of state_flux over a distribution of start states
/// (weights must be nonnegative, sum to 1, and sit on transient states).
HierarchyScore hierarchy_ranking(const Mdp& mdp, const Policy& policy, const Vector& task_dist,
                                 EntropyMode mode, RankingMode ranking = RankingMode::magnitude,
                                 bool lower_routing = false);

/// Uniform average over planning tasks: each task's goal is made absorbing,
/// the scoring policy (uniform prior or exact Gibbs marginal) is built on the
/// converted graph, and state_flux is evaluated at the task's start.
HierarchyScore task_averaged_hierarchy(const Mdp& mdp, const std::vector<PlanningTask>& tasks,
                                       EntropyMode mode, RankingMode ranking,
                                       ScorePolicy score_policy, double beta,
                                       bool lower_routing = false);

/// Two routes to the total flux plus the expectation-identity residuals that
/// feed the pull-back; produced for inspection, no equality is asserted
/// between the two totals.
struct ConsistencyReport {
    double state_flux_total = 0.0;
    double trajectory_flux_total = 0.0;
    double gamma_flux_total = 0.0;
    double abs_difference = 0.0;
    double rel_difference = 0.0;
    double tail_mass = 0.0;
    double transition_identity_max_err = 0.0;
    double pair_identity_max_err = 0.0;
    double fundamental_matrix_residual = 0.0;
    Eigen::Index support_size = 0;
    int horizon_cap = 0;
};

ConsistencyReport pullback_consistency_report(const Mdp& mdp, const Policy& policy, double beta,
                                              StateId x0, double cutoff,
                                              long max_trajectories = kDefaultTrajectoryCap);

} // namespace fph
