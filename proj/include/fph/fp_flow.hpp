#pragma once

#include "fph/trajectories.hpp"

#include <vector>

namespace fph {

/// Generalized potential over one distribution's support:
/// -R(x) + (1/beta) log density (plain) or log density ratio (relative).
struct GeneralizedPotential {
    std::vector<Trajectory> support; // lexicographic, mirrors the source dist
    Vector values;

    std::optional<Eigen::Index> index_of(const Trajectory& traj) const;
};

GeneralizedPotential generalized_potential(const TrajectoryDistribution& dist, const Mdp& mdp,
                                           double beta, EntropyMode mode,
                                           const TrajectoryDistribution* prior = nullptr);

/// Upwind Laplacian kernel between two support trajectories: the density at
/// whichever end has the higher generalized potential; ties take the smaller
/// density (the flux factor is zero there regardless).
double flux_kernel(const TrajectoryDistribution& dist, const GeneralizedPotential& pot,
                   const Trajectory& a, const Trajectory& b);

inline constexpr long kDefaultPairBudget = 100000000;

/// Discrete Fokker-Planck right-hand side over the frozen support.
/// Each unordered pair contributes K * (potential difference) with exactly
/// opposite signs at its two ends, so the returned vector sums to zero up to
/// accumulation error. Throws CapacityError when support^2 exceeds the budget.
Vector fp_rhs(const TrajectoryDistribution& dist, const Mdp& mdp, double beta, EntropyMode mode,
              const TrajectoryDistribution* prior = nullptr,
              long pair_budget = kDefaultPairBudget);

/// Density gain at `a` due to flux from `b`: the positive part of the
/// potential difference.
double gamma_plus(const GeneralizedPotential& pot, const Trajectory& a, const Trajectory& b);

/// Density loss at `a` due to flux toward `b`: mirror case of gamma_plus.
double gamma_minus(const GeneralizedPotential& pot, const Trajectory& a, const Trajectory& b);

/// Total flux in its gain/loss form:
/// sum over ordered pairs of d(a) d(b) [gamma_minus(a,b) - gamma_plus(b,a)].
/// Identically zero; evaluated literally as a conservation diagnostic.
double total_flux_gamma(const TrajectoryDistribution& dist, const Mdp& mdp, double beta,
                        EntropyMode mode, const TrajectoryDistribution* prior = nullptr,
                        long pair_budget = kDefaultPairBudget);

struct FlowTracePoint {
    long step = 0;
    double tau = 0.0;
    double free_energy = 0.0;
    double l1_delta = 0.0;
};

/// Snapshot of the gradient-flow integrator. `prior` is the frozen reference
/// measure (the support never changes after initialization); `returns` caches
/// per-trajectory returns for the energy bookkeeping.
struct FlowState {
    TrajectoryDistribution dist;
    TrajectoryDistribution prior;
    double tau = 0.0;
    long step_count = 0;
    bool converged = false;
    std::vector<FlowTracePoint> trace;
    Vector returns;
};

/// Initialize a flow at `dist`. The reference prior defaults to `dist`
/// itself; pass one explicitly to start the flow away from it.
FlowState make_flow_state(const TrajectoryDistribution& dist, const Mdp& mdp, double beta,
                          EntropyMode mode, const TrajectoryDistribution* prior = nullptr);

/// One explicit Euler step with positivity-preserving halving (at most 40
/// halvings, then a stiffness error). Mass drift beyond 1e-9 per step is a
/// hard error; smaller drift is renormalized back to 1 - tail. h = 0 returns
/// the state unchanged.
FlowState euler_step(const FlowState& flow, double h, const Mdp& mdp, double beta,
                     EntropyMode mode);

/// Iterate euler_step until the L1 distance between successive distributions
/// is at most tol * h, or max_steps is reached (then converged stays false).
FlowState simulate_flow(const TrajectoryDistribution& prior_dist, const Mdp& mdp, double beta,
                        EntropyMode mode, double h, long max_steps, double tol);

} // namespace fph
