#include "fph/fp_flow.hpp"
#include "fph/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fph {

namespace {

std::string traj_name(const Trajectory& traj) {
    std::string name;
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        if (i > 0) name += "-";
        name += std::to_string(traj.states[i]);
    }
    return name;
}

Vector reference_probs(const TrajectoryDistribution& dist, const TrajectoryDistribution& prior) {
    if (prior.support == dist.support) return prior.prob;
    Vector ref(dist.size());
    for (Eigen::Index i = 0; i < dist.size(); ++i) {
        const auto at = prior.index_of(dist.support[i]);
        ref[i] = at ? prior.prob[*at] : 0.0;
    }
    return ref;
}

Vector potential_values(const TrajectoryDistribution& dist, const Vector& returns, double beta,
                        EntropyMode mode, const TrajectoryDistribution* prior) {
    if (mode == EntropyMode::relative && prior == nullptr)
        throw InvariantError("relative potential requires a prior distribution");
    Vector values(dist.size());
    const Vector ref = mode == EntropyMode::relative ? reference_probs(dist, *prior) : Vector();
    for (Eigen::Index i = 0; i < dist.size(); ++i) {
        const double d = dist.prob[i];
        if (d <= 0.0)
            throw InvariantError("generalized potential undefined at zero-probability point " +
                                 traj_name(dist.support[i]));
        if (mode == EntropyMode::plain) {
            values[i] = -returns[i] + std::log(d) / beta;
        } else {
            if (ref[i] <= 0.0)
                throw InvariantError("support point " + traj_name(dist.support[i]) +
                                     " has zero prior probability");
            values[i] = -returns[i] + std::log(d / ref[i]) / beta;
        }
    }
    return values;
}

Vector returns_of(const TrajectoryDistribution& dist, const Mdp& mdp) {
    Vector returns(dist.size());
    for (Eigen::Index i = 0; i < dist.size(); ++i)
        returns[i] = trajectory_return(mdp, dist.support[i]);
    return returns;
}

void check_pair_budget(Eigen::Index support_size, long pair_budget) {
    const long s = static_cast<long>(support_size);
    if (s > 0 && s > pair_budget / s)
        throw CapacityError("flux computation over " + std::to_string(s) +
                            "^2 trajectory pairs exceeds the pair budget of " +
                            std::to_string(pair_budget));
}

// Pairwise upwind flux: one shared term per unordered pair, added with
// opposite signs, so total mass is conserved up to accumulation error.
Vector rhs_from_potential(const Vector& prob, const Vector& psi) {
    const Eigen::Index n = prob.size();
    Vector rhs = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (psi[i] == psi[j]) continue;
            const Eigen::Index hi = psi[j] > psi[i] ? j : i;
            const Eigen::Index lo = hi == j ? i : j;
            const double flux = prob[hi] * (psi[hi] - psi[lo]);
            rhs[lo] += flux;
            rhs[hi] -= flux;
        }
    }
    return rhs;
}

double energy_of(const Vector& prob, const Vector& returns, const Vector& reference, double beta,
                 EntropyMode mode) {
    double energy = 0.0;
    double entropy_term = 0.0;
    for (Eigen::Index i = 0; i < prob.size(); ++i) {
        const double d = prob[i];
        if (d <= 0.0) continue;
        energy -= d * returns[i];
        entropy_term +=
            mode == EntropyMode::plain ? d * std::log(d) : d * std::log(d / reference[i]);
    }
    return energy + entropy_term / beta;
}

// In-place Euler step shared by euler_step and simulate_flow.
void step_in_place(FlowState& flow, double h, double beta, EntropyMode mode,
                   const Vector& reference) {
    const Vector psi = potential_values(flow.dist, flow.returns, beta, mode,
                                        mode == EntropyMode::relative ? &flow.prior : nullptr);
    const Vector rhs = rhs_from_potential(flow.dist.prob, psi);

    double h_eff = h;
    Vector next;
    bool positive = false;
    for (int halvings = 0; halvings <= 40; ++halvings) {
        next = flow.dist.prob + h_eff * rhs;
        if (next.minCoeff() > 0.0) {
            positive = true;
            break;
        }
        h_eff *= 0.5;
    }
    if (!positive) {
        Eigen::Index worst = 0;
        (flow.dist.prob + h_eff * rhs).minCoeff(&worst);
        throw NumericalError("step collapsed after 40 halvings at trajectory " +
                             traj_name(flow.dist.support[worst]));
    }

    const double target = 1.0 - flow.dist.tail_mass;
    const double drift = next.sum() - target;
    if (std::abs(drift) > 1e-9)
        throw NumericalError("mass drift " + std::to_string(drift) +
                             " in one step exceeds 1e-9; flux is not conservative");
    next *= target / next.sum();

    const double l1 = (next - flow.dist.prob).lpNorm<1>();
    flow.dist.prob = std::move(next);
    flow.tau += h_eff;
    flow.step_count += 1;
    flow.trace.push_back({flow.step_count, flow.tau,
                          energy_of(flow.dist.prob, flow.returns, reference, beta, mode), l1});
}

} // namespace

std::optional<Eigen::Index> GeneralizedPotential::index_of(const Trajectory& traj) const {
    const auto it = std::lower_bound(support.begin(), support.end(), traj);
    if (it == support.end() || *it != traj) return std::nullopt;
    return static_cast<Eigen::Index>(it - support.begin());
}

GeneralizedPotential generalized_potential(const TrajectoryDistribution& dist, const Mdp& mdp,
                                           double beta, EntropyMode mode,
                                           const TrajectoryDistribution* prior) {
    if (!(beta > 0.0)) throw InvariantError("beta must be positive");
    GeneralizedPotential pot;
    pot.support = dist.support;
    pot.values = potential_values(dist, returns_of(dist, mdp), beta, mode, prior);
    return pot;
}

double flux_kernel(const TrajectoryDistribution& dist, const GeneralizedPotential& pot,
                   const Trajectory& a, const Trajectory& b) {
    const auto ia = dist.index_of(a);
    const auto ib = dist.index_of(b);
    const auto pa = pot.index_of(a);
    const auto pb = pot.index_of(b);
    if (!ia || !ib || !pa || !pb)
        throw InvariantError("flux kernel queried outside the distribution support");
    const double psi_a = pot.values[*pa];
    const double psi_b = pot.values[*pb];
    if (psi_b > psi_a) return dist.prob[*ib];
    if (psi_b < psi_a) return dist.prob[*ia];
    return std::min(dist.prob[*ia], dist.prob[*ib]);
}

Vector fp_rhs(const TrajectoryDistribution& dist, const Mdp& mdp, double beta, EntropyMode mode,
              const TrajectoryDistribution* prior, long pair_budget) {
    if (!(beta > 0.0)) throw InvariantError("beta must be positive");
    check_pair_budget(dist.size(), pair_budget);
    const Vector psi = potential_values(dist, returns_of(dist, mdp), beta, mode, prior);
    return rhs_from_potential(dist.prob, psi);
}

double gamma_plus(const GeneralizedPotential& pot, const Trajectory& a, const Trajectory& b) {
    const auto ia = pot.index_of(a);
    const auto ib = pot.index_of(b);
    if (!ia || !ib) throw InvariantError("gamma queried outside the potential support");
    const double diff = pot.values[*ib] - pot.values[*ia];
    return diff > 0.0 ? diff : 0.0;
}

double gamma_minus(const GeneralizedPotential& pot, const Trajectory& a, const Trajectory& b) {
    const auto ia = pot.index_of(a);
    const auto ib = pot.index_of(b);
    if (!ia || !ib) throw InvariantError("gamma queried outside the potential support");
    const double diff = pot.values[*ia] - pot.values[*ib];
    return diff > 0.0 ? diff : 0.0;
}

double total_flux_gamma(const TrajectoryDistribution& dist, const Mdp& mdp, double beta,
                        EntropyMode mode, const TrajectoryDistribution* prior,
                        long pair_budget) {
    check_pair_budget(dist.size(), pair_budget);
    const GeneralizedPotential pot = generalized_potential(dist, mdp, beta, mode, prior);
    double total = 0.0;
    for (Eigen::Index i = 0; i < dist.size(); ++i) {
        for (Eigen::Index j = 0; j < dist.size(); ++j) {
            if (i == j) continue;
            const double gain_at_j = gamma_plus(pot, dist.support[j], dist.support[i]);
            const double loss_at_i = gamma_minus(pot, dist.support[i], dist.support[j]);
            total += dist.prob[i] * dist.prob[j] * (loss_at_i - gain_at_j);
        }
    }
    return total;
}

FlowState make_flow_state(const TrajectoryDistribution& dist, const Mdp& mdp, double beta,
                          EntropyMode mode, const TrajectoryDistribution* prior) {
    if (!(beta > 0.0)) throw InvariantError("beta must be positive");
    FlowState flow;
    flow.dist = dist;
    flow.prior = prior ? *prior : dist;
    if (mode == EntropyMode::relative && flow.prior.support != flow.dist.support)
        throw InvariantError("flow prior must share the distribution support");
    flow.returns = returns_of(dist, mdp);
    const Vector reference =
        mode == EntropyMode::relative ? flow.prior.prob : Vector();
    flow.trace.push_back(
        {0, 0.0, energy_of(flow.dist.prob, flow.returns, reference, beta, mode), 0.0});
    return flow;
}

FlowState euler_step(const FlowState& flow, double h, const Mdp& /*mdp*/, double beta,
                     EntropyMode mode) {
    if (h < 0.0) throw InvariantError("step size must be nonnegative");
    FlowState next = flow;
    if (h == 0.0) return next;
    const Vector reference = mode == EntropyMode::relative ? next.prior.prob : Vector();
    step_in_place(next, h, beta, mode, reference);
    return next;
}

FlowState simulate_flow(const TrajectoryDistribution& prior_dist, const Mdp& mdp, double beta,
                        EntropyMode mode, double h, long max_steps, double tol) {
    if (!(h > 0.0)) throw InvariantError("step size must be positive");
    if (!(tol > 0.0)) throw InvariantError("tolerance must be positive");
    FlowState flow = make_flow_state(prior_dist, mdp, beta, mode);
    const Vector reference = mode == EntropyMode::relative ? flow.prior.prob : Vector();
    for (long step = 0; step < max_steps; ++step) {
        step_in_place(flow, h, beta, mode, reference);
        if (flow.trace.back().l1_delta <= tol * h) {
            flow.converged = true;
            break;
        }
    }
    return flow;
}

} // namespace fph
