#include "fph/trajectories.hpp"
#include "fph/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fph {

namespace {

// log sum_i exp(w_i), guarded against overflow for |w| up to reward scale 50
double log_sum_exp(const Vector& w) {
    const double peak = w.maxCoeff();
    if (!std::isfinite(peak)) return peak;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) acc += std::exp(w[i] - peak);
    return peak + std::log(acc);
}

} // namespace

void validate_trajectory(const Mdp& mdp, const Trajectory& traj) {
    if (traj.states.size() < 2)
        throw InvariantError("trajectory must contain at least one transition");
    for (std::size_t t = 0; t + 1 < traj.states.size(); ++t) {
        const StateId x = traj.states[t];
        if (mdp.is_absorbing(x))
            throw InvariantError("trajectory passes through absorbing state " +
                                 std::to_string(x) + " before its end");
        if (!mdp.has_edge(x, traj.states[t + 1]))
            throw InvariantError("trajectory uses non-edge (" + std::to_string(x) + " -> " +
                                 std::to_string(traj.states[t + 1]) + ")");
    }
    if (!mdp.is_absorbing(traj.states.back()))
        throw InvariantError("trajectory does not end in an absorbing state");
}

std::optional<Eigen::Index> TrajectoryDistribution::index_of(const Trajectory& traj) const {
    const auto it = std::lower_bound(support.begin(), support.end(), traj);
    if (it == support.end() || *it != traj) return std::nullopt;
    return static_cast<Eigen::Index>(it - support.begin());
}

void validate_distribution(const TrajectoryDistribution& dist) {
    if (dist.prob.size() != static_cast<Eigen::Index>(dist.support.size()))
        throw InvariantError("distribution support and probability lengths differ");
    if (dist.prob.size() > 0 && dist.prob.minCoeff() < 0.0)
        throw InvariantError("negative trajectory probability");
    if (dist.tail_mass < 0.0)
        throw InvariantError("negative tail mass");
    const double total = dist.total_mass() + dist.tail_mass;
    if (std::abs(total - 1.0) > 1e-12)
        throw InvariantError("distribution mass " + std::to_string(total) + " is not 1");
}

double trajectory_return(const Mdp& mdp, const Trajectory& traj) {
    double total = 0.0;
    for (StateId x : traj.states) total += mdp.reward[x];
    return total;
}

double trajectory_probability(const Policy& policy, const Trajectory& traj) {
    double p = 1.0;
    for (std::size_t t = 0; t + 1 < traj.states.size(); ++t)
        p *= policy.prob(traj.states[t], traj.states[t + 1]);
    return p;
}

namespace {

struct Enumerator {
    const Mdp& mdp;
    const Policy& policy;
    int horizon;
    long cap;
    std::vector<Trajectory> found;
    std::vector<double> probs;
    double tail = 0.0;
    std::vector<StateId> path;

    void walk(StateId x, double p, int depth) {
        if (mdp.is_absorbing(x)) {
            if (static_cast<long>(found.size()) >= cap)
                throw CapacityError("trajectory enumeration exceeded " + std::to_string(cap) +
                                    " paths on a graph with " +
                                    std::to_string(mdp.num_states()) + " states");
            found.push_back(Trajectory{path});
            probs.push_back(p);
            return;
        }
        if (depth == horizon) {
            tail += p;
            return;
        }
        for (StateId y : mdp.out[x]) {
            const double q = policy.prob(x, y);
            if (q <= 0.0) continue;
            path.push_back(y);
            walk(y, p * q, depth + 1);
            path.pop_back();
        }
    }
};

} // namespace

TrajectoryDistribution enumerate_trajectories(const Mdp& mdp, const Policy& policy, StateId x0,
                                              double cutoff, long max_trajectories) {
    if (x0 < 0 || x0 >= mdp.num_states())
        throw InvariantError("start state " + std::to_string(x0) + " out of range");
    if (mdp.is_absorbing(x0))
        throw InvariantError("cannot enumerate trajectories from absorbing state " +
                             std::to_string(x0));
    if (!(cutoff > 0.0))
        throw InvariantError("enumeration cutoff must be positive");
    if (!absorption_certain(mdp, policy.prob, x0))
        throw NumericalError("absorption is not certain from state " + std::to_string(x0));

    // Smallest horizon H with residual transient mass <= cutoff.
    const auto transient = mdp.transient_states();
    const int nt = static_cast<int>(transient.size());
    std::vector<int> index(static_cast<std::size_t>(mdp.num_states()), -1);
    for (int i = 0; i < nt; ++i) index[transient[i]] = i;
    Matrix q(nt, nt);
    for (int i = 0; i < nt; ++i)
        for (int j = 0; j < nt; ++j) q(i, j) = policy.prob(transient[i], transient[j]);
    Eigen::RowVectorXd mass = Eigen::RowVectorXd::Zero(nt);
    mass[index[x0]] = 1.0;
    int horizon = 0;
    constexpr int kHorizonLimit = 1000000;
    while (mass.sum() > cutoff) {
        mass *= q;
        ++horizon;
        if (horizon > kHorizonLimit)
            throw CapacityError("horizon search exceeded " + std::to_string(kHorizonLimit) +
                                " steps; residual mass is not vanishing");
    }

    Enumerator walker{mdp, policy, horizon, max_trajectories, {}, {}, 0.0, {x0}};
    walker.walk(x0, 1.0, 0);
    TrajectoryDistribution dist;
    dist.support = std::move(walker.found);
    dist.prob = Eigen::Map<const Vector>(walker.probs.data(),
                                         static_cast<Eigen::Index>(walker.probs.size()));
    dist.tail_mass = walker.tail;
    dist.horizon_cap = horizon;
    dist.cutoff = cutoff;
    // ascending-neighbor DFS emits complete (prefix-free) paths in
    // lexicographic order already; assert rather than re-sort
    if (!std::is_sorted(dist.support.begin(), dist.support.end()))
        throw NumericalError("internal: enumeration order is not lexicographic");
    return dist;
}

TrajectoryDistribution gibbs_optimal(const TrajectoryDistribution& prior, const Mdp& mdp,
                                     double beta) {
    if (prior.support.empty()) throw InvariantError("gibbs reweighting of an empty support");
    if (!(beta > 0.0)) throw InvariantError("beta must be positive");
    Vector w(prior.size());
    for (Eigen::Index i = 0; i < prior.size(); ++i)
        w[i] = std::log(prior.prob[i]) + beta * trajectory_return(mdp, prior.support[i]);
    const double log_z = log_sum_exp(w);
    TrajectoryDistribution gibbs;
    gibbs.support = prior.support;
    gibbs.prob = (w.array() - log_z).exp();
    gibbs.prob /= gibbs.prob.sum(); // exact unit mass over the truncated support
    gibbs.tail_mass = 0.0;
    gibbs.horizon_cap = prior.horizon_cap;
    gibbs.cutoff = prior.cutoff;
    return gibbs;
}

double gibbs_truncation_bias_bound(const TrajectoryDistribution& prior, const Mdp& mdp,
                                   double beta) {
    if (prior.support.empty()) return 0.0;
    double max_return = -std::numeric_limits<double>::infinity();
    for (const auto& traj : prior.support)
        max_return = std::max(max_return, trajectory_return(mdp, traj));
    return prior.tail_mass * std::exp(beta * max_return);
}

double optimal_free_energy(const TrajectoryDistribution& prior, const Mdp& mdp, double beta) {
    if (prior.support.empty()) throw InvariantError("empty support");
    if (!(beta > 0.0)) throw InvariantError("beta must be positive");
    Vector w(prior.size());
    for (Eigen::Index i = 0; i < prior.size(); ++i)
        w[i] = std::log(prior.prob[i]) + beta * trajectory_return(mdp, prior.support[i]);
    return -log_sum_exp(w) / beta;
}

double free_energy(const TrajectoryDistribution& dist, const Mdp& mdp, double beta,
                   EntropyMode mode, const TrajectoryDistribution* prior) {
    if (!(beta > 0.0)) throw InvariantError("beta must be positive");
    if (mode == EntropyMode::relative && prior == nullptr)
        throw InvariantError("relative free energy requires a prior distribution");
    const bool aligned = mode == EntropyMode::relative && prior != nullptr &&
                         prior->support == dist.support;
    double energy = 0.0;
    double entropy_term = 0.0;
    for (Eigen::Index i = 0; i < dist.size(); ++i) {
        const double d = dist.prob[i];
        if (d <= 0.0) continue;
        energy -= d * trajectory_return(mdp, dist.support[i]);
        if (mode == EntropyMode::plain) {
            entropy_term += d * std::log(d);
        } else {
            double reference;
            if (aligned) {
                reference = prior->prob[i];
            } else {
                const auto at = prior->index_of(dist.support[i]);
                reference = at ? prior->prob[*at] : 0.0;
            }
            if (reference <= 0.0)
                throw InvariantError("distribution support escapes the prior support");
            entropy_term += d * std::log(d / reference);
        }
    }
    return energy + entropy_term / beta;
}

double trajectory_entropy(const TrajectoryDistribution& dist) {
    const double mass = dist.total_mass();
    if (mass <= 0.0) return 0.0;
    double h = 0.0;
    for (Eigen::Index i = 0; i < dist.size(); ++i) {
        const double q = dist.prob[i] / mass;
        if (q > 0.0) h -= q * std::log(q);
    }
    return h;
}

Policy marginal_transition_policy(const TrajectoryDistribution& dist, const Mdp& mdp) {
    const int n = mdp.num_states();
    Matrix counts = Matrix::Zero(n, n);
    Vector sources = Vector::Zero(n);
    for (Eigen::Index i = 0; i < dist.size(); ++i) {
        const double d = dist.prob[i];
        if (d <= 0.0) continue;
        const auto& states = dist.support[i].states;
        for (std::size_t t = 0; t + 1 < states.size(); ++t) {
            counts(states[t], states[t + 1]) += d;
            sources[states[t]] += d;
        }
    }
    Policy policy{Matrix::Zero(n, n)};
    for (StateId x = 0; x < n; ++x) {
        if (sources[x] > 0.0) {
            double row_sum = 0.0;
            for (StateId y : mdp.out[x]) row_sum += counts(x, y);
            for (StateId y : mdp.out[x]) policy.prob(x, y) = counts(x, y) / row_sum;
        } else {
            const double p = 1.0 / static_cast<double>(mdp.out_degree(x));
            for (StateId y : mdp.out[x]) policy.prob(x, y) = p;
        }
    }
    return policy;
}

Policy gibbs_marginal_policy(const Mdp& mdp, const Policy& prior, double beta) {
    if (!(beta > 0.0)) throw InvariantError("beta must be positive");
    const int n = mdp.num_states();
    const auto transient = mdp.transient_states();
    const int nt = static_cast<int>(transient.size());
    if (mdp.absorbing_states().empty())
        throw NumericalError("gibbs marginal policy needs at least one absorbing state");

    // Desirability z: z(g) = exp(beta R(g)); transient rows solve the linear
    // system z_T = exp(beta R) .* (Q z_T + S z_A).
    Vector z = Vector::Zero(n);
    for (StateId g : mdp.absorbing_states()) z[g] = std::exp(beta * mdp.reward[g]);
    if (nt > 0) {
        Matrix system = Matrix::Identity(nt, nt);
        Vector rhs = Vector::Zero(nt);
        for (int i = 0; i < nt; ++i) {
            const StateId x = transient[i];
            const double boltzmann = std::exp(beta * mdp.reward[x]);
            for (StateId y : mdp.out[x]) {
                const double p = prior.prob(x, y);
                if (p <= 0.0) continue;
                if (mdp.is_absorbing(y)) {
                    rhs[i] += boltzmann * p * z[y];
                } else {
                    const int j = static_cast<int>(
                        std::lower_bound(transient.begin(), transient.end(), y) -
                        transient.begin());
                    system(i, j) -= boltzmann * p;
                }
            }
        }
        const Vector z_transient = Eigen::PartialPivLU<Matrix>(system).solve(rhs);
        for (int i = 0; i < nt; ++i) z[transient[i]] = z_transient[i];
    }
    for (StateId x = 0; x < n; ++x)
        if (!std::isfinite(z[x]) || z[x] <= 0.0)
            throw NumericalError("desirability is not finite and positive at state " +
                                 std::to_string(x) + "; Gibbs marginal undefined");

    Policy policy{Matrix::Zero(n, n)};
    for (StateId x = 0; x < n; ++x) {
        if (mdp.is_absorbing(x)) {
            policy.prob(x, x) = 1.0;
            continue;
        }
        double row_sum = 0.0;
        for (StateId y : mdp.out[x]) row_sum += prior.prob(x, y) * z[y];
        for (StateId y : mdp.out[x]) policy.prob(x, y) = prior.prob(x, y) * z[y] / row_sum;
    }
    return policy;
}

} // namespace fph
