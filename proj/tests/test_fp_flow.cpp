#include <doctest.h>

#include "corpus.hpp"

#include "fph/errors.hpp"
#include "fph/fp_flow.hpp"

#include <cmath>

using namespace fph;
using namespace fph::test;

namespace {

TrajectoryDistribution prior_dist(const Mdp& mdp, double cutoff = 1e-12) {
    return enumerate_trajectories(mdp, uniform_prior_policy(mdp), 0, cutoff);
}

// Reference evaluation of the flux through the public kernel, pair by pair.
Vector naive_rhs(const TrajectoryDistribution& dist, const Mdp& mdp, double beta,
                 EntropyMode mode, const TrajectoryDistribution* prior) {
    const GeneralizedPotential pot = generalized_potential(dist, mdp, beta, mode, prior);
    Vector rhs = Vector::Zero(dist.size());
    for (Eigen::Index i = 0; i < dist.size(); ++i)
        for (Eigen::Index j = 0; j < dist.size(); ++j) {
            if (i == j) continue;
            rhs[i] += flux_kernel(dist, pot, dist.support[i], dist.support[j]) *
                      (pot.values[j] - pot.values[i]);
        }
    return rhs;
}

} // namespace

TEST_CASE("generalized potential on G3") {
    const Mdp mdp = g3();
    const TrajectoryDistribution prior = prior_dist(mdp);
    const GeneralizedPotential plain =
        generalized_potential(prior, mdp, 1.0, EntropyMode::plain);
    // support order is lexicographic: (0,1,2) before (0,2)
    CHECK(plain.values[0] == doctest::Approx(2.0 + std::log(0.5)).epsilon(1e-12));
    CHECK(plain.values[1] == doctest::Approx(1.0 + std::log(0.5)).epsilon(1e-12));

    // at the gibbs optimum the relative potential is flat at the optimal value
    const TrajectoryDistribution gibbs = gibbs_optimal(prior, mdp, 1.0);
    const GeneralizedPotential relative =
        generalized_potential(gibbs, mdp, 1.0, EntropyMode::relative, &prior);
    const double optimum = optimal_free_energy(prior, mdp, 1.0);
    for (Eigen::Index i = 0; i < relative.values.size(); ++i)
        CHECK(relative.values[i] == doctest::Approx(optimum).epsilon(1e-10));

    // zero rewards, uniform over k trajectories, plain mode: constant log(1/k)
    const Mdp flat = make_mdp(3, {{0, 1}, {0, 2}, {1, 2}, {2, 2}}, Vector::Zero(3), {2}, 0);
    const TrajectoryDistribution flat_prior = prior_dist(flat);
    const GeneralizedPotential flat_pot =
        generalized_potential(flat_prior, flat, 1.0, EntropyMode::plain);
    for (Eigen::Index i = 0; i < flat_pot.values.size(); ++i)
        CHECK(flat_pot.values[i] == doctest::Approx(std::log(0.5)).epsilon(1e-12));

    TrajectoryDistribution zeroed = prior;
    zeroed.prob[0] = 0.0;
    zeroed.tail_mass = 0.5;
    CHECK_THROWS_AS(generalized_potential(zeroed, mdp, 1.0, EntropyMode::plain),
                    InvariantError);
}

TEST_CASE("flux kernel picks the density at the higher-potential end") {
    const Mdp mdp = g3();
    const TrajectoryDistribution prior = prior_dist(mdp);
    const GeneralizedPotential pot = generalized_potential(prior, mdp, 1.0, EntropyMode::plain);
    const Trajectory direct{{0, 2}};
    const Trajectory detour{{0, 1, 2}};
    CHECK(flux_kernel(prior, pot, direct, detour) == 0.5);
    CHECK(flux_kernel(prior, pot, detour, direct) == 0.5); // symmetric selection

    // equal potentials fall back to the smaller density
    const Mdp loop = make_mdp(2, {{0, 0}, {0, 1}, {1, 1}}, Vector::Zero(2), {1}, 0);
    const TrajectoryDistribution loop_prior = prior_dist(loop, 1e-4);
    const GeneralizedPotential loop_pot =
        generalized_potential(loop_prior, loop, 1.0, EntropyMode::relative, &loop_prior);
    // relative potential at the prior with zero rewards is identically zero
    for (Eigen::Index i = 0; i < loop_pot.values.size(); ++i) CHECK(loop_pot.values[i] == 0.0);
    CHECK(flux_kernel(loop_prior, loop_pot, loop_prior.support[0], loop_prior.support[1]) ==
          std::min(loop_prior.prob[0], loop_prior.prob[1]));

    CHECK_THROWS_AS(flux_kernel(prior, pot, Trajectory{{1, 2}}, direct), InvariantError);
}

TEST_CASE("fp_rhs matches the kernel-by-kernel evaluation") {
    Rng rng(5);
    for (const Mdp& mdp : absorbing_corpus()) {
        const TrajectoryDistribution prior = prior_dist(mdp, 1e-9);
        for (const EntropyMode mode : {EntropyMode::plain, EntropyMode::relative}) {
            for (int trial = 0; trial < 5; ++trial) {
                const TrajectoryDistribution dist = random_distribution(prior, rng);
                const Vector fast = fp_rhs(dist, mdp, 1.0, mode, &prior);
                const Vector slow = naive_rhs(dist, mdp, 1.0, mode, &prior);
                CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-12);
            }
        }
    }
}

TEST_CASE("fp_rhs conserves total mass") {
    Rng rng(6);
    for (const Mdp& mdp : absorbing_corpus()) {
        const TrajectoryDistribution prior = prior_dist(mdp, 1e-9);
        for (int trial = 0; trial < 20; ++trial) {
            const TrajectoryDistribution dist = random_distribution(prior, rng);
            const Vector rhs = fp_rhs(dist, mdp, 1.0, EntropyMode::plain);
            double total = 0.0;
            for (Eigen::Index i = 0; i < rhs.size(); ++i) total += rhs[i];
            CHECK(std::abs(total) <= 1e-12);
        }
    }
}

TEST_CASE("fp_rhs vanishes at the gibbs optimum in relative mode") {
    for (const Mdp& mdp : absorbing_corpus()) {
        const TrajectoryDistribution prior = prior_dist(mdp, 1e-9);
        const TrajectoryDistribution gibbs = gibbs_optimal(prior, mdp, 1.0);
        const Vector rhs = fp_rhs(gibbs, mdp, 1.0, EntropyMode::relative, &prior);
        CHECK(rhs.cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("fp_rhs drives mass toward higher returns on G3") {
    const Mdp mdp = g3();
    const TrajectoryDistribution prior = prior_dist(mdp);
    const Vector rhs = fp_rhs(prior, mdp, 1.0, EntropyMode::plain);
    CHECK(rhs[1] > 0.0); // (0,2), the higher-return path, gains
    CHECK(rhs[0] < 0.0); // (0,1,2) loses
    CHECK(rhs[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("fp_rhs capacity guard") {
    const Mdp mdp = g3();
    const TrajectoryDistribution prior = prior_dist(mdp);
    CHECK_THROWS_AS(fp_rhs(prior, mdp, 1.0, EntropyMode::plain, nullptr, 1), CapacityError);
}

TEST_CASE("gamma gain/loss pair") {
    const Mdp mdp = g3();
    const TrajectoryDistribution prior = prior_dist(mdp);
    const GeneralizedPotential pot = generalized_potential(prior, mdp, 1.0, EntropyMode::plain);
    const Trajectory direct{{0, 2}};
    const Trajectory detour{{0, 1, 2}};
    CHECK(gamma_plus(pot, direct, detour) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gamma_minus(pot, direct, detour) == 0.0);

    // antisymmetry pairing is exact: both cases read the same difference
    Rng rng(7);
    for (const Mdp& graph : absorbing_corpus()) {
        const TrajectoryDistribution base = prior_dist(graph, 1e-9);
        const TrajectoryDistribution dist = random_distribution(base, rng);
        const GeneralizedPotential p =
            generalized_potential(dist, graph, 1.0, EntropyMode::plain);
        for (Eigen::Index i = 0; i < dist.size(); ++i)
            for (Eigen::Index j = 0; j < dist.size(); ++j)
                CHECK(gamma_plus(p, dist.support[i], dist.support[j]) ==
                      gamma_minus(p, dist.support[j], dist.support[i]));
    }
}

TEST_CASE("total flux in gamma form is exactly zero") {
    Rng rng(8);
    for (const Mdp& mdp : absorbing_corpus()) {
        const TrajectoryDistribution prior = prior_dist(mdp, 1e-9);
        for (int trial = 0; trial < 10; ++trial) {
            const TrajectoryDistribution dist = random_distribution(prior, rng);
            CHECK(total_flux_gamma(dist, mdp, 1.0, EntropyMode::plain) == 0.0);
        }
    }
    // the two routes to the total agree on G3
    const Mdp mdp = g3();
    const TrajectoryDistribution prior = prior_dist(mdp);
    double rhs_total = 0.0;
    const Vector rhs = fp_rhs(prior, mdp, 1.0, EntropyMode::plain);
    for (Eigen::Index i = 0; i < rhs.size(); ++i) rhs_total += rhs[i];
    CHECK(std::abs(total_flux_gamma(prior, mdp, 1.0, EntropyMode::plain) - rhs_total) <= 1e-12);

    // a point mass has no pairs to exchange flux
    TrajectoryDistribution point;
    point.support = {Trajectory{{0, 2}}};
    point.prob = Vector::Constant(1, 1.0);
    CHECK(total_flux_gamma(point, mdp, 1.0, EntropyMode::plain) == 0.0);
}

TEST_CASE("euler step with h = 0 is the identity") {
    const Mdp mdp = g3();
    const TrajectoryDistribution prior = prior_dist(mdp);
    const FlowState flow = make_flow_state(prior, mdp, 1.0, EntropyMode::relative);
    const FlowState same = euler_step(flow, 0.0, mdp, 1.0, EntropyMode::relative);
    CHECK(same.dist.prob == flow.dist.prob);
    CHECK(same.tau == flow.tau);
    CHECK(same.step_count == flow.step_count);
}

TEST_CASE("euler step at the gibbs optimum barely moves") {
    const Mdp mdp = g3();
    const TrajectoryDistribution prior = prior_dist(mdp);
    const TrajectoryDistribution gibbs = gibbs_optimal(prior, mdp, 1.0);
    const FlowState flow = make_flow_state(gibbs, mdp, 1.0, EntropyMode::relative, &prior);
    const FlowState next = euler_step(flow, 0.01, mdp, 1.0, EntropyMode::relative);
    CHECK((next.dist.prob - gibbs.prob).lpNorm<1>() <= 1e-10);
}

TEST_CASE("free energy strictly decreases on the first plain step from the prior") {
    const Mdp mdp = g3();
    const TrajectoryDistribution prior = prior_dist(mdp);
    const FlowState flow = make_flow_state(prior, mdp, 1.0, EntropyMode::plain);
    const FlowState next = euler_step(flow, 0.01, mdp, 1.0, EntropyMode::plain);
    CHECK(next.trace.back().free_energy < flow.trace.back().free_energy);
}

TEST_CASE("absurd step sizes collapse with a stiffness error") {
    const Mdp mdp = g3();
    const TrajectoryDistribution prior = prior_dist(mdp);
    const FlowState flow = make_flow_state(prior, mdp, 1.0, EntropyMode::relative);
    CHECK_THROWS_AS(euler_step(flow, 1e30, mdp, 1.0, EntropyMode::relative), NumericalError);
}

TEST_CASE("positivity-preserving halving keeps entries positive") {
    // steep potential spread forces halvings on the first step
    const Mdp mdp = self_loop();
    const TrajectoryDistribution prior = prior_dist(mdp, 1e-9);
    const FlowState flow = make_flow_state(prior, mdp, 1.0, EntropyMode::relative);
    const FlowState next = euler_step(flow, 0.5, mdp, 1.0, EntropyMode::relative);
    CHECK(next.dist.prob.minCoeff() > 0.0);
    CHECK(next.tau < 0.5); // the step had to shrink
    validate_distribution(next.dist);
}

TEST_CASE("simulate_flow reaches the gibbs optimum in relative mode") {
    const Mdp mdp = g3();
    const TrajectoryDistribution prior = prior_dist(mdp);
    const FlowState flow =
        simulate_flow(prior, mdp, 1.0, EntropyMode::relative, 0.05, 100000, 1e-8);
    CHECK(flow.converged);
    const TrajectoryDistribution gibbs = gibbs_optimal(prior, mdp, 1.0);
    CHECK((flow.dist.prob - gibbs.prob).lpNorm<1>() <= 1e-4);
}

TEST_CASE("a prior that already is the optimum converges immediately") {
    // with zero rewards the gibbs optimum equals the prior
    const Mdp flat = make_mdp(3, {{0, 1}, {0, 2}, {1, 2}, {2, 2}}, Vector::Zero(3), {2}, 0);
    const TrajectoryDistribution prior = prior_dist(flat);
    const FlowState flow =
        simulate_flow(prior, flat, 1.0, EntropyMode::relative, 0.05, 100000, 1e-8);
    CHECK(flow.converged);
    CHECK(flow.step_count <= 2);
}

TEST_CASE("energy traces are non-increasing along every corpus flow") {
    for (const Mdp& mdp : absorbing_corpus()) {
        const TrajectoryDistribution prior = prior_dist(mdp, 1e-9);
        const FlowState flow =
            simulate_flow(prior, mdp, 1.0, EntropyMode::relative, 0.01, 50000, 1e-8);
        for (std::size_t k = 1; k < flow.trace.size(); ++k)
            CHECK(flow.trace[k].free_energy <= flow.trace[k - 1].free_energy + 1e-12);
        validate_distribution(flow.dist);
        CHECK(flow.dist.prob.minCoeff() >= 0.0);
    }
}

TEST_CASE("non-convergence is flagged, not thrown") {
    const Mdp mdp = g3();
    const TrajectoryDistribution prior = prior_dist(mdp);
    const FlowState flow = simulate_flow(prior, mdp, 1.0, EntropyMode::relative, 0.001, 3, 1e-8);
    CHECK_FALSE(flow.converged);
    CHECK(flow.step_count == 3);
}
