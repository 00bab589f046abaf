#pragma once

#include "fph/hierarchy.hpp"
#include "fph/tasks.hpp"
#include "fph/trajectories.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fph {

/// How initial candidate paths are weighted.
enum class Weighting { uniform, prior };

/// Surviving candidate paths for one task with their normalized weights.
struct CandidateSet {
    std::vector<Trajectory> candidates; // simple start->goal paths, lexicographic
    Vector weights;                     // normalized to 1
    int shortest_len = 0;               // transitions on the shortest candidate
};

/// The one shortest path the oracle answers about: breadth-first distances
/// with the lexicographically smallest predecessor breaking ties.
Trajectory canonical_shortest_path(const Mdp& mdp, const PlanningTask& task);

/// All simple start->goal paths (optionally only the shortest ones), weighted
/// uniformly or by prior-policy path probability. Throws CapacityError past
/// `cap` paths.
CandidateSet initial_candidates(const Mdp& mdp, const PlanningTask& task, Weighting weighting,
                                bool shortest_only = false, long cap = kDefaultTrajectoryCap);

/// One oracle answer at `state`: candidates that visit it but deviate from
/// the canonical shortest path are removed (all of them when the state is off
/// that path); weights are renormalized. The canonical path always survives.
CandidateSet oracle_query(const CandidateSet& cs, const Mdp& mdp, const PlanningTask& task,
                          StateId state);

/// Entropy of the surviving candidate distribution after 0, 1, ... queries.
struct EntropyCurve {
    std::vector<double> entropy; // index = query count, length = n states
    std::string order_label;
    PlanningTask task;
};

/// Apply queries in `order` (a permutation of all states except the goal),
/// recording entropy after each; once it hits zero the curve is padded.
EntropyCurve run_order(const Mdp& mdp, const PlanningTask& task,
                       const std::vector<StateId>& order, Weighting weighting,
                       bool shortest_only = false);

struct TaskCurves {
    PlanningTask task;
    int shortest_len = 0;
    std::vector<double> hierarchical;           // entropy per query count
    std::vector<std::vector<double>> randoms;   // one curve per random order
};

struct ExperimentResult {
    std::vector<TaskCurves> tasks;
    std::vector<double> hierarchical_mean;              // task-averaged
    std::vector<double> random_mean;                    // task- and order-averaged
    std::map<int, std::vector<double>> hierarchical_by_len;
    std::map<int, std::vector<double>> random_by_len;
};

/// Full oracle-planner experiment: for every task, the hierarchy-ranked query
/// order against n_random_orders seeded Fisher-Yates permutations.
/// Deterministic for fixed (mdp, hierarchy, seed, config).
ExperimentResult experiment(const Mdp& mdp, const HierarchyScore& hierarchy,
                            int n_random_orders, std::uint64_t seed, Weighting weighting,
                            bool shortest_only = false);

} // namespace fph
