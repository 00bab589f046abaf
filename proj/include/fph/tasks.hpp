#pragma once

#include "fph/mdp.hpp"

#include <compare>
#include <vector>

namespace fph {

/// A shortest-path planning task between two distinct states.
struct PlanningTask {
    StateId start = 0;
    StateId goal = 0;

    auto operator<=>(const PlanningTask&) const = default;
};

/// All ordered (start, goal) pairs of distinct states with the goal reachable
/// from the start along the graph's edges, in lexicographic order.
std::vector<PlanningTask> all_tasks(const Mdp& mdp);

} // namespace fph
