#pragma once

#include "fph/hierarchy.hpp"
#include "fph/oracle.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace fph {

/// All run parameters, mirrored 1:1 by the CLI flags. Unset entropy_mode and
/// score_policy resolve to per-command defaults: trajectory-level commands
/// run relative (the Gibbs fixed point is exact there), the hierarchy
/// pull-back runs plain, and task graphs are scored under the Gibbs marginal.
struct RunConfig {
    double beta = 1.0;
    std::optional<EntropyMode> entropy_mode;
    RankingMode ranking_mode = RankingMode::magnitude;
    bool kd_symmetric = false;
    double epsilon = 1e-9;
    double step = 0.01;
    long max_steps = 100000;
    double tol = 1e-8;
    std::uint64_t seed = 42;
    int n_random_orders = 100;
    Weighting weighting = Weighting::uniform;
    std::optional<ScorePolicy> score_policy;
    bool shortest_only = false;
};

/// Throws InvariantError on out-of-range values (non-positive beta, epsilon,
/// step, tol, max_steps, n_random_orders).
void validate_config(const RunConfig& config);

/// JSON round trip; parsing rejects unknown keys.
RunConfig parse_config(const std::string& text, const std::string& origin = "<string>");
RunConfig load_config(const std::string& path);
std::string config_to_json(const RunConfig& config);

EntropyMode parse_entropy_mode(const std::string& name);
RankingMode parse_ranking_mode(const std::string& name);
Weighting parse_weighting(const std::string& name);
ScorePolicy parse_score_policy(const std::string& name);
std::string to_string(EntropyMode mode);
std::string to_string(RankingMode mode);
std::string to_string(Weighting weighting);
std::string to_string(ScorePolicy policy);

} // namespace fph
