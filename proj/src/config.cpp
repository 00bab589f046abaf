#include "fph/config.hpp"
#include "fph/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace fph {

namespace {

using nlohmann::ordered_json;

} // namespace

EntropyMode parse_entropy_mode(const std::string& name) {
    if (name == "plain") return EntropyMode::plain;
    if (name == "relative") return EntropyMode::relative;
    throw ParseError("unknown entropy mode \"" + name + "\" (plain|relative)");
}

RankingMode parse_ranking_mode(const std::string& name) {
    if (name == "signed") return RankingMode::signed_value;
    if (name == "magnitude") return RankingMode::magnitude;
    throw ParseError("unknown ranking mode \"" + name + "\" (signed|magnitude)");
}

Weighting parse_weighting(const std::string& name) {
    if (name == "uniform") return Weighting::uniform;
    if (name == "prior") return Weighting::prior;
    throw ParseError("unknown weighting \"" + name + "\" (uniform|prior)");
}

ScorePolicy parse_score_policy(const std::string& name) {
    if (name == "prior") return ScorePolicy::prior;
    if (name == "gibbs") return ScorePolicy::gibbs;
    throw ParseError("unknown score policy \"" + name + "\" (prior|gibbs)");
}

std::string to_string(EntropyMode mode) {
    return mode == EntropyMode::plain ? "plain" : "relative";
}

std::string to_string(RankingMode mode) {
    return mode == RankingMode::signed_value ? "signed" : "magnitude";
}

std::string to_string(Weighting weighting) {
    return weighting == Weighting::uniform ? "uniform" : "prior";
}

std::string to_string(ScorePolicy policy) {
    return policy == ScorePolicy::prior ? "prior" : "gibbs";
}

void validate_config(const RunConfig& config) {
    if (!(config.beta > 0.0)) throw InvariantError("beta must be positive");
    if (!(config.epsilon > 0.0)) throw InvariantError("epsilon must be positive");
    if (!(config.step > 0.0)) throw InvariantError("step must be positive");
    if (!(config.tol > 0.0)) throw InvariantError("tol must be positive");
    if (config.max_steps < 1) throw InvariantError("max_steps must be at least 1");
    if (config.n_random_orders < 1) throw InvariantError("n_random_orders must be at least 1");
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& err) {
        throw ParseError(origin + ": " + err.what());
    }
    if (!doc.is_object()) throw ParseError(origin + ": config must be a JSON object");
    const std::set<std::string> known = {
        "beta",      "entropy_mode", "ranking_mode",    "kd_symmetric", "epsilon",
        "step",      "max_steps",    "tol",             "seed",         "n_random_orders",
        "weighting", "score_policy", "shortest_only"};
    for (const auto& item : doc.items())
        if (!known.contains(item.key()))
            throw ParseError(origin + ": unknown config key \"" + item.key() + "\"");

    RunConfig config;
    try {
        if (doc.contains("beta")) config.beta = doc["beta"].get<double>();
        if (doc.contains("entropy_mode"))
            config.entropy_mode = parse_entropy_mode(doc["entropy_mode"].get<std::string>());
        if (doc.contains("ranking_mode"))
            config.ranking_mode = parse_ranking_mode(doc["ranking_mode"].get<std::string>());
        if (doc.contains("kd_symmetric")) config.kd_symmetric = doc["kd_symmetric"].get<bool>();
        if (doc.contains("epsilon")) config.epsilon = doc["epsilon"].get<double>();
        if (doc.contains("step")) config.step = doc["step"].get<double>();
        if (doc.contains("max_steps")) config.max_steps = doc["max_steps"].get<long>();
        if (doc.contains("tol")) config.tol = doc["tol"].get<double>();
        if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
        if (doc.contains("n_random_orders"))
            config.n_random_orders = doc["n_random_orders"].get<int>();
        if (doc.contains("weighting"))
            config.weighting = parse_weighting(doc["weighting"].get<std::string>());
        if (doc.contains("score_policy"))
            config.score_policy = parse_score_policy(doc["score_policy"].get<std::string>());
        if (doc.contains("shortest_only"))
            config.shortest_only = doc["shortest_only"].get<bool>();
    } catch (const nlohmann::json::exception& err) {
        throw ParseError(origin + ": " + err.what());
    }
    validate_config(config);
    return config;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open config file " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path);
}

std::string config_to_json(const RunConfig& config) {
    ordered_json doc;
    doc["beta"] = config.beta;
    if (config.entropy_mode) doc["entropy_mode"] = to_string(*config.entropy_mode);
    doc["ranking_mode"] = to_string(config.ranking_mode);
    doc["kd_symmetric"] = config.kd_symmetric;
    doc["epsilon"] = config.epsilon;
    doc["step"] = config.step;
    doc["max_steps"] = config.max_steps;
    doc["tol"] = config.tol;
    doc["seed"] = config.seed;
    doc["n_random_orders"] = config.n_random_orders;
    doc["weighting"] = to_string(config.weighting);
    if (config.score_policy) doc["score_policy"] = to_string(*config.score_policy);
    doc["shortest_only"] = config.shortest_only;
    return doc.dump(2) + "\n";
}

} // namespace fph
