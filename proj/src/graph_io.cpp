#include "fph/graph_io.hpp"
#include "fph/errors.hpp"
#include "fph/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

namespace fph {

namespace {

using nlohmann::ordered_json;

void reject_unknown_fields(const ordered_json& value, const std::set<std::string>& known,
                           const std::string& where) {
    for (const auto& item : value.items())
        if (!known.contains(item.key()))
            throw ParseError("unknown field \"" + item.key() + "\" in " + where);
}

} // namespace

Mdp parse_graph(const std::string& text, const std::string& origin) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& err) {
        throw ParseError(origin + ": " + err.what());
    }
    try {
        if (!doc.is_object()) throw ParseError(origin + ": top level must be an object");
        reject_unknown_fields(doc, {"schema_version", "states", "edges", "start"}, origin);
        if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer())
            throw ParseError(origin + ": missing integer schema_version");
        if (doc["schema_version"].get<int>() != kGraphSchemaVersion)
            throw ParseError(origin + ": unsupported schema_version " +
                             doc["schema_version"].dump());
        if (!doc.contains("states") || !doc["states"].is_array() || doc["states"].empty())
            throw ParseError(origin + ": missing non-empty states array");
        if (!doc.contains("edges") || !doc["edges"].is_array())
            throw ParseError(origin + ": missing edges array");

        const int n = static_cast<int>(doc["states"].size());
        Vector reward(n);
        std::vector<StateId> absorbing;
        std::vector<bool> seen(static_cast<std::size_t>(n), false);
        for (const auto& state : doc["states"]) {
            if (!state.is_object()) throw ParseError(origin + ": state entries must be objects");
            reject_unknown_fields(state, {"id", "reward", "absorbing"}, origin + " state entry");
            if (!state.contains("id") || !state["id"].is_number_integer())
                throw ParseError(origin + ": state entry missing integer id");
            const int id = state["id"].get<int>();
            if (id < 0 || id >= n)
                throw ParseError(origin + ": state ids must be dense 0.." + std::to_string(n - 1) +
                                 ", got " + std::to_string(id));
            if (seen[id]) throw ParseError(origin + ": duplicate state id " + std::to_string(id));
            seen[id] = true;
            if (!state.contains("reward") || !state["reward"].is_number())
                throw ParseError(origin + ": state " + std::to_string(id) +
                                 " missing numeric reward");
            reward[id] = state["reward"].get<double>();
            if (state.contains("absorbing")) {
                if (!state["absorbing"].is_boolean())
                    throw ParseError(origin + ": absorbing flag must be boolean");
                if (state["absorbing"].get<bool>()) absorbing.push_back(id);
            }
        }

        std::vector<std::pair<StateId, StateId>> edges;
        for (const auto& edge : doc["edges"]) {
            if (!edge.is_array() || edge.size() != 2 || !edge[0].is_number_integer() ||
                !edge[1].is_number_integer())
                throw ParseError(origin + ": edges must be [from, to] integer pairs");
            edges.emplace_back(edge[0].get<int>(), edge[1].get<int>());
        }

        std::optional<StateId> start;
        if (doc.contains("start")) {
            if (!doc["start"].is_number_integer())
                throw ParseError(origin + ": start must be an integer state id");
            start = doc["start"].get<int>();
        }
        return make_mdp(n, edges, reward, absorbing, start);
    } catch (const nlohmann::json::exception& err) {
        throw ParseError(origin + ": " + err.what());
    }
}

Mdp load_graph(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open graph file " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_graph(buffer.str(), path);
}

std::string graph_to_json(const Mdp& mdp) {
    ordered_json doc;
    doc["schema_version"] = kGraphSchemaVersion;
    doc["states"] = ordered_json::array();
    for (StateId x = 0; x < mdp.num_states(); ++x) {
        ordered_json state;
        state["id"] = x;
        state["reward"] = mdp.reward[x];
        state["absorbing"] = static_cast<bool>(mdp.absorbing[x]);
        doc["states"].push_back(state);
    }
    doc["edges"] = ordered_json::array();
    for (StateId x = 0; x < mdp.num_states(); ++x)
        for (StateId y : mdp.out[x]) doc["edges"].push_back(ordered_json::array({x, y}));
    if (mdp.start) doc["start"] = *mdp.start;
    return doc.dump(2) + "\n";
}

void save_graph(const Mdp& mdp, const std::string& path) {
    const std::string text = graph_to_json(mdp);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ParseError("cannot write " + tmp);
        out << text;
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw ParseError("cannot rename " + tmp + " to " + path);
}

namespace {

// Degree-sequence room via the configuration model: pair stubs uniformly,
// retry until the multigraph is simple and connected.
std::vector<std::pair<int, int>> room_edges(const std::vector<int>& degrees, Rng& rng,
                                            int max_attempts) {
    const int m = static_cast<int>(degrees.size());
    std::vector<int> stubs;
    for (int v = 0; v < m; ++v)
        for (int k = 0; k < degrees[v]; ++k) stubs.push_back(v);

    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        std::vector<int> shuffled = stubs;
        rng.shuffle(shuffled);
        std::set<std::pair<int, int>> edges;
        bool simple = true;
        for (std::size_t i = 0; i + 1 < shuffled.size(); i += 2) {
            int a = shuffled[i];
            int b = shuffled[i + 1];
            if (a == b) {
                simple = false;
                break;
            }
            if (a > b) std::swap(a, b);
            if (!edges.insert({a, b}).second) {
                simple = false;
                break;
            }
        }
        if (!simple) continue;
        // connectivity over the undirected room
        std::vector<std::vector<int>> adj(static_cast<std::size_t>(m));
        for (const auto& [a, b] : edges) {
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
        std::vector<bool> reached(static_cast<std::size_t>(m), false);
        std::deque<int> frontier{0};
        reached[0] = true;
        int count = 1;
        while (!frontier.empty()) {
            const int x = frontier.front();
            frontier.pop_front();
            for (int y : adj[x])
                if (!reached[y]) {
                    reached[y] = true;
                    ++count;
                    frontier.push_back(y);
                }
        }
        if (count == m) return {edges.begin(), edges.end()};
    }
    throw NumericalError("could not sample a simple connected room after " +
                         std::to_string(max_attempts) + " attempts");
}

} // namespace

TwoRoomGraph generate_two_room(int room_size, int degree, std::uint64_t seed) {
    if (room_size < 2 || degree < 2)
        throw InvariantError("two-room graph needs room_size >= 2 and degree >= 2");
    // Bottleneck at in-room degree (degree - 1) keeps every total degree equal
    // to `degree` once the bridge is added; that needs an even in-room degree
    // sum and enough neighbors for the full-degree nodes.
    const bool constant_degree =
        (room_size * degree - 1) % 2 == 0 && room_size - 1 >= degree;
    const bool plain_regular = (room_size * degree) % 2 == 0 && room_size - 1 >= degree;
    if (!constant_degree && !plain_regular)
        throw InvariantError("no " + std::to_string(degree) + "-regular room exists on " +
                             std::to_string(room_size) + " nodes");

    std::vector<int> degrees(static_cast<std::size_t>(room_size), degree);
    if (constant_degree) degrees[0] = degree - 1; // node 0 is the bottleneck

    Rng rng(seed);
    const auto room = room_edges(degrees, rng, 10000);

    std::vector<std::pair<StateId, StateId>> edges;
    const auto add_undirected = [&edges](int a, int b) {
        edges.emplace_back(a, b);
        edges.emplace_back(b, a);
    };
    for (const auto& [a, b] : room) {
        add_undirected(a, b);                         // left room: ids 0..m-1
        add_undirected(a + room_size, b + room_size); // right room: ids m..2m-1
    }
    add_undirected(0, room_size); // the bridge

    TwoRoomGraph result;
    result.left_bottleneck = 0;
    result.right_bottleneck = room_size;
    result.mdp = make_mdp(2 * room_size, edges,
                          Vector::Constant(2 * room_size, -1.0), {}, std::nullopt);
    return result;
}

} // namespace fph
