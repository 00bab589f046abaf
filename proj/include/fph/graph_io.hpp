#pragma once

#include "fph/mdp.hpp"

#include <cstdint>
#include <string>

namespace fph {

inline constexpr int kGraphSchemaVersion = 1;

/// Parse and validate a graph file (see README for the schema). Rejects
/// unknown fields, non-dense ids, and anything violating the Mdp invariants,
/// naming the offending field or edge.
Mdp load_graph(const std::string& path);

/// Parse a graph from a JSON string (the file loader's core).
Mdp parse_graph(const std::string& text, const std::string& origin = "<string>");

/// Canonical serialization; save(load(f)) is byte-identical for canonical
/// files. Writes are atomic (temp file + rename).
void save_graph(const Mdp& mdp, const std::string& path);
std::string graph_to_json(const Mdp& mdp);

/// Two rooms joined by a single bridge edge.
struct TwoRoomGraph {
    Mdp mdp;
    StateId left_bottleneck = 0;
    StateId right_bottleneck = 0;
};

/// Generate two identical degree-regular rooms of `room_size` nodes joined by
/// one undirected bridge between their designated bottleneck nodes. When a
/// room with the bottleneck at in-room degree (degree - 1) exists, the bridge
/// keeps every total degree equal to `degree`; otherwise the rooms are plain
/// degree-regular and the bottleneck nodes end up at degree + 1. Rewards are
/// -1 everywhere and no state is absorbing (goals are attached per task).
/// Deterministic in `seed`.
TwoRoomGraph generate_two_room(int room_size, int degree, std::uint64_t seed);

} // namespace fph
