#pragma once

// Declaration-level use graph and the bottom-up visit order over it.

#include "ccport/source_model.hpp"

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ccport {

using Edge = std::pair<std::string, std::string>; // (from, to): `from` uses `to`

struct GraphNode {
    std::string id;
    DeclKind kind = DeclKind::Global;
    std::string name;
    std::string file;
    std::size_t start_line = 0;
    std::size_t end_line = 0;
};

struct DependencyGraph {
    std::vector<std::string> nodes; // canonical ids, source order
    std::map<std::string, GraphNode> info;
    std::set<Edge> edges;
    std::set<Edge> broken_edges; // back edges removed by bottom_up_order

    bool contains(const std::string &id) const { return info.count(id) > 0; }
    /// Targets of `id` over edges and broken edges, in (kind, name) order.
    std::vector<std::string> successors(const std::string &id) const;
};

/// Edges by referencing declaration: procedures use anything, types and
/// globals use types and macros, macros use nothing. Only canonical
/// declarations become nodes; self-references are dropped.
DependencyGraph build_graph(const std::vector<Declaration> &decls);

/// Reverse topological order (callees first). Cycles are broken by removing
/// the back edges a depth-first search meets, visiting roots and successors in
/// (kind, name) order; removed edges move from `edges` to `broken_edges`.
std::vector<std::string> bottom_up_order(DependencyGraph &g);

/// (kind, name, id) comparison used for every tie-break.
bool node_less(const GraphNode &a, const GraphNode &b);

struct PreludeFragment {
    std::string id;
    DeclKind kind = DeclKind::Global;
    std::string name;
    std::string text;
};

/// Immediate successors of `id` as prompt context: procedures contribute
/// their signature, everything else its full code.
std::vector<PreludeFragment> prelude_of(const std::string &id, const DependencyGraph &g,
                                        const std::vector<Declaration> &decls);

/// JSON document with nodes, edges, broken edges and order; keys in a fixed
/// order, newline-terminated.
std::string graph_to_json(const DependencyGraph &g, const std::vector<std::string> &order);

} // namespace ccport
