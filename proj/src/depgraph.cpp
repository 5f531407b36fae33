#include "ccport/depgraph.hpp"

#include <json.hpp>

#include <algorithm>
#include <unordered_map>

namespace ccport {

namespace {

bool may_use(DeclKind from, DeclKind to) {
    switch (from) {
    case DeclKind::Procedure:
        return true;
    case DeclKind::TypeDecl:
    case DeclKind::Global:
        return to == DeclKind::TypeDecl || to == DeclKind::Macro;
    case DeclKind::Macro:
        return false;
    }
    return false;
}

} // namespace

bool node_less(const GraphNode &a, const GraphNode &b) {
    return std::tie(a.kind, a.name, a.id) < std::tie(b.kind, b.name, b.id);
}

std::vector<std::string> DependencyGraph::successors(const std::string &id) const {
    std::vector<std::string> out;
    for (const auto *set : {&edges, &broken_edges})
        for (auto it = set->lower_bound({id, std::string()}); it != set->end() && it->first == id; ++it)
            out.push_back(it->second);
    std::sort(out.begin(), out.end(),
              [&](const std::string &a, const std::string &b) { return node_less(info.at(a), info.at(b)); });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

DependencyGraph build_graph(const std::vector<Declaration> &decls) {
    DependencyGraph g;
    std::map<std::string, std::vector<const Declaration *>> by_name;
    for (const auto &d : decls) {
        if (!d.is_canonical())
            continue;
        g.nodes.push_back(d.id);
        g.info[d.id] = GraphNode{d.id, d.kind, d.name, d.span.file, d.span.start_line, d.span.end_line};
        for (const auto &n : d.all_names())
            by_name[n].push_back(&d);
    }
    std::set<std::string> universe;
    for (const auto &[name, _] : by_name)
        universe.insert(name);
    for (const auto &d : decls) {
        if (!d.is_canonical())
            continue;
        for (const auto &name : scan_references(d, universe))
            for (const Declaration *target : by_name[name])
                if (target->id != d.id && may_use(d.kind, target->kind))
                    g.edges.insert({d.id, target->id});
    }
    return g;
}

std::vector<std::string> bottom_up_order(DependencyGraph &g) {
    // restore edges broken by an earlier call so the result is a function of
    // the graph alone
    g.edges.insert(g.broken_edges.begin(), g.broken_edges.end());
    g.broken_edges.clear();

    auto less = [&](const std::string &a, const std::string &b) { return node_less(g.info.at(a), g.info.at(b)); };
    std::unordered_map<std::string, std::vector<std::string>> adj;
    for (const auto &[from, to] : g.edges)
        adj[from].push_back(to);
    for (auto &[_, targets] : adj)
        std::sort(targets.begin(), targets.end(), less);

    std::vector<std::string> roots = g.nodes;
    std::sort(roots.begin(), roots.end(), less);

    enum class Mark { New, Active, Done };
    std::unordered_map<std::string, Mark> mark;
    std::vector<std::string> order;
    std::set<Edge> back;
    struct Frame {
        const std::string *id;
        std::size_t next = 0;
    };
    for (const auto &root : roots) {
        if (mark[root] != Mark::New)
            continue;
        std::vector<Frame> stack{{&root}};
        mark[root] = Mark::Active;
        while (!stack.empty()) {
            Frame &f = stack.back();
            const auto &targets = adj[*f.id];
            if (f.next < targets.size()) {
                const std::string &t = targets[f.next++];
                Mark &m = mark[t];
                if (m == Mark::Active) {
                    back.insert({*f.id, t});
                } else if (m == Mark::New) {
                    m = Mark::Active;
                    stack.push_back({&t});
                }
                continue;
            }
            mark[*f.id] = Mark::Done;
            order.push_back(*f.id);
            stack.pop_back();
        }
    }
    for (const auto &e : back)
        g.edges.erase(e);
    g.broken_edges = std::move(back);
    return order;
}

std::vector<PreludeFragment> prelude_of(const std::string &id, const DependencyGraph &g,
                                        const std::vector<Declaration> &decls) {
    std::unordered_map<std::string, const Declaration *> index;
    for (const auto &d : decls)
        index[d.id] = &d;
    std::vector<PreludeFragment> out;
    if (!g.contains(id))
        return out;
    for (const auto &s : g.successors(id)) {
        auto it = index.find(s);
        if (it == index.end())
            continue;
        const Declaration &d = *it->second;
        std::string text = d.kind == DeclKind::Procedure ? d.meta.signature_text + ";" : d.code;
        out.push_back({d.id, d.kind, d.name, std::move(text)});
    }
    return out;
}

std::string graph_to_json(const DependencyGraph &g, const std::vector<std::string> &order) {
    using nlohmann::ordered_json;
    ordered_json doc;
    doc["nodes"] = ordered_json::array();
    for (const auto &id : g.nodes) {
        const auto &n = g.info.at(id);
        ordered_json node;
        node["id"] = n.id;
        node["kind"] = std::string(to_string(n.kind));
        node["name"] = n.name;
        node["file"] = n.file;
        node["start_line"] = n.start_line;
        node["end_line"] = n.end_line;
        doc["nodes"].push_back(std::move(node));
    }
    auto edge_list = [](const std::set<Edge> &edges) {
        ordered_json arr = ordered_json::array();
        for (const auto &[from, to] : edges)
            arr.push_back(ordered_json{{"from", from}, {"to", to}});
        return arr;
    };
    doc["edges"] = edge_list(g.edges);
    doc["broken"] = edge_list(g.broken_edges);
    doc["order"] = order;
    return doc.dump(2) + "\n";
}

} // namespace ccport
