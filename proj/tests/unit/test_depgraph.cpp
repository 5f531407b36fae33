#include "ccport/depgraph.hpp"

#include "doctest.h"

#include <json.hpp>

#include <algorithm>
#include <random>

using namespace ccport;

namespace {

const char *kLuaChain = R"(static int countint (lua_Integer key, unsigned int* nums) {
  unsigned int k = arrayindex(key);
  if (k != 0) {
    nums[luaO_ceillog2(k)]++;
    return 1;
  }
  return 0;
}
static int numusehash (const Table* t, unsigned int* nums, unsigned int* pna) {
  int totaluse = 0;
  int ause = 0;
  ause += countint(keyival(n),nums);
  return totaluse;
}
static void rehash(lua_State* L, Table* t, const TValue* ek) {
  unsigned int nums[MAXABITS + 1];
  unsigned int na;
  int total;
  total += numusehash(t,nums,&na);
  na += countint(ivalue(ek),nums);
}
)";

std::vector<Declaration> parse(const std::string &text) { return reparse("t.c", text); }

std::size_t index_of(const std::vector<std::string> &order, const std::string &id) {
    return std::find(order.begin(), order.end(), id) - order.begin();
}

} // namespace

TEST_CASE("single declaration") {
    auto ds = parse("int f(void) { return 0; }");
    auto g = build_graph(ds);
    CHECK(g.nodes == std::vector<std::string>{"proc:f"});
    CHECK(g.edges.empty());
    CHECK(bottom_up_order(g) == std::vector<std::string>{"proc:f"});
    CHECK(prelude_of("proc:f", g, ds).empty());
}

TEST_CASE("lua call chain") {
    auto ds = parse(kLuaChain);
    auto g = build_graph(ds);
    CHECK(g.edges == std::set<Edge>{{"proc:rehash", "proc:numusehash"},
                                    {"proc:rehash", "proc:countint"},
                                    {"proc:numusehash", "proc:countint"}});
    auto order = bottom_up_order(g);
    CHECK(order == std::vector<std::string>{"proc:countint", "proc:numusehash", "proc:rehash"});
    CHECK(g.broken_edges.empty());
}

TEST_CASE("edge kind rules") {
    auto ds = parse(R"(#define N 4
#define M (N + 1)
typedef struct S { int v[N]; } S;
struct T { S inner; };
S table[M];
int helper(void) { return 0; }
int (*fp)(void) = helper;
int main(void) { S s; return table[0].v[0] + helper() + N; }
)");
    auto g = build_graph(ds);
    CHECK(g.edges == std::set<Edge>{{"type:S", "macro:N"},
                                    {"type:T", "type:S"},
                                    {"global:table", "type:S"},
                                    {"global:table", "macro:M"},
                                    {"proc:main", "type:S"},
                                    {"proc:main", "global:table"},
                                    {"proc:main", "proc:helper"},
                                    {"proc:main", "macro:N"}});
    for (const auto &[from, to] : g.edges)
        CHECK(g.info.at(from).kind != DeclKind::Macro);
}

TEST_CASE("cross-file call resolves to the defining unit") {
    auto a = SourceUnit::from_text("a.c", "int helper(int);\nint main(void) { return helper(1); }\n");
    auto b = SourceUnit::from_text("b.c", "int helper(int v) { return v; }\n");
    auto ds = extract_declarations({a, b});
    auto g = build_graph(ds);
    CHECK(g.nodes == std::vector<std::string>{"proc:main", "proc:helper"});
    CHECK(g.edges == std::set<Edge>{{"proc:main", "proc:helper"}});
    CHECK(g.info.at("proc:helper").file == "b.c");
}

TEST_CASE("recursion and mutual recursion") {
    auto ds = parse("int a(int n) { return n ? b(n - 1) + a(n - 1) : 0; }\nint b(int n) { return a(n); }\n");
    auto g = build_graph(ds);
    CHECK(g.edges.size() == 2);
    auto order = bottom_up_order(g);
    CHECK(g.broken_edges.size() == 1);
    CHECK(g.broken_edges == std::set<Edge>{{"proc:b", "proc:a"}});
    CHECK(order == std::vector<std::string>{"proc:b", "proc:a"});
    std::size_t violated = 0;
    for (const auto &[from, to] : std::set<Edge>{{"proc:a", "proc:b"}, {"proc:b", "proc:a"}})
        if (index_of(order, to) > index_of(order, from))
            ++violated;
    CHECK(violated == 1);
    // prelude still sees the broken successor
    CHECK(g.successors("proc:b") == std::vector<std::string>{"proc:a"});
}

TEST_CASE("prelude contents") {
    auto ds = parse(R"(#define M 8
struct S { int x; };
int f(int *p, int n) {
  return p[n];
}
int g(struct S *s) { int buf[M]; return f(buf, M) + s->x; }
)");
    auto g = build_graph(ds);
    auto pre = prelude_of("proc:g", g, ds);
    REQUIRE(pre.size() == 3);
    CHECK(pre[0].text == "#define M 8");
    CHECK(pre[1].text == "struct S { int x; };");
    CHECK(pre[2].text == "int f(int *p, int n);");
    CHECK(pre[2].text.find("return") == std::string::npos);
}

TEST_CASE("graph json") {
    auto ds = parse("int f(void) { return 0; }");
    auto g = build_graph(ds);
    auto text = graph_to_json(g, bottom_up_order(g));
    CHECK(text.back() == '\n');
    auto doc = nlohmann::json::parse(text);
    CHECK(doc["nodes"][0]["id"] == "proc:f");
    CHECK(doc["nodes"][0]["kind"] == "procedure");
    CHECK(doc["nodes"][0]["start_line"] == 1);
    CHECK(doc["edges"].empty());
    CHECK(doc["order"][0] == "proc:f");
    CHECK(text.find("\"nodes\"") < text.find("\"edges\""));
    CHECK(text.find("\"broken\"") < text.find("\"order\""));
}

namespace {

DependencyGraph random_graph(std::mt19937 &rng) {
    DependencyGraph g;
    int n = std::uniform_int_distribution<int>(1, 30)(rng);
    for (int i = 0; i < n; ++i) {
        GraphNode node;
        node.kind = static_cast<DeclKind>(rng() % 4);
        node.name = "n" + std::to_string(rng() % 50);
        node.id = "id" + std::to_string(i);
        g.nodes.push_back(node.id);
        g.info[node.id] = node;
    }
    int m = std::uniform_int_distribution<int>(0, n * 3)(rng);
    for (int k = 0; k < m; ++k) {
        auto a = g.nodes[rng() % n], b = g.nodes[rng() % n];
        if (a != b)
            g.edges.insert({a, b});
    }
    return g;
}

bool reachable(const std::set<Edge> &edges, const std::string &from, const std::string &to) {
    std::set<std::string> seen{from};
    std::vector<std::string> todo{from};
    while (!todo.empty()) {
        auto cur = todo.back();
        todo.pop_back();
        if (cur == to)
            return true;
        for (auto it = edges.lower_bound({cur, ""}); it != edges.end() && it->first == cur; ++it)
            if (seen.insert(it->second).second)
                todo.push_back(it->second);
    }
    return false;
}

} // namespace

TEST_CASE("property: order respects retained edges and broken edges close cycles") {
    std::mt19937 rng(1234);
    for (int iter = 0; iter < 300; ++iter) {
        auto g = random_graph(rng);
        auto all = g.edges;
        auto order = bottom_up_order(g);
        REQUIRE(order.size() == g.nodes.size());
        std::set<std::string> uniq(order.begin(), order.end());
        CHECK(uniq.size() == order.size());
        for (const auto &e : g.broken_edges)
            CHECK(g.edges.count(e) == 0);
        std::set<Edge> both = g.edges;
        both.insert(g.broken_edges.begin(), g.broken_edges.end());
        CHECK(both == all);
        for (const auto &[a, b] : g.edges)
            CHECK(index_of(order, b) < index_of(order, a));
        for (const auto &[a, b] : g.broken_edges)
            CHECK(reachable(g.edges, b, a));
        auto copy = g;
        CHECK(bottom_up_order(copy) == order);
        CHECK(copy.broken_edges == g.broken_edges);
    }
}
