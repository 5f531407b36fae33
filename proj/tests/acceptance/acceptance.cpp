// Acceptance runner: one PASS/FAIL line per criterion, exit 1 if any fails.

#include "ccport/depgraph.hpp"
#include "ccport/errors.hpp"
#include "ccport/patch_engine.hpp"

#include "fixtures.hpp"

#include <chrono>
#include <functional>
#include <iostream>

using namespace fixtures;
using namespace ccport;

namespace {

const fs::path kRoot = CCPORT_FIXTURES;

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void fail(const std::string &why) {
        pass = false;
        if (notes.size() < 8)
            notes.push_back(why);
    }
    void expect(bool cond, const std::string &why) {
        if (!cond)
            fail(why);
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Golden golden(const std::string &name) {
    for (auto &g : golden_cases(kRoot / "golden"))
        if (g.name == name)
            return g;
    throw std::runtime_error("no golden fixture " + name);
}

// Runs a golden fixture and compares it with its expected tree.
void check_golden(const Golden &g, const fs::path &work, Outcome &o) {
    CliRun r = port_golden(g, work / "out", work / "logs");
    o.expect(r.code == 0, g.name + ": exit " + std::to_string(r.code) + " " + r.err);
    o.expect(r.err.find("replay miss") == std::string::npos, g.name + ": replay miss");
    for (const auto &d : compare_trees(g.dir / "expected", work / "out"))
        o.fail(g.name + ": " + d);
}

Outcome golden_fixtures() {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    for (const char *name : {"alloc_assign", "byte_reverse", "vsf_ascii", "lua_chain"}) {
        TempDir tmp("acc");
        check_golden(golden(name), tmp.path, o);
    }
    // the shapes the fixtures exist for
    auto has = [&](const std::string &name, const std::string &file, const std::string &text) {
        o.expect(read_file(kRoot / "golden" / name / "expected" / file).find(text) != std::string::npos,
                 name + ": expected output lacks " + text);
    };
    has("alloc_assign", "channel.c", ".len = ");
    has("byte_reverse", "md5.c", "count(longs * 4)");
    has("vsf_ascii", "ascii.c", "count(in_len)");
    has("vsf_ascii", "ascii.c", "count(in_len * 2)");
    has("lua_chain", "ltable.c", "MAXABITS + 1");
    double s = seconds_since(t0);
    o.notes.push_back("runtime " + std::to_string(s) + " s");
    o.expect(s < 10.0, "runtime over 10 s");
    return o;
}

Outcome mst_metric() {
    Outcome o;
    Golden g = golden("mst");
    TempDir tmp("acc");
    check_golden(g, tmp.path, o);
    CliRun r = cli({"eval", "--input", (tmp.path / "out").string(), "--gt", (g.dir / "ground_truth.jsonl").string(),
                    "--out", (tmp.path / "eval").string()});
    o.expect(r.code == 0, "eval exit " + std::to_string(r.code));
    if (r.code != 0)
        return o;
    auto m = nlohmann::json::parse(read_file(tmp.path / "eval" / "metrics.json"));
    o.notes.push_back("required=" + m["required"].dump() + " inferred=" + m["inferred"].dump() +
                      " correct=" + m["correct"].dump());
    o.expect(m["required"] == 11 && m["inferred"] == 11 && m["correct"] == 11, "metrics differ from 11/11/11");
    return o;
}

DependencyGraph random_graph(std::mt19937 &rng) {
    DependencyGraph g;
    int n = std::uniform_int_distribution<int>(1, 30)(rng);
    for (int i = 0; i < n; ++i) {
        GraphNode node;
        node.kind = static_cast<DeclKind>(rng() % 4);
        node.name = "n" + std::to_string(rng() % 40);
        node.id = "id" + std::to_string(i);
        g.nodes.push_back(node.id);
        g.info[node.id] = node;
    }
    // sparse acyclic backbone plus random extra edges that close cycles
    for (int i = 1; i < n; ++i)
        if (rng() % 2)
            g.edges.insert({g.nodes[i], g.nodes[rng() % i]});
    int extra = std::uniform_int_distribution<int>(0, n * 2)(rng);
    for (int k = 0; k < extra; ++k) {
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

Outcome dependency_order() {
    Outcome o;
    std::mt19937 rng(20240);
    std::size_t cyclic = 0;
    for (int iter = 0; iter < 200; ++iter) {
        DependencyGraph g = random_graph(rng);
        auto all = g.edges;
        auto order = bottom_up_order(g);
        std::string tag = "graph " + std::to_string(iter) + ": ";
        std::map<std::string, std::size_t> pos;
        for (std::size_t i = 0; i < order.size(); ++i)
            pos[order[i]] = i;
        o.expect(order.size() == g.nodes.size() && pos.size() == order.size(), tag + "order is not a permutation");
        std::set<Edge> both = g.edges;
        both.insert(g.broken_edges.begin(), g.broken_edges.end());
        o.expect(both == all, tag + "edges lost or invented");
        for (const auto &[a, b] : g.edges)
            o.expect(pos[b] < pos[a], tag + "retained edge " + a + "->" + b + " out of order");
        for (const auto &[a, b] : g.broken_edges)
            o.expect(reachable(g.edges, b, a), tag + "broken edge " + a + "->" + b + " closes no cycle");
        cyclic += !g.broken_edges.empty();
    }
    o.notes.push_back(std::to_string(cyclic) + " of 200 graphs had cycles");
    o.expect(cyclic > 0, "generator produced no cycles");
    return o;
}

std::string block_text(const std::vector<std::string> &orig, const std::vector<std::string> &repl) {
    std::string s = "<<<<ORIGINAL\n";
    for (const auto &l : orig)
        s += l + "\n";
    s += "====\n>>>>REFACTORED\n";
    for (const auto &l : repl)
        s += l + "\n";
    return s + "<<<<END\n";
}

std::string random_line(std::mt19937 &rng) {
    static const char *words[] = {"int", "x", "=", "p[i]", "count(n)", "arr<int>", "return", ";", "n", "{", "}"};
    std::string s;
    int k = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < k; ++i)
        s += std::string(i ? " " : "") + words[rng() % 11];
    return s;
}

struct Candidate {
    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> blocks;
    std::string text() const {
        std::string s = "Here is the patch.\n";
        for (const auto &[o, r] : blocks)
            s += block_text(o, r);
        return s;
    }
};

Candidate random_candidate(std::mt19937 &rng) {
    Candidate c;
    int nb = static_cast<int>(rng() % 3);
    for (int b = 0; b < nb; ++b) {
        std::vector<std::string> orig, repl;
        for (int i = 0, k = 1 + static_cast<int>(rng() % 2); i < k; ++i)
            orig.push_back(random_line(rng));
        for (int i = 0, k = static_cast<int>(rng() % 3); i < k; ++i)
            repl.push_back(random_line(rng));
        c.blocks.push_back({orig, repl});
    }
    return c;
}

// Same text with extra blanks that normalization must ignore.
std::string perturb_whitespace(const std::string &text, std::mt19937 &rng) {
    std::string out;
    bool line_start = true;
    for (char ch : text) {
        if (line_start && ch != '\n' && rng() % 2)
            out += rng() % 2 ? "  " : "\t";
        if (ch == ' ' && rng() % 2)
            out += rng() % 2 ? " " : "\t";
        if (ch == '\n' && rng() % 3 == 0)
            out += "   ";
        out += ch;
        line_start = ch == '\n';
    }
    return out;
}

// Tie-break oracle: fewer blocks, then fewer refactored lines, then the
// smaller normalized serialization.
std::tuple<std::size_t, std::size_t, std::string> rank(const Patch &p) {
    Patch n = normalize_patch(p);
    std::size_t lines = 0;
    for (const auto &b : n.blocks)
        lines += b.refactored.size();
    return {n.blocks.size(), lines, serialize_patch(n)};
}

Outcome majority_vote_properties() {
    Outcome o;
    std::mt19937 rng(777);
    for (int iter = 0; iter < 1000; ++iter) {
        std::string tag = "set " + std::to_string(iter) + ": ";
        std::vector<std::string> set;
        int kinds = 1 + static_cast<int>(rng() % 4);
        for (int k = 0; k < kinds; ++k) {
            std::string t = random_candidate(rng).text();
            for (int m = 0, copies = 1 + static_cast<int>(rng() % 4); m < copies; ++m)
                set.push_back(t);
        }
        if (rng() % 4 == 0)
            set.push_back("<<<<ORIGINAL\nunterminated\n");
        VoteResult base = majority_vote(set);

        auto shuffled = set;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        VoteResult s = majority_vote(shuffled);
        o.expect(s.winner == base.winner && s.tally == base.tally && s.total == base.total,
                 tag + "result depends on completion order");

        std::vector<std::string> spaced;
        for (const auto &t : shuffled)
            spaced.push_back(perturb_whitespace(t, rng));
        VoteResult w = majority_vote(spaced);
        o.expect(w.winner_key == base.winner_key && w.tally == base.tally, tag + "whitespace changed the vote");

        // exact ties: one completion per distinct candidate
        std::vector<std::string> tie;
        std::set<std::string> keys;
        for (int k = 0; k < 3; ++k) {
            std::string t = random_candidate(rng).text();
            if (keys.insert(serialize_patch(normalize_patch(parse_response(t)))).second)
                tie.push_back(t);
        }
        auto best = std::min_element(tie.begin(), tie.end(), [](const std::string &a, const std::string &b) {
            return rank(parse_response(a)) < rank(parse_response(b));
        });
        VoteResult tv = majority_vote(tie);
        o.expect(tv.winner_key == std::get<2>(rank(parse_response(*best))), tag + "tie broken against the order");
        std::reverse(tie.begin(), tie.end());
        o.expect(majority_vote(tie).winner_key == tv.winner_key, tag + "tie-break depends on order");
    }
    return o;
}

std::string trimmed(const std::string &s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string &code) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : code) {
        if (ch == '\n') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

bool occurs_trimmed(const std::vector<std::string> &code, const std::vector<std::string> &orig) {
    for (std::size_t at = 0; at + orig.size() <= code.size(); ++at) {
        bool ok = true;
        for (std::size_t i = 0; i < orig.size() && ok; ++i)
            ok = trimmed(code[at + i]) == trimmed(orig[i]);
        if (ok)
            return true;
    }
    return false;
}

Outcome patch_atomicity() {
    Outcome o;
    std::mt19937 rng(4242);
    std::size_t applied = 0;
    for (int iter = 0; iter < 1000; ++iter) {
        std::string tag = "case " + std::to_string(iter) + ": ";
        std::vector<std::string> lines;
        for (int i = 0, n = 1 + static_cast<int>(rng() % 12); i < n; ++i)
            lines.push_back(std::string(rng() % 4, ' ') + random_line(rng));
        std::string code;
        for (std::size_t i = 0; i < lines.size(); ++i)
            code += (i ? "\n" : "") + lines[i];
        if (rng() % 2)
            code += "\n";
        auto code_lines = split(code);

        Patch p;
        for (int b = 0, nb = 1 + static_cast<int>(rng() % 3); b < nb; ++b) {
            PatchBlock blk;
            if (rng() % 4) {
                std::size_t at = rng() % lines.size();
                std::size_t len = 1 + rng() % std::min<std::size_t>(3, lines.size() - at);
                for (std::size_t i = at; i < at + len; ++i)
                    blk.original.push_back(rng() % 2 ? trimmed(lines[i]) : lines[i] + " ");
            } else {
                blk.original.push_back(random_line(rng));
            }
            for (int i = 0, k = static_cast<int>(rng() % 3); i < k; ++i)
                blk.refactored.push_back("  edit" + std::to_string(b) + " " + random_line(rng));
            p.blocks.push_back(blk);
        }

        std::string out = code;
        PatchApplication app;
        bool ok = true;
        try {
            app = apply_patch_detailed(p, code);
            out = app.code;
        } catch (const PatchRejected &e) {
            ok = false;
            if (e.reason() == PatchRejected::Reason::NoMatch)
                o.expect(!occurs_trimmed(code_lines, p.blocks[e.block()].original),
                         tag + "NoMatch for a block that occurs");
        }
        o.expect((out != code) == ok, tag + (ok ? "applied without a change" : "rejected with a change"));
        if (!ok) {
            o.expect(out == code, tag + "rejected output not byte-identical");
            continue;
        }
        ++applied;

        // rebuild the expected output from the matched spans alone
        std::map<std::size_t, std::size_t> start_of;
        std::vector<bool> used(code_lines.size(), false);
        for (std::size_t i = 0; i < app.matched.size(); ++i) {
            const auto &r = app.matched[i];
            start_of[r.first] = i;
            for (std::size_t k = 0; k < r.count; ++k) {
                o.expect(!used[r.first + k], tag + "overlapping matches");
                used[r.first + k] = true;
                o.expect(trimmed(code_lines[r.first + k]) == trimmed(p.blocks[i].original[k]),
                         tag + "matched span differs from the block");
            }
        }
        std::vector<std::string> expect;
        for (std::size_t i = 0; i < code_lines.size();) {
            auto it = start_of.find(i);
            if (it == start_of.end()) {
                expect.push_back(code_lines[i++]);
                continue;
            }
            const auto &blk = p.blocks[it->second];
            expect.insert(expect.end(), blk.refactored.begin(), blk.refactored.end());
            i += app.matched[it->second].count;
        }
        std::string rebuilt;
        for (std::size_t i = 0; i < expect.size(); ++i)
            rebuilt += (i ? "\n" : "") + expect[i];
        o.expect(rebuilt == out, tag + "bytes outside matched spans changed");
    }
    o.notes.push_back(std::to_string(applied) + " of 1000 applied");
    o.expect(applied > 100 && applied < 900, "fuzzer lacks both outcomes");
    return o;
}

Outcome scope_drop() {
    Outcome o;
    Golden g = golden("scope_drop");
    TempDir tmp("acc");
    check_golden(g, tmp.path, o);
    auto report = nlohmann::json::parse(read_file(tmp.path / "logs" / "pass2.json"));
    std::size_t drops = report["annotations_dropped"].size();
    o.notes.push_back(std::to_string(drops) + " annotations dropped");
    o.expect(drops == 3, "expected 3 logged drops");
    std::string out = read_file(tmp.path / "out" / "scope.c");
    for (const auto &d : report["annotations_dropped"])
        o.expect(out.find(d["annotation"].get<std::string>()) == std::string::npos,
                 "dropped " + d["annotation"].get<std::string>() + " still emitted");

    // no unresolved identifier in any emitted annotation
    std::size_t trees = 0;
    for (const auto &c : golden_cases(kRoot / "golden")) {
        TempDir run("acc");
        port_golden(c, run.path / "out");
        for (const auto &bad : out_of_scope_annotations(run.path / "out"))
            o.fail(c.name + ": " + bad);
        ++trees;
    }
    for (const auto &bad : out_of_scope_annotations(kRoot / "mock" / "expected"))
        o.fail("mock: " + bad);
    o.notes.push_back(std::to_string(trees) + " golden outputs and the mock corpus scanned");
    return o;
}

Outcome conflict_pipeline() {
    Outcome o;
    Golden g = golden("field_conflict");
    TempDir tmp("acc");
    check_golden(g, tmp.path, o);
    auto report = nlohmann::json::parse(read_file(tmp.path / "logs" / "pass2.json"));
    o.expect(report["annotations_dropped"].size() == 1 &&
                 report["annotations_dropped"][0]["reason"].get<std::string>().find("conflicting") == 0,
             "pass 2 did not drop the conflicting field annotation");
    std::string out = read_file(tmp.path / "out" / "fill.c");
    o.expect(out.find("arr<int> p : count(count_for_p);") != std::string::npos, "field not bound by count_for_p");
    o.expect(out.find("int count_for_p;") != std::string::npos, "count_for_p not introduced");
    o.expect(out.find("a->count_for_p = 10;") != std::string::npos, "fill_small does not set count_for_p");
    o.expect(out.find("a->count_for_p = 20;") != std::string::npos, "fill_large does not set count_for_p");
    return o;
}

Outcome replay_determinism() {
    Outcome o;
    for (const auto &g : golden_cases(kRoot / "golden")) {
        TempDir a("acc"), b("acc");
        port_golden(g, a.path / "out", a.path / "logs");
        port_golden(g, b.path / "out", b.path / "logs");
        o.expect(tree_hash(a.path / "out") == tree_hash(b.path / "out"), g.name + ": output trees differ");
        auto qa = query_records(a.path / "logs"), qb = query_records(b.path / "logs");
        nlohmann::json ta = nlohmann::json::array(), tb = nlohmann::json::array();
        for (const auto &q : qa)
            ta.push_back(q["tally"]);
        for (const auto &q : qb)
            tb.push_back(q["tally"]);
        o.expect(sha256_hex(ta.dump()) == sha256_hex(tb.dump()), g.name + ": vote tallies differ");
    }
    return o;
}

Outcome mock_corpus() {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    auto oracle = annotation_oracle(kRoot / "mock" / "expected_annotations.txt");
    o.expect(files_under(kRoot / "mock" / "input").size() == 10, "corpus is not 10 programs");
    for (const auto &p : mock_problems(kRoot / "mock"))
        o.fail(p);
    double s = seconds_since(t0);
    o.notes.push_back(std::to_string(oracle.size()) + " sites checked, runtime " + std::to_string(s) + " s");
    o.expect(s < 5.0, "runtime over 5 s");
    return o;
}

} // namespace

int main() {
    std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"golden fixtures under replay", golden_fixtures},
        {"mst ground-truth metric", mst_metric},
        {"dependency order properties", dependency_order},
        {"majority vote properties", majority_vote_properties},
        {"patch atomicity and preservation", patch_atomicity},
        {"scope drop", scope_drop},
        {"conflict pipeline", conflict_pipeline},
        {"replay determinism", replay_determinism},
        {"mock backend corpus", mock_corpus},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception &e) {
            o.fail(std::string("exception: ") + e.what());
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << i + 1 << "  " << criteria[i].first;
        for (const auto &n : o.notes)
            std::cout << "  [" << n << "]";
        std::cout << "\n";
    }
    return failed ? 1 : 0;
}
