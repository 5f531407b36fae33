#include "fixtures.hpp"

#include "doctest.h"

#include <json.hpp>

using namespace fixtures;

namespace {

const fs::path kRoot = CCPORT_FIXTURES;

nlohmann::json graph_of(const fs::path &input) {
    CliRun r = cli({"graph", "--input", input.string()});
    REQUIRE(r.code == 0);
    return nlohmann::json::parse(r.out);
}

} // namespace

TEST_CASE("graph subcommand") {
    TempDir tmp("cli");
    std::ofstream(tmp.path / "one.c") << "int f(void) { return 0; }\n";
    auto single = graph_of(tmp.path / "one.c");
    CHECK(single["nodes"].size() == 1);
    CHECK(single["edges"].empty());

    auto lua = graph_of(kRoot / "golden" / "lua_chain" / "input");
    CHECK(lua["nodes"].size() == 3);
    CHECK(lua["edges"].size() == 3);
    CHECK(lua["order"] == nlohmann::json::array({"proc:countint", "proc:numusehash", "proc:rehash"}));

    CliRun to_file = cli({"graph", "--input", (tmp.path / "one.c").string(), "--out", (tmp.path / "g.json").string()});
    CHECK(to_file.code == 0);
    CHECK(to_file.out.empty());
    CHECK(nlohmann::json::parse(read_file(tmp.path / "g.json"))["order"][0] == "proc:f");

    CliRun missing = cli({"graph", "--input", (tmp.path / "absent.c").string()});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("absent.c") != std::string::npos);

    std::ofstream(tmp.path / "bad.c") << "int f( { \n";
    CliRun bad = cli({"graph", "--input", (tmp.path / "bad.c").string()});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("bad.c:") != std::string::npos);
}

TEST_CASE("port with the mock backend") {
    TempDir tmp("cli");
    fs::path in = kRoot / "mock" / "input" / "01_malloc.c";
    CliRun r = cli({"port", "--input", in.string(), "--out", (tmp.path / "out").string()});
    CHECK(r.code == 0);
    CHECK(read_file(tmp.path / "out" / "01_malloc.c").find("arr<int> p : count(n)") != std::string::npos);
    // pass 2 line: one query, one applied, one annotation added
    CHECK(r.out.find("2     bounds-inference         1        1      0        0         0      1") !=
          std::string::npos);
}

TEST_CASE("passes subset") {
    TempDir tmp("cli");
    fs::path in = kRoot / "mock" / "input" / "03_loop_param.c";
    CliRun r = cli({"port", "--input", in.string(), "--out", (tmp.path / "out").string(), "--passes", "2"});
    CHECK(r.code == 0);
    CHECK(r.out.find("1     nested-arrays       not selected") != std::string::npos);
    CHECK(r.out.find("3     globals-fields      not selected") != std::string::npos);

    CHECK(cli({"port", "--input", in.string(), "--out", tmp.path.string(), "--passes", "3,2"}).code == 2);
    CHECK(cli({"port", "--input", in.string(), "--out", tmp.path.string(), "--passes", "4"}).code == 2);
    CHECK(cli({"port", "--input", in.string(), "--out", tmp.path.string(), "--completions", "0"}).code == 2);
}

TEST_CASE("replay against an empty store") {
    TempDir tmp("cli");
    fs::path in = kRoot / "mock" / "input" / "03_loop_param.c";
    CliRun r = cli({"port", "--input", in.string(), "--out", (tmp.path / "out").string(), "--backend", "replay",
                    "--cache", (tmp.path / "none").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("warnings: 1") != std::string::npos);
    CHECK(r.err.find("replay miss") != std::string::npos);
    CHECK(read_file(tmp.path / "out" / "03_loop_param.c") == read_file(in));
}

TEST_CASE("usage errors") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"port", "--input", "x.c"}).code == 2); // no --out
    CHECK(cli({"port", "--out", "o"}).code == 2);      // no input
    CHECK(cli({"port", "--input", "x.c", "--out", "o", "--backend", "replay"}).code == 2);
    CHECK(cli({"eval", "--input", "x.c"}).code == 2);
    CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("config file values yield to flags") {
    TempDir tmp("cli");
    fs::path in = kRoot / "mock" / "input" / "03_loop_param.c";
    std::ofstream(tmp.path / "run.cfg") << "# experiment\npasses=1\ninput=" << in.string() << "\nout="
                                        << (tmp.path / "from_cfg").string() << "\n";
    CliRun r = cli({"port", "--config", (tmp.path / "run.cfg").string(), "--passes", "2"});
    CHECK(r.code == 0);
    CHECK(r.out.find("1     nested-arrays       not selected") != std::string::npos);
    CHECK(fs::exists(tmp.path / "from_cfg" / "03_loop_param.c"));
    CHECK(cli({"port", "--config", (tmp.path / "missing.cfg").string()}).code == 2);
}

TEST_CASE("eval subcommand") {
    TempDir tmp("cli");
    fs::path out = kRoot / "golden" / "mst" / "expected";
    CliRun r = cli({"eval", "--input", out.string(), "--gt", (kRoot / "golden" / "mst" / "ground_truth.jsonl").string(),
                    "--out", (tmp.path / "eval").string()});
    CHECK(r.code == 0);
    auto m = nlohmann::json::parse(read_file(tmp.path / "eval" / "metrics.json"));
    CHECK(m["required"] == 11);
    CHECK(m["inferred"] == 11);
    CHECK(m["correct"] == 11);
    CHECK(fs::exists(tmp.path / "eval" / "report.txt"));

    std::ofstream(tmp.path / "empty.jsonl") << "";
    CliRun empty = cli({"eval", "--input", out.string(), "--gt", (tmp.path / "empty.jsonl").string()});
    CHECK(empty.code == 0);
    CHECK(empty.out.find("required:     0") != std::string::npos);

    std::ofstream(tmp.path / "gone.jsonl") << R"js({"decl":"nowhere","symbol":"p","kind":"arr","bounds":"count(1)"})js"
                                           << "\n";
    CliRun gone = cli({"eval", "--input", out.string(), "--gt", (tmp.path / "gone.jsonl").string()});
    CHECK(gone.code == 0);
    CHECK(gone.err.find("nowhere") != std::string::npos);

    CHECK(cli({"eval", "--input", out.string(), "--gt", (tmp.path / "absent.jsonl").string()}).code == 2);
}

TEST_CASE("porting the mock corpus output again applies nothing") {
    TempDir tmp("cli");
    fs::path done = kRoot / "mock" / "expected";
    CliRun r = cli({"port", "--input", done.string(), "--out", (tmp.path / "out").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("2     bounds-inference         1        0") != std::string::npos);
    CHECK(compare_trees(done, tmp.path / "out").empty());
}
