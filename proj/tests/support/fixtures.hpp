#pragma once

// Helpers shared by the fixture tests and the acceptance runner.

#include "ccport/checkedc.hpp"
#include "ccport/cli.hpp"
#include "ccport/hash.hpp"
#include "ccport/source_model.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fixtures {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string trim(std::string s) {
    s.erase(0, s.find_first_not_of(" \t\r\n"));
    s.erase(s.find_last_not_of(" \t\r\n") + 1);
    return s;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string &tag) {
        path = fs::temp_directory_path() / ("ccport_" + tag + "_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

inline std::vector<fs::path> files_under(const fs::path &dir) {
    std::vector<fs::path> out;
    if (!fs::exists(dir))
        return out;
    for (const auto &e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file())
            out.push_back(fs::relative(e.path(), dir));
    std::sort(out.begin(), out.end());
    return out;
}

/// Differences between two trees; empty when byte-identical.
inline std::vector<std::string> compare_trees(const fs::path &expected, const fs::path &actual) {
    std::vector<std::string> diffs;
    auto a = files_under(expected), b = files_under(actual);
    if (a != b)
        diffs.push_back("file sets differ");
    for (const auto &rel : a)
        if (fs::exists(actual / rel) && read_file(expected / rel) != read_file(actual / rel))
            diffs.push_back(rel.string() + " differs");
    return diffs;
}

inline std::string tree_hash(const fs::path &dir) {
    std::string all;
    for (const auto &rel : files_under(dir))
        all += rel.string() + "\n" + ccport::sha256_hex(read_file(dir / rel)) + "\n";
    return ccport::sha256_hex(all);
}

struct CliRun {
    int code = 0;
    std::string out;
    std::string err;
};

inline CliRun cli(std::vector<std::string> args) {
    args.insert(args.begin(), "ccport");
    std::vector<const char *> argv;
    for (const auto &a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliRun r;
    r.code = ccport::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

struct Golden {
    std::string name;
    fs::path dir;
    std::string passes;
};

inline std::vector<Golden> golden_cases(const fs::path &root) {
    std::vector<Golden> out;
    for (const auto &e : fs::directory_iterator(root))
        if (e.is_directory())
            out.push_back({e.path().filename().string(), e.path(), trim(read_file(e.path() / "passes"))});
    std::sort(out.begin(), out.end(), [](const Golden &a, const Golden &b) { return a.name < b.name; });
    return out;
}

/// `ccport port` on a golden fixture with its replay store.
inline CliRun port_golden(const Golden &g, const fs::path &out, const fs::path &logs = {}) {
    std::vector<std::string> args{"port",  "--backend", "replay", "--cache", (g.dir / "store").string(), "--input",
                                  (g.dir / "input").string(), "--out", out.string(), "--passes", g.passes};
    if (!logs.empty()) {
        args.push_back("--log-dir");
        args.push_back(logs.string());
    }
    return cli(args);
}

/// Annotations in the tree whose identifiers do not resolve.
inline std::vector<std::string> out_of_scope_annotations(const fs::path &dir) {
    std::vector<std::string> paths;
    for (const auto &rel : files_under(dir))
        paths.push_back((dir / rel).string());
    auto decls = ccport::extract_declarations(ccport::parse_units(paths));
    std::set<std::string> globals;
    for (const auto &d : decls)
        if (d.kind != ccport::DeclKind::Procedure)
            for (const auto &n : d.all_names())
                globals.insert(n);
    std::vector<std::string> bad;
    for (const auto &d : decls) {
        std::set<std::string> fields;
        for (const auto &f : d.meta.fields)
            fields.insert(f.name);
        for (const auto &sd : ccport::all_declarators(d)) {
            if (sd.decl->annotation.empty())
                continue;
            ccport::AnnotationSite site;
            site.symbol = sd.decl->name;
            site.scope = sd.scope;
            site.line = sd.decl->line;
            try {
                site.bounds = ccport::parse_bounds(sd.decl->annotation);
            } catch (const std::exception &) {
                bad.push_back(d.id + ":" + site.symbol + " (malformed)");
                continue;
            }
            auto v = ccport::validate_scope(site, d.meta, globals, fields);
            if (!v.valid)
                bad.push_back(d.id + ":" + site.symbol + " uses " + v.offending);
        }
    }
    return bad;
}

inline std::vector<nlohmann::json> query_records(const fs::path &logs) {
    std::vector<nlohmann::json> out;
    for (const auto &rel : files_under(logs / "queries"))
        if (rel.extension() == ".json")
            out.push_back(nlohmann::json::parse(read_file(logs / "queries" / rel)));
    return out;
}

struct Annotation {
    std::string file, symbol, kind, bounds;
};

/// Lines of "file symbol kind bounds"; bounds "-" means unannotated.
inline std::vector<Annotation> annotation_oracle(const fs::path &path) {
    std::vector<Annotation> out;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line.substr(0, line.find('#')));
        if (line.empty())
            continue;
        std::istringstream fields(line);
        Annotation a;
        fields >> a.file >> a.symbol >> a.kind >> a.bounds;
        out.push_back(a);
    }
    return out;
}

/// Ports every mock-corpus program alone with pass 2 and lists where the
/// output differs from expected/ or from the annotation oracle.
inline std::vector<std::string> mock_problems(const fs::path &root) {
    std::vector<std::string> problems;
    auto oracle = annotation_oracle(root / "expected_annotations.txt");
    for (const auto &rel : files_under(root / "input")) {
        std::string file = rel.string();
        TempDir tmp("mock");
        CliRun r = cli({"port", "--input", (root / "input" / rel).string(), "--out", (tmp.path / "out").string(),
                        "--passes", "2"});
        if (r.code != 0) {
            problems.push_back(file + ": exit " + std::to_string(r.code));
            continue;
        }
        std::string got = read_file(tmp.path / "out" / rel);
        if (got != read_file(root / "expected" / rel))
            problems.push_back(file + ": output differs from expected");
        auto decls = ccport::extract_declarations({ccport::SourceUnit::from_text(file, got)});
        std::map<std::string, ccport::AnnotationSite> sites;
        for (const auto &s : ccport::classify_program(decls))
            sites[s.symbol] = s;
        for (const auto &a : oracle) {
            if (a.file != file)
                continue;
            auto it = sites.find(a.symbol);
            if (it == sites.end()) {
                problems.push_back(file + ": no site " + a.symbol);
                continue;
            }
            const auto &s = it->second;
            bool ok = a.bounds == "-" ? !s.annotated()
                                      : std::string(ccport::to_string(s.kind)) == a.kind &&
                                            ccport::normalize_bounds_text(s.raw_annotation) ==
                                                ccport::normalize_bounds_text(a.bounds);
            if (!ok)
                problems.push_back(file + ": " + a.symbol + " is " + std::string(ccport::to_string(s.kind)) + " " +
                                   (s.raw_annotation.empty() ? "-" : s.raw_annotation));
        }
    }
    return problems;
}

} // namespace fixtures
