#include "ccport/eval.hpp"

#include "ccport/errors.hpp"
#include "ccport/lexer.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace ccport {

using ojson = nlohmann::ordered_json;

GroundTruth parse_ground_truth(const std::string &text) {
    GroundTruth gt;
    std::set<std::pair<std::string, std::string>> seen;
    std::size_t lineno = 0;
    for (std::string_view line : split_lines(text)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos)
            continue;
        GroundTruthEntry e;
        try {
            auto j = nlohmann::json::parse(line);
            e.decl = j.at("decl").get<std::string>();
            e.symbol = j.at("symbol").get<std::string>();
            e.kind = pointer_kind_from_string(j.at("kind").get<std::string>());
            e.bounds = normalize_bounds_text(j.value("bounds", std::string()));
        } catch (const std::exception &ex) {
            throw Error("ground truth line " + std::to_string(lineno) + ": " + ex.what());
        }
        if (!seen.insert({e.decl, e.symbol}).second)
            throw Error("ground truth line " + std::to_string(lineno) + ": duplicate entry for " + e.decl + "." +
                        e.symbol);
        gt.entries.push_back(std::move(e));
    }
    return gt;
}

GroundTruth load_ground_truth(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read ground truth " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_ground_truth(ss.str());
}

std::string_view to_string(EntryVerdict::Status s) {
    switch (s) {
    case EntryVerdict::Status::Correct:
        return "correct";
    case EntryVerdict::Status::Incorrect:
        return "incorrect";
    case EntryVerdict::Status::NotInferred:
        return "not-inferred";
    case EntryVerdict::Status::MissingDecl:
        return "missing-decl";
    }
    return "?";
}

EvalResult score(const std::vector<Declaration> &decls, const GroundTruth &gt) {
    EvalResult r;
    std::vector<AnnotationSite> sites = classify_program(decls);
    std::map<std::string, std::string> id_of; // name -> canonical id
    for (const auto &d : decls)
        if (d.is_canonical())
            id_of.emplace(d.name, d.id);

    std::vector<GroundTruthEntry> entries = gt.entries;
    std::sort(entries.begin(), entries.end(), [](const auto &a, const auto &b) {
        return std::tie(a.decl, a.symbol) < std::tie(b.decl, b.symbol);
    });
    for (const auto &e : entries) {
        EntryVerdict v;
        v.expected = e;
        auto id = id_of.find(e.decl);
        if (id == id_of.end()) {
            v.status = EntryVerdict::Status::MissingDecl;
            r.mismatches.push_back("declaration " + e.decl + " not found in output");
            r.verdicts.push_back(std::move(v));
            continue;
        }
        const AnnotationSite *site = nullptr;
        for (const auto &s : sites)
            if (s.decl_id == id->second && s.symbol == e.symbol)
                site = &s;
        if (site) {
            v.found_kind = std::string(to_string(site->kind));
            v.found_bounds = site->annotated() ? normalize_bounds_text(site->raw_annotation) : "";
            bool inferred = site->annotated() || (e.bounds.empty() && site->spelled_checked);
            if (inferred)
                v.status = site->kind == e.kind && v.found_bounds == e.bounds ? EntryVerdict::Status::Correct
                                                                              : EntryVerdict::Status::Incorrect;
        }
        r.verdicts.push_back(std::move(v));
    }

    Metrics &m = r.metrics;
    m.required = r.verdicts.size();
    for (const auto &v : r.verdicts) {
        m.correct += v.status == EntryVerdict::Status::Correct;
        m.incorrect += v.status == EntryVerdict::Status::Incorrect;
    }
    m.inferred = m.correct + m.incorrect;
    m.not_inferred = m.required - m.inferred;
    r.call_arity_mismatches = call_arity_mismatches(decls);
    return r;
}

namespace {

// Arguments of the parenthesized list opening at toks[open]; nullopt for
// variadic lists.
std::optional<std::size_t> list_arity(const std::vector<Token> &toks, std::size_t open, std::size_t *close_out,
                                      bool declaration) {
    int depth = 0;
    std::size_t commas = 0, items = 0;
    bool variadic = false, only_void = true;
    std::size_t i = open;
    for (; i < toks.size(); ++i) {
        std::string_view t = toks[i].text;
        if (t == "(" || t == "[" || t == "{") {
            ++depth;
            if (depth == 1)
                continue;
        } else if (t == ")" || t == "]" || t == "}") {
            if (--depth == 0)
                break;
        }
        if (depth == 1) {
            if (t == ",")
                ++commas;
            if (t == "...")
                variadic = true;
            if (!(declaration && t == "void"))
                only_void = false;
        }
        ++items;
    }
    if (close_out)
        *close_out = i;
    if (variadic)
        return std::nullopt;
    if (items == 0 || (declaration && only_void && commas == 0))
        return 0;
    return commas + 1;
}

} // namespace

std::size_t call_arity_mismatches(const std::vector<Declaration> &decls) {
    std::map<std::string, std::optional<std::size_t>> arity;
    for (const auto &d : decls) {
        if (d.kind != DeclKind::Procedure || !d.is_canonical())
            continue;
        auto toks = tokenize(d.meta.signature_text, d.span.file);
        for (std::size_t i = 0; i + 1 < toks.size(); ++i)
            if (toks[i].text == d.name && toks[i + 1].text == "(") {
                arity[d.name] = list_arity(toks, i + 1, nullptr, true);
                break;
            }
    }

    std::size_t mismatches = 0;
    for (const auto &d : decls) {
        if (d.kind != DeclKind::Procedure || !d.meta.has_body)
            continue;
        auto toks = tokenize(d.code, d.span.file);
        std::size_t i = 0;
        while (i < toks.size() && toks[i].text != "{")
            ++i;
        for (; i + 1 < toks.size(); ++i) {
            if (toks[i].kind != TokenKind::Identifier || toks[i + 1].text != "(")
                continue;
            auto it = arity.find(std::string(toks[i].text));
            if (it == arity.end() || !it->second)
                continue;
            if (i > 0 && (toks[i - 1].text == "." || toks[i - 1].text == "->"))
                continue;
            auto n = list_arity(toks, i + 1, nullptr, false);
            if (n && *n != *it->second)
                ++mismatches;
        }
    }
    return mismatches;
}

std::string metrics_to_json(const EvalResult &r) {
    ojson j;
    j["required"] = r.metrics.required;
    j["inferred"] = r.metrics.inferred;
    j["correct"] = r.metrics.correct;
    j["incorrect"] = r.metrics.incorrect;
    j["not_inferred"] = r.metrics.not_inferred;
    j["call_arity_mismatches"] = r.call_arity_mismatches;
    ojson entries = ojson::array();
    for (const auto &v : r.verdicts) {
        ojson e;
        e["decl"] = v.expected.decl;
        e["symbol"] = v.expected.symbol;
        e["status"] = std::string(to_string(v.status));
        e["expected_kind"] = std::string(to_string(v.expected.kind));
        e["expected_bounds"] = v.expected.bounds;
        e["found_kind"] = v.found_kind;
        e["found_bounds"] = v.found_bounds;
        entries.push_back(e);
    }
    j["entries"] = entries;
    j["mismatches"] = r.mismatches;
    return j.dump(2) + "\n";
}

std::string eval_report(const EvalResult &r) {
    std::ostringstream os;
    const Metrics &m = r.metrics;
    auto pct = [&](std::size_t k) { return m.required ? (100 * k + m.required / 2) / m.required : 0; };
    os << "required:     " << m.required << "\n";
    os << "inferred:     " << m.inferred << " (" << pct(m.inferred) << "%)\n";
    os << "correct:      " << m.correct << " (" << pct(m.correct) << "%)\n";
    os << "incorrect:    " << m.incorrect << "\n";
    os << "not inferred: " << m.not_inferred << "\n";
    os << "calls with mismatched arity: " << r.call_arity_mismatches << "\n";
    bool header = false;
    for (const auto &v : r.verdicts) {
        if (v.status == EntryVerdict::Status::Correct)
            continue;
        if (!header) {
            os << "\nfor review:\n";
            header = true;
        }
        os << "  " << to_string(v.status) << "  " << v.expected.decl << "." << v.expected.symbol << "\n";
        os << "    - " << to_string(v.expected.kind) << " " << v.expected.bounds << "\n";
        if (v.status != EntryVerdict::Status::MissingDecl)
            os << "    + " << (v.found_kind.empty() ? "(no site)" : v.found_kind) << " " << v.found_bounds << "\n";
    }
    return os.str();
}

} // namespace ccport
