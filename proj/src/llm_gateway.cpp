#include "ccport/llm_gateway.hpp"

#include "ccport/errors.hpp"
#include "ccport/hash.hpp"
#include "ccport/lexer.hpp"
#include "ccport/patch_engine.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>

namespace ccport {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string store_fingerprint(const PromptText &prompt, std::size_t n, const std::string &salt) {
    return sha256_hex(salt + "\n" + std::to_string(n) + "\n" + prompt.rendered);
}

std::string backend_salt(const std::string &model, const std::optional<double> &temperature) {
    if (model.empty() && !temperature)
        return "default";
    std::ostringstream out;
    out << "model=" << (model.empty() ? "default" : model) << ";temperature=";
    if (temperature)
        out << *temperature;
    else
        out << "default";
    return out.str();
}

// ---------------------------------------------------------------------------
// ReplayStore

ReplayStore::ReplayStore(fs::path dir) : dir_(std::move(dir)) {}

fs::path ReplayStore::file_for(const std::string &fingerprint) const { return dir_ / (fingerprint + ".json"); }

std::optional<std::vector<std::string>> ReplayStore::lookup(const std::string &fingerprint) const {
    std::ifstream in(file_for(fingerprint), std::ios::binary);
    if (!in)
        return std::nullopt;
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception &e) {
        throw IoError("corrupt replay entry " + file_for(fingerprint).string() + ": " + e.what());
    }
    return doc.at("responses").get<std::vector<std::string>>();
}

bool ReplayStore::record(const std::string &fingerprint, const std::string &salt, std::size_t n,
                         const std::string &prompt, const std::vector<std::string> &responses) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    fs::path target = file_for(fingerprint);
    if (fs::exists(target))
        return false;
    ordered_json doc;
    doc["fingerprint"] = fingerprint;
    doc["salt"] = salt;
    doc["n"] = n;
    doc["prompt"] = prompt;
    doc["responses"] = responses;
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot write " + tmp.string());
        out << doc.dump(2) << "\n";
        if (!out)
            throw IoError("cannot write " + tmp.string());
    }
    fs::rename(tmp, target, ec);
    if (ec)
        throw IoError("cannot write " + target.string() + ": " + ec.message());
    return true;
}

std::size_t ReplayStore::size() const {
    std::error_code ec;
    std::size_t n = 0;
    for (const auto &e : fs::directory_iterator(dir_, ec))
        if (e.path().extension() == ".json")
            ++n;
    return n;
}

// ---------------------------------------------------------------------------
// Backends

CompletionSet MockBackend::complete(const QueryContext &, const PromptText &prompt, std::size_t n) {
    return CompletionSet{std::vector<std::string>(n, mock_respond(prompt)), n, name()};
}

ReplayBackend::ReplayBackend(std::shared_ptr<ReplayStore> store, std::string salt)
    : store_(std::move(store)), salt_(std::move(salt)) {}

CompletionSet ReplayBackend::complete(const QueryContext &ctx, const PromptText &prompt, std::size_t n) {
    std::string fp = store_fingerprint(prompt, n, salt_);
    auto hit = store_->lookup(fp);
    if (!hit)
        throw ReplayMiss("no recorded completions for " + ctx.decl_id + " (" + fp + ")");
    return CompletionSet{std::move(*hit), n, name()};
}

RecordingBackend::RecordingBackend(std::unique_ptr<Backend> inner, std::shared_ptr<ReplayStore> store)
    : inner_(std::move(inner)), store_(std::move(store)) {}

CompletionSet RecordingBackend::complete(const QueryContext &ctx, const PromptText &prompt, std::size_t n) {
    CompletionSet set = inner_->complete(ctx, prompt, n);
    store_->record(store_fingerprint(prompt, n, inner_->salt()), inner_->salt(), n, prompt.rendered,
                   set.completions);
    return set;
}

// ---------------------------------------------------------------------------
// Mock rules

namespace {

using Toks = std::vector<Token>;

std::size_t match_close(const Toks &toks, std::size_t open) {
    int depth = 0;
    for (std::size_t i = open; i < toks.size(); ++i) {
        if (toks[i].is("(") || toks[i].is("[") || toks[i].is("{"))
            ++depth;
        else if ((toks[i].is(")") || toks[i].is("]") || toks[i].is("}")) && --depth == 0)
            return i;
    }
    return toks.size();
}

bool plain_occurrence(const Toks &toks, std::size_t k, std::string_view name) {
    return toks[k].is_ident() && toks[k].text == name && !(k > 0 && (toks[k - 1].is(".") || toks[k - 1].is("->")));
}

std::optional<Expr> expr_from(const std::string &code, const Toks &toks, std::size_t first, std::size_t end) {
    if (first >= end)
        return std::nullopt;
    try {
        return parse_expr(code.substr(toks[first].begin, toks[end - 1].end - toks[first].begin));
    } catch (const BoundsSyntaxError &) {
        return std::nullopt;
    }
}

// Splits [first, end) at depth-0 occurrences of `sep`.
std::vector<std::pair<std::size_t, std::size_t>> split_depth0(const Toks &toks, std::size_t first, std::size_t end,
                                                              std::string_view sep) {
    std::vector<std::pair<std::size_t, std::size_t>> parts;
    int depth = 0;
    std::size_t start = first;
    for (std::size_t i = first; i < end; ++i) {
        if (toks[i].is("(") || toks[i].is("["))
            ++depth;
        else if (toks[i].is(")") || toks[i].is("]"))
            --depth;
        else if (depth == 0 && toks[i].is(sep)) {
            parts.emplace_back(start, i);
            start = i + 1;
        }
    }
    parts.emplace_back(start, end);
    return parts;
}

bool is_sizeof(const Toks &toks, std::pair<std::size_t, std::size_t> part) {
    return part.second > part.first && toks[part.first].is("sizeof");
}

// R1
std::optional<BoundsAnnotation> rule_alloc(const std::string &code, const Toks &toks, std::string_view name) {
    for (std::size_t k = 0; k + 2 < toks.size(); ++k) {
        if (!plain_occurrence(toks, k, name) || !toks[k + 1].is("="))
            continue;
        std::size_t v = k + 2;
        if (toks[v].is("(")) {
            std::size_t c = match_close(toks, v);
            if (c + 1 < toks.size() && toks[c + 1].is_ident())
                v = c + 1; // cast
        }
        if (v + 1 >= toks.size() || !toks[v + 1].is("("))
            continue;
        std::size_t open = v + 1, close = match_close(toks, open);
        if (close >= toks.size())
            continue;
        if (toks[v].text == "malloc") {
            auto factors = split_depth0(toks, open + 1, close, "*");
            if (factors.size() < 2)
                continue;
            std::vector<std::pair<std::size_t, std::size_t>> rest;
            bool saw_sizeof = false;
            for (const auto &f : factors) {
                if (!saw_sizeof && is_sizeof(toks, f))
                    saw_sizeof = true;
                else
                    rest.push_back(f);
            }
            if (!saw_sizeof || rest.size() != 1)
                continue;
            if (auto e = expr_from(code, toks, rest[0].first, rest[0].second))
                return BoundsAnnotation::count(*e);
        } else if (toks[v].text == "calloc") {
            auto args = split_depth0(toks, open + 1, close, ",");
            if (args.size() != 2 || !is_sizeof(toks, args[1]))
                continue;
            if (auto e = expr_from(code, toks, args[0].first, args[0].second))
                return BoundsAnnotation::count(*e);
        }
    }
    return std::nullopt;
}

// R2
std::optional<BoundsAnnotation> rule_loop(const std::string &code, const Toks &toks, std::string_view name) {
    for (std::size_t k = 0; k + 1 < toks.size(); ++k) {
        if (!toks[k].is("for") || !toks[k + 1].is("("))
            continue;
        std::size_t open = k + 1, close = match_close(toks, open);
        if (close >= toks.size())
            continue;
        auto parts = split_depth0(toks, open + 1, close, ";");
        if (parts.size() != 3)
            continue;
        auto [ib, ie] = parts[0];
        if (ie < ib + 3 || !toks[ie - 2].is("=") || toks[ie - 1].text != "0" || !toks[ie - 3].is_ident())
            continue;
        std::string_view i = toks[ie - 3].text;
        auto [cb, ce] = parts[1];
        if (ce < cb + 3 || toks[cb].text != i || !toks[cb + 1].is("<"))
            continue;
        auto [xb, xe] = parts[2];
        std::size_t len = xe - xb;
        bool step = (len == 2 && ((toks[xb].text == i && toks[xb + 1].is("++")) ||
                                  (toks[xb].is("++") && toks[xb + 1].text == i))) ||
                    (len == 3 && toks[xb].text == i && toks[xb + 1].is("+=") && toks[xb + 2].text == "1");
        if (!step)
            continue;
        std::size_t body_begin = close + 1, body_end;
        if (body_begin < toks.size() && toks[body_begin].is("{")) {
            body_end = match_close(toks, body_begin);
        } else {
            body_end = body_begin;
            int depth = 0;
            while (body_end < toks.size() && !(depth == 0 && toks[body_end].is(";"))) {
                if (toks[body_end].is("(") || toks[body_end].is("["))
                    ++depth;
                else if (toks[body_end].is(")") || toks[body_end].is("]"))
                    --depth;
                ++body_end;
            }
        }
        bool indexed = false;
        for (std::size_t b = body_begin; b + 3 < toks.size() && b < body_end; ++b)
            if (plain_occurrence(toks, b, name) && toks[b + 1].is("[") && toks[b + 2].text == i && toks[b + 3].is("]"))
                indexed = true;
        if (!indexed)
            continue;
        if (auto e = expr_from(code, toks, cb + 2, ce))
            return BoundsAnnotation::count(*e);
    }
    return std::nullopt;
}

// R4: the pointer this one is assigned from, if any.
std::vector<std::string> assigned_from(const Toks &toks, std::string_view name) {
    std::vector<std::string> out;
    for (std::size_t k = 0; k + 3 < toks.size(); ++k)
        if (plain_occurrence(toks, k, name) && toks[k + 1].is("=") && toks[k + 2].is_ident() &&
            (toks[k + 3].is(";") || toks[k + 3].is(",")))
            out.emplace_back(toks[k + 2].text);
    return out;
}

const Declarator *find_declarator(const Declaration &d, const std::string &name) {
    for (const auto &p : d.meta.params)
        if (p.name == name)
            return &p;
    for (const auto &l : d.meta.locals)
        if (l.name == name)
            return &l;
    return nullptr;
}

} // namespace

std::string mock_respond(const PromptText &prompt) {
    PromptSections sec;
    try {
        sec = parse_prompt(prompt.rendered);
    } catch (const Error &) {
        return "";
    }
    if (sec.task != TaskId::BoundsInference || sec.elements.empty())
        return "";
    std::vector<Declaration> parsed;
    try {
        parsed = reparse("<prompt>", sec.code);
    } catch (const Error &) {
        return "";
    }
    if (parsed.size() != 1 || parsed[0].kind != DeclKind::Procedure)
        return "";
    const Declaration &d = parsed[0];
    const std::string &code = d.code;
    Toks toks = tokenize(code);

    std::map<std::string, PointerKind> kinds;
    std::map<std::string, BoundsAnnotation> known;
    for (const auto &s : classify_pointer_lite(d)) {
        kinds[s.symbol] = s.kind;
        if (s.annotated() && !s.bounds.is_none())
            known[s.symbol] = s.bounds;
    }

    struct Decision {
        PointerKind kind;
        BoundsAnnotation bounds;
    };
    std::map<std::string, Decision> decided;
    std::vector<std::string> order;
    for (const auto &e : sec.elements) {
        if (decided.count(e.symbol) || !find_declarator(d, e.symbol))
            continue;
        order.push_back(e.symbol);
        PointerKind kind = kinds.count(e.symbol) ? kinds[e.symbol] : PointerKind::Arr;
        if (kind != PointerKind::NtArr)
            kind = PointerKind::Arr;
        if (auto b = rule_alloc(code, toks, e.symbol))
            decided[e.symbol] = {kind, *b};
        else if (auto b2 = rule_loop(code, toks, e.symbol))
            decided[e.symbol] = {kind, *b2};
        else if (pointer_usage(d, e.symbol).nt_scan)
            decided[e.symbol] = {PointerKind::NtArr, BoundsAnnotation::count(Expr::integer("0"))};
    }
    for (bool changed = true; changed;) {
        changed = false;
        for (const auto &name : order) {
            if (decided.count(name))
                continue;
            for (const auto &src : assigned_from(toks, name)) {
                const BoundsAnnotation *b = nullptr;
                if (auto it = decided.find(src); it != decided.end())
                    b = &it->second.bounds;
                else if (auto k = known.find(src); k != known.end())
                    b = &k->second;
                if (b) {
                    PointerKind kind = kinds.count(name) && kinds[name] == PointerKind::NtArr ? PointerKind::NtArr
                                                                                                : PointerKind::Arr;
                    decided[name] = {kind, *b};
                    changed = true;
                    break;
                }
            }
        }
    }

    std::string updated = code;
    for (const auto &name : order) {
        auto it = decided.find(name);
        if (it == decided.end())
            continue;
        auto now = reparse("<prompt>", updated);
        if (now.size() != 1)
            break;
        const Declarator *x = find_declarator(now[0], name);
        if (!x)
            continue;
        if (auto rewritten = rewrite_declarator(updated, *x, it->second.kind, it->second.bounds))
            updated = *rewritten;
    }
    if (updated == code)
        return "";
    return serialize_patch(diff_to_patch(code, updated));
}

} // namespace ccport
