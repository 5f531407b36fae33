#include "ccport/orchestrator.hpp"

#include "ccport/checkedc.hpp"
#include "ccport/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ccport {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Program

Program Program::load(std::vector<SourceUnit> units) {
    Program p;
    p.rebuild(std::move(units));
    return p;
}

void Program::rebuild(std::vector<SourceUnit> units) {
    decls_ = extract_declarations(units);
    units_.clear();
    std::size_t next = 0;
    for (const auto &u : units) {
        Unit out;
        out.path = u.path;
        std::size_t prev = 0;
        while (next < decls_.size() && decls_[next].span.file == u.path) {
            const Span &s = decls_[next].span;
            out.gaps.push_back(u.text.substr(prev, s.begin - prev));
            out.decls.push_back(next);
            prev = s.end;
            ++next;
        }
        out.gaps.push_back(u.text.substr(prev));
        units_.push_back(std::move(out));
    }
}

const Declaration *Program::find(const std::string &id) const {
    for (const auto &d : decls_)
        if (d.id == id)
            return &d;
    return nullptr;
}

std::string Program::render(std::size_t unit) const {
    const Unit &u = units_[unit];
    std::string out = u.gaps[0];
    for (std::size_t i = 0; i < u.decls.size(); ++i) {
        out += decls_[u.decls[i]].code;
        out += u.gaps[i + 1];
    }
    return out;
}

bool Program::set_code(const std::string &id, const std::string &code) {
    auto it = std::find_if(decls_.begin(), decls_.end(), [&](const Declaration &d) { return d.id == id; });
    if (it == decls_.end())
        return false;
    std::vector<Declaration> parsed;
    try {
        parsed = reparse(it->span.file, code);
    } catch (const ParseError &) {
        return false;
    }
    if (parsed.size() != 1 || parsed[0].kind != it->kind || parsed[0].name != it->name)
        return false;
    it->code = code;
    it->meta = std::move(parsed[0].meta);
    return true;
}

void Program::insert_before(const std::string &id, const std::string &text) {
    std::vector<SourceUnit> units;
    for (std::size_t u = 0; u < units_.size(); ++u) {
        std::string rendered;
        const Unit &unit = units_[u];
        rendered += unit.gaps[0];
        for (std::size_t i = 0; i < unit.decls.size(); ++i) {
            const Declaration &d = decls_[unit.decls[i]];
            if (d.id == id)
                rendered += text;
            rendered += d.code;
            rendered += unit.gaps[i + 1];
        }
        units.push_back(SourceUnit::from_text(unit.path, std::move(rendered)));
    }
    rebuild(std::move(units));
}

void Program::reparse_all() {
    std::vector<SourceUnit> units;
    for (std::size_t u = 0; u < units_.size(); ++u)
        units.push_back(SourceUnit::from_text(units_[u].path, render(u)));
    rebuild(std::move(units));
}

// ---------------------------------------------------------------------------
// Reports

TransformState TransformState::start(const Program &program) {
    TransformState s;
    for (const auto &d : program.decls()) {
        s.oldcode[d.id] = d.code;
        s.refactored[d.id] = false;
    }
    return s;
}

std::string_view to_string(OutcomeKind k) {
    switch (k) {
    case OutcomeKind::Applied:
        return "applied";
    case OutcomeKind::Empty:
        return "empty";
    case OutcomeKind::Skipped:
        return "skipped";
    case OutcomeKind::Rejected:
        return "rejected";
    }
    return "?";
}

std::size_t PassReport::count(OutcomeKind k) const {
    return static_cast<std::size_t>(
        std::count_if(outcomes.begin(), outcomes.end(), [&](const DeclOutcome &o) { return o.kind == k; }));
}

namespace {

ojson change_json(const AnnotationChange &c) {
    ojson j;
    j["decl"] = c.decl_id;
    j["symbol"] = c.symbol;
    j["annotation"] = c.annotation;
    if (!c.reason.empty())
        j["reason"] = c.reason;
    return j;
}

ojson tally_json(const std::vector<std::pair<std::string, std::size_t>> &tally) {
    ojson arr = ojson::array();
    for (const auto &[patch, votes] : tally)
        arr.push_back(ojson{{"patch", patch}, {"votes", votes}});
    return arr;
}

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void write_file(const fs::path &path, const std::string &text) {
    std::error_code ec;
    if (path.has_parent_path())
        fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << text;
    if (!out)
        throw IoError("write failed: " + path.string());
}

std::string file_safe(const std::string &id) {
    std::string out;
    for (char c : id)
        out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
    return out;
}

} // namespace

std::string report_to_json(const PassReport &r) {
    ojson j;
    j["pass"] = r.pass;
    j["task"] = std::string(to_string(r.task));
    j["ran"] = r.ran;
    j["queries"] = r.queries;
    j["completions"] = r.completions;
    ojson counts;
    for (auto k : {OutcomeKind::Applied, OutcomeKind::Empty, OutcomeKind::Skipped, OutcomeKind::Rejected})
        counts[std::string(to_string(k))] = r.count(k);
    j["counts"] = counts;
    ojson outcomes = ojson::array();
    for (const auto &o : r.outcomes) {
        ojson e;
        e["decl"] = o.decl_id;
        e["status"] = std::string(to_string(o.kind));
        if (!o.reason.empty())
            e["reason"] = o.reason;
        if (!o.fingerprint.empty())
            e["fingerprint"] = o.fingerprint;
        if (!o.history.empty())
            e["history"] = o.history;
        if (!o.tally.empty())
            e["tally"] = tally_json(o.tally);
        outcomes.push_back(e);
    }
    j["outcomes"] = outcomes;
    ojson added = ojson::array(), dropped = ojson::array();
    for (const auto &c : r.added)
        added.push_back(change_json(c));
    for (const auto &c : r.dropped)
        dropped.push_back(change_json(c));
    j["annotations_added"] = added;
    j["annotations_dropped"] = dropped;
    j["warnings"] = r.warnings;
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// One pass

namespace {

std::string collapse_ws(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = !out.empty();
            continue;
        }
        if (space)
            out += ' ';
        space = false;
        out += c;
    }
    return out;
}

std::set<std::string> global_names(const Program &program) {
    std::set<std::string> out;
    for (const auto &d : program.decls()) {
        if (!d.is_canonical() && d.kind != DeclKind::Global)
            continue;
        if (d.kind == DeclKind::Procedure)
            continue;
        for (auto &n : d.all_names())
            out.insert(n);
    }
    return out;
}

Declaration reparse_one(const Declaration &like, const std::string &code) {
    auto parsed = reparse(like.span.file, code);
    if (parsed.size() != 1 || parsed[0].kind != like.kind || parsed[0].name != like.name)
        throw PatchRejected(PatchRejected::Reason::NoMatch, 0,
                            "patched text no longer parses as " + std::string(to_string(like.kind)) + " " + like.name);
    Declaration d = std::move(parsed[0]);
    d.id = like.id;
    d.canonical_id = like.canonical_id;
    d.span = like.span;
    return d;
}

struct Validated {
    Declaration decl;
    std::vector<AnnotationChange> added;
    std::vector<AnnotationChange> dropped;
};

// Keeps new or changed annotations whose identifiers resolve; strips the rest.
Validated validate_annotations(const Declaration &before, Declaration after, const std::set<std::string> &globals) {
    Validated out;
    std::map<std::pair<SiteScope, std::string>, std::string> old;
    for (const auto &sd : all_declarators(before))
        old[{sd.scope, sd.decl->name}] = collapse_ws(sd.decl->annotation);

    std::set<std::pair<SiteScope, std::string>> accepted;
    bool again = true;
    while (again) {
        again = false;
        std::set<std::string> fields;
        for (const auto &f : after.meta.fields)
            fields.insert(f.name);
        for (const auto &sd : all_declarators(after)) {
            const Declarator &dc = *sd.decl;
            auto key = std::make_pair(sd.scope, dc.name);
            if (dc.annotation.empty() || accepted.count(key))
                continue;
            auto it = old.find(key);
            if (it != old.end() && it->second == collapse_ws(dc.annotation))
                continue;
            std::string reason;
            AnnotationSite site;
            site.decl_id = after.id;
            site.symbol = dc.name;
            site.scope = sd.scope;
            site.line = dc.line;
            site.raw_annotation = dc.annotation;
            try {
                site.bounds = parse_bounds(dc.annotation);
                ScopeVerdict v = validate_scope(site, after.meta, globals, fields);
                if (!v.valid)
                    reason = "identifier '" + v.offending + "' not in scope";
            } catch (const BoundsSyntaxError &e) {
                reason = std::string("malformed bounds: ") + e.what();
            }
            if (reason.empty()) {
                accepted.insert(key);
                out.added.push_back({after.id, dc.name, collapse_ws(dc.annotation), ""});
                continue;
            }
            out.dropped.push_back({after.id, dc.name, collapse_ws(dc.annotation), reason});
            after = reparse_one(after, strip_annotation(after.code, dc));
            again = true;
            break;
        }
    }

    const std::string &ret = after.meta.return_annotation;
    if (!ret.empty() && collapse_ws(ret) != collapse_ws(before.meta.return_annotation)) {
        AnnotationSite site;
        site.decl_id = after.id;
        site.symbol = after.name;
        site.scope = SiteScope::Return;
        site.raw_annotation = ret;
        std::string reason;
        try {
            site.bounds = parse_bounds(ret);
            ScopeVerdict v = validate_scope(site, after.meta, globals, {});
            if (!v.valid)
                reason = "identifier '" + v.offending + "' not in scope";
        } catch (const BoundsSyntaxError &e) {
            reason = std::string("malformed bounds: ") + e.what();
        }
        if (reason.empty()) {
            out.added.push_back({after.id, after.name, collapse_ws(ret), ""});
        } else {
            out.dropped.push_back({after.id, after.name, collapse_ws(ret), reason});
            std::string code = after.code;
            std::size_t b = after.meta.return_annot_begin, e = after.meta.return_annot_end;
            while (b > 0 && std::isspace(static_cast<unsigned char>(code[b - 1])))
                --b;
            code.erase(b, e - b);
            after = reparse_one(after, code);
        }
    }
    out.decl = std::move(after);
    return out;
}

struct Routed {
    std::string target;
    Patch patch;
};

// Assigns every block to the declaration itself or, failing that, to the
// first context global / type it applies to.
std::vector<Routed> route_blocks(const Patch &p, const Declaration &d, const std::vector<const Declaration *> &others) {
    std::vector<const Declaration *> targets{&d};
    targets.insert(targets.end(), others.begin(), others.end());
    std::vector<Patch> parts(targets.size());
    for (std::size_t i = 0; i < p.blocks.size(); ++i) {
        bool placed = false;
        for (std::size_t t = 0; t < targets.size() && !placed; ++t) {
            Patch trial = parts[t];
            trial.blocks.push_back(p.blocks[i]);
            try {
                apply_patch_detailed(trial, targets[t]->code);
                parts[t] = std::move(trial);
                placed = true;
            } catch (const PatchRejected &) {
            }
        }
        if (!placed) {
            Patch trial = parts[0];
            trial.blocks.push_back(p.blocks[i]);
            try {
                apply_patch_detailed(trial, d.code);
            } catch (const PatchRejected &e) {
                throw PatchRejected(e.reason(), i, "block " + std::to_string(i) + ": " + e.what());
            }
        }
    }
    std::vector<Routed> out;
    for (std::size_t t = 0; t < targets.size(); ++t)
        if (!parts[t].empty())
            out.push_back({targets[t]->id, std::move(parts[t])});
    return out;
}

void resync_prototypes(Program &program, const Declaration &def) {
    std::vector<std::pair<std::string, std::string>> updates;
    for (const auto &p : program.decls()) {
        if (p.canonical_id != def.id || p.kind != DeclKind::Procedure || p.meta.has_body)
            continue;
        std::string sig = def.meta.signature_text;
        if (p.code.rfind("extern", 0) == 0 && sig.rfind("extern", 0) != 0)
            sig = "extern " + sig;
        updates.emplace_back(p.id, sig + ";");
    }
    for (const auto &[id, code] : updates)
        program.set_code(id, code);
}

std::vector<std::string> extern_ids(const Program &program, const std::string &def_id) {
    std::vector<std::string> out;
    for (const auto &e : program.decls())
        if (e.canonical_id == def_id && e.kind == DeclKind::Global)
            out.push_back(e.id);
    return out;
}

// Extern declarations of a single-variable global follow its definition.
void resync_externs(Program &program, const std::string &def_id) {
    const Declaration *def = program.find(def_id);
    if (!def || def->meta.declarators.size() != 1 || !def->meta.declarators[0].initializer.empty())
        return;
    std::string code = def->code.rfind("extern", 0) == 0 ? def->code : "extern " + def->code;
    for (const auto &id : extern_ids(program, def_id))
        program.set_code(id, code);
}

void log_query(QueryLog *log, int pass, TaskId task, const std::string &decl, const PromptText &prompt,
               const DeclOutcome &o, std::size_t n, std::size_t received) {
    if (!log || log->dir.empty())
        return;
    std::ostringstream stem;
    stem << std::setw(4) << std::setfill('0') << log->next_seq++ << "_p" << pass << "_" << file_safe(decl);
    fs::path base = log->dir / "queries";
    write_file(base / (stem.str() + ".prompt.txt"), prompt.rendered);
    ojson j;
    j["pass"] = pass;
    j["task"] = std::string(to_string(task));
    j["decl"] = decl;
    j["fingerprint"] = prompt.fingerprint;
    j["n"] = n;
    j["received"] = received;
    j["history"] = o.history;
    j["tally"] = tally_json(o.tally);
    j["winner"] = o.tally.empty() || o.kind == OutcomeKind::Skipped ? "" : o.tally.front().first;
    j["status"] = std::string(to_string(o.kind));
    j["reason"] = o.reason;
    j["timestamp"] = utc_timestamp();
    write_file(base / (stem.str() + ".json"), j.dump(2) + "\n");
}

} // namespace

PassReport run_pass(int pass, TaskId task, Program &program, Backend &backend, const PassOptions &options,
                    TransformState &state, QueryLog *log, const std::vector<IntroducedBoundsVar> &introduced,
                    std::vector<SharedSiteProposal> *proposals) {
    PassReport report;
    report.pass = pass;
    report.task = task;
    report.ran = true;

    DependencyGraph graph = build_graph(program.decls());
    std::vector<std::string> order = bottom_up_order(graph);
    std::vector<AnnotationSite> program_sites;
    if (task == TaskId::NestedArrays)
        program_sites = classify_program(program.decls());
    const std::set<std::string> globals = global_names(program);
    const TaskSpec &spec = task_spec(task);

    for (const std::string &id : order) {
        const Declaration *found = program.find(id);
        if (!found)
            continue;
        if (task == TaskId::BoundsInference && found->kind != DeclKind::Procedure)
            continue;
        const Declaration d = *found;

        DeclOutcome outcome;
        outcome.decl_id = id;

        TaskElements elements;
        if (task == TaskId::BoundsInference)
            elements = elements_for(task, d, classify_pointer_lite(d));
        else if (task == TaskId::NestedArrays)
            elements = elements_for(task, d, program_sites);
        else
            elements = elements_for(task, d, {}, introduced);

        std::vector<std::string> done;
        for (const auto &s : graph.successors(id))
            if (state.refactored[s])
                done.push_back(s);
        std::sort(done.begin(), done.end(),
                  [&](const std::string &a, const std::string &b) { return state.refactored_at[a] < state.refactored_at[b]; });
        std::vector<RefactorHistoryEntry> history;
        for (const auto &s : done) {
            const Declaration *sd = program.find(s);
            if (!sd)
                continue;
            history.push_back({sd->name, state.oldcode[s], sd->code});
            outcome.history.push_back(sd->name);
        }

        if (elements.empty() && history.empty()) {
            outcome.kind = OutcomeKind::Skipped;
            outcome.reason = "nothing to do";
            report.outcomes.push_back(std::move(outcome));
            continue;
        }

        std::vector<PreludeFragment> prelude = prelude_of(id, graph, program.decls());
        PromptText prompt;
        try {
            prompt = render_prompt(spec, prelude, d.code, history, elements, options.token_budget);
        } catch (const PromptTooLarge &e) {
            outcome.kind = OutcomeKind::Skipped;
            outcome.reason = std::string("prompt too large: ") + e.what();
            report.warnings.push_back(id + ": " + outcome.reason);
            report.outcomes.push_back(std::move(outcome));
            continue;
        }
        outcome.fingerprint = prompt.fingerprint;

        CompletionSet completions;
        ++report.queries;
        try {
            completions = backend.complete(QueryContext{task, id}, prompt, options.completions);
        } catch (const BackendUnavailable &e) {
            outcome.kind = OutcomeKind::Skipped;
            outcome.reason = std::string("backend unavailable: ") + e.what();
        } catch (const ReplayMiss &e) {
            outcome.kind = OutcomeKind::Skipped;
            outcome.reason = std::string("replay miss: ") + e.what();
        }
        if (outcome.kind == OutcomeKind::Skipped && !outcome.reason.empty()) {
            report.warnings.push_back(id + ": " + outcome.reason);
            log_query(log, pass, task, id, prompt, outcome, options.completions, 0);
            report.outcomes.push_back(std::move(outcome));
            continue;
        }
        report.completions += completions.completions.size();

        VoteResult vote = majority_vote(completions.completions);
        outcome.tally = vote.tally;
        if (vote.total == 0) {
            outcome.kind = OutcomeKind::Empty;
            outcome.reason = "no parseable completion";
        } else if (vote.winner.empty()) {
            outcome.kind = OutcomeKind::Empty;
        } else {
            std::vector<const Declaration *> others;
            for (const auto &f : prelude)
                if (f.kind == DeclKind::Global || f.kind == DeclKind::TypeDecl)
                    if (const Declaration *od = program.find(f.id))
                        others.push_back(od);
            try {
                std::vector<Routed> routed = route_blocks(vote.winner, d, others);
                std::vector<Validated> results;
                std::vector<const Patch *> patches;
                for (const auto &r : routed) {
                    const Declaration &before = *program.find(r.target);
                    Declaration after = reparse_one(before, apply_patch(r.patch, before.code));
                    results.push_back(validate_annotations(before, std::move(after), globals));
                    patches.push_back(&r.patch);
                }
                for (std::size_t i = 0; i < results.size(); ++i) {
                    const Validated &v = results[i];
                    const Declaration &before = *program.find(v.decl.id);
                    bool changed = v.decl.code != before.code;
                    bool sig = changed && signature_changed(*patches[i], before);
                    program.set_code(v.decl.id, v.decl.code);
                    report.added.insert(report.added.end(), v.added.begin(), v.added.end());
                    for (const auto &drop : v.dropped) {
                        report.dropped.push_back(drop);
                        report.warnings.push_back(drop.decl_id + ": dropped annotation on " + drop.symbol + " (" +
                                                  drop.reason + ")");
                    }
                    if (v.decl.id != id) {
                        if (changed)
                            state.mark(v.decl.id);
                        if (changed && v.decl.kind == DeclKind::Global)
                            resync_externs(program, v.decl.id);
                        if (proposals)
                            for (const auto &a : v.added)
                                proposals->push_back({v.decl.id, a.symbol, normalize_bounds_text(a.annotation), id});
                    } else if (sig) {
                        state.mark(id);
                        if (d.kind == DeclKind::Procedure)
                            resync_prototypes(program, *program.find(id));
                    }
                }
                outcome.kind = OutcomeKind::Applied;
            } catch (const PatchRejected &e) {
                outcome.kind = OutcomeKind::Rejected;
                outcome.reason = e.what();
                report.warnings.push_back(id + ": patch rejected: " + outcome.reason);
            }
        }
        log_query(log, pass, task, id, prompt, outcome, options.completions, completions.completions.size());
        report.outcomes.push_back(std::move(outcome));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Symbolic steps between passes

namespace {

std::string type_suffix(const std::string &t) {
    std::string out;
    for (char c : collapse_ws(t)) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_')
            out += c;
        else if (c == ' ')
            out += '_';
        else if (c == '*')
            out += "ptr";
    }
    return out;
}

const Declarator *find_declarator(const Declaration &d, const std::string &symbol, SiteScope scope) {
    const auto &list = scope == SiteScope::Field ? d.meta.fields : d.meta.declarators;
    for (const auto &dc : list)
        if (dc.name == symbol)
            return &dc;
    return nullptr;
}

} // namespace

std::vector<std::string> pass1_prepare(Program &program) {
    std::vector<AnnotationSite> sites = classify_program(program.decls());
    // element type -> first declaration (program order) holding such a site
    std::vector<std::pair<std::string, std::string>> wanted;
    for (const auto &d : program.decls()) {
        for (const auto &s : sites) {
            if (s.decl_id != d.id || !s.nested || s.element_type.empty())
                continue;
            bool seen = std::any_of(wanted.begin(), wanted.end(), [&](auto &w) { return w.first == s.element_type; });
            if (!seen)
                wanted.emplace_back(s.element_type, d.id);
        }
    }

    std::vector<std::string> inserted;
    for (const auto &[elem, before_id] : wanted) {
        std::string name = "arr_of_" + type_suffix(elem);
        const Declaration *existing = nullptr;
        for (const auto &d : program.decls())
            for (const auto &n : d.all_names())
                if (n == name && d.is_canonical())
                    existing = &d;
        if (existing) {
            bool has_ptr = false, has_len = false;
            for (const auto &f : existing->meta.fields) {
                has_ptr |= f.name == "ptr" && f.is_pointer_like();
                has_len |= f.name == "len";
            }
            if (existing->kind == DeclKind::TypeDecl && has_ptr && has_len)
                continue;
            throw NameCollision(name + " is already declared with a different shape");
        }
        std::string text = "typedef struct " + name + " {\n  arr<" + collapse_ws(elem) +
                           "> ptr : count(len);\n  int len;\n} " + name + ";\n\n";
        program.insert_before(before_id, text);
        inserted.push_back(name);
    }
    return inserted;
}

std::vector<AnnotationChange> pass2_postprocess(Program &program, const std::vector<SharedSiteProposal> &proposals) {
    std::map<std::pair<std::string, std::string>, std::map<std::string, std::set<std::string>>> by_site;
    for (const auto &p : proposals)
        by_site[{p.target_id, p.symbol}][p.normalized_bounds].insert(p.proposer);

    std::vector<AnnotationChange> dropped;
    for (const auto &[site, variants] : by_site) {
        if (variants.size() < 2)
            continue;
        const Declaration *d = program.find(site.first);
        if (!d)
            continue;
        SiteScope scope = d->kind == DeclKind::TypeDecl ? SiteScope::Field : SiteScope::Global;
        const Declarator *dc = find_declarator(*d, site.second, scope);
        if (!dc || dc->annotation.empty())
            continue;
        std::string who;
        for (const auto &[bounds, procs] : variants)
            for (const auto &p : procs)
                who += (who.empty() ? "" : ", ") + p + " -> " + bounds;
        dropped.push_back({d->id, dc->name, collapse_ws(dc->annotation), "conflicting proposals: " + who});
        program.set_code(d->id, strip_annotation(d->code, *dc));
    }
    return dropped;
}

Pass3Preparation pass3_prepare(Program &program) {
    Pass3Preparation out;
    struct Work {
        std::string decl_id;
        std::string symbol;
        SiteScope scope;
    };
    std::vector<Work> work;
    for (const auto &s : classify_program(program.decls()))
        if ((s.scope == SiteScope::Global || s.scope == SiteScope::Field) && s.kind == PointerKind::Arr &&
            !s.annotated() && !s.nested)
            work.push_back({s.decl_id, s.symbol, s.scope});

    std::set<std::string> taken = declared_names(program.decls());
    for (const auto &w : work) {
        const Declaration *d = program.find(w.decl_id);
        if (!d)
            continue;
        const Declarator *dc = find_declarator(*d, w.symbol, w.scope);
        if (!dc)
            continue;
        std::set<std::string> local = taken;
        for (const auto &f : d->meta.fields)
            local.insert(f.name);
        std::string var = "count_for_" + w.symbol;
        for (int k = 2; local.count(var); ++k)
            var = "count_for_" + w.symbol + "_" + std::to_string(k);

        auto rewritten = rewrite_declarator(d->code, *dc, PointerKind::Arr, BoundsAnnotation::count(Expr::ident(var)));
        if (!rewritten) {
            out.warnings.push_back(d->id + ": cannot annotate " + w.symbol + " in place (shared declaration)");
            continue;
        }
        std::string code = *rewritten;
        std::string original = d->code;
        std::string id = d->id;
        if (w.scope == SiteScope::Field) {
            std::size_t ls = code.rfind('\n', dc->stmt_begin == 0 ? 0 : dc->stmt_begin - 1);
            ls = ls == std::string::npos ? 0 : ls + 1;
            std::size_t ie = ls;
            while (ie < code.size() && (code[ie] == ' ' || code[ie] == '\t'))
                ++ie;
            code.insert(ls, code.substr(ls, ie - ls) + "int " + var + ";\n");
            if (!program.set_code(id, code)) {
                out.warnings.push_back(id + ": could not introduce " + var);
                continue;
            }
        } else {
            if (!program.set_code(id, code)) {
                out.warnings.push_back(id + ": could not introduce " + var);
                continue;
            }
            program.insert_before(id, "int " + var + ";\n");
            for (const auto &ext : extern_ids(program, id))
                program.insert_before(ext, "extern int " + var + ";\n");
            resync_externs(program, id);
        }
        out.before.emplace(id, original);
        taken.insert(var);
        out.introduced.push_back({w.symbol, var, w.scope});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

fs::path common_root(const std::vector<std::string> &inputs) {
    std::optional<fs::path> root;
    for (const auto &in : inputs) {
        fs::path dir = fs::absolute(in).lexically_normal().parent_path();
        if (!root) {
            root = dir;
            continue;
        }
        fs::path common;
        auto a = root->begin(), b = dir.begin();
        for (; a != root->end() && b != dir.end() && *a == *b; ++a, ++b)
            common /= *a;
        root = common;
    }
    return root.value_or(fs::current_path());
}

TaskId task_of_pass(int pass) {
    return pass == 1 ? TaskId::NestedArrays : pass == 2 ? TaskId::BoundsInference : TaskId::GlobalsFields;
}

} // namespace

PipelineResult run_pipeline(const PipelineConfig &config, Backend &backend) {
    PipelineResult result;
    Program program = Program::load(parse_units(config.inputs));
    std::set<int> selected(config.passes.begin(), config.passes.end());
    QueryLog log{config.log_dir};

    for (int pass = 1; pass <= 3; ++pass) {
        PassReport report;
        report.pass = pass;
        report.task = task_of_pass(pass);
        if (!selected.count(pass)) {
            result.reports.push_back(report);
            continue;
        }
        if (pass == 1) {
            std::vector<std::string> inserted;
            try {
                inserted = pass1_prepare(program);
            } catch (const NameCollision &e) {
                result.warnings.push_back(std::string("pass 1: ") + e.what());
            }
            TransformState state = TransformState::start(program);
            report = run_pass(1, report.task, program, backend, config.options, state, &log);
            for (const auto &n : inserted)
                report.added.push_back({"type:" + n, "ptr", "count(len)", ""});
        } else if (pass == 2) {
            TransformState state = TransformState::start(program);
            std::vector<SharedSiteProposal> proposals;
            report = run_pass(2, report.task, program, backend, config.options, state, &log, {}, &proposals);
            for (auto &drop : pass2_postprocess(program, proposals)) {
                report.warnings.push_back(drop.decl_id + ": dropped annotation on " + drop.symbol + " (" +
                                          drop.reason + ")");
                report.dropped.push_back(std::move(drop));
            }
        } else {
            Pass3Preparation prep = pass3_prepare(program);
            TransformState state = TransformState::start(program);
            for (const auto &[id, code] : prep.before) {
                state.oldcode[id] = code;
                state.mark(id);
            }
            report = run_pass(3, report.task, program, backend, config.options, state, &log, prep.introduced);
            for (const auto &iv : prep.introduced)
                report.added.insert(report.added.begin(),
                                    AnnotationChange{"", iv.pointer, "count(" + iv.var + ")", ""});
            report.warnings.insert(report.warnings.begin(), prep.warnings.begin(), prep.warnings.end());
        }
        // keep spans and ids consistent with the text for the next pass
        program.reparse_all();
        result.warnings.insert(result.warnings.end(), report.warnings.begin(), report.warnings.end());
        result.reports.push_back(std::move(report));
    }

    if (!config.log_dir.empty())
        for (const auto &r : result.reports)
            write_file(config.log_dir / ("pass" + std::to_string(r.pass) + ".json"), report_to_json(r));

    fs::path root = common_root(config.inputs);
    for (std::size_t u = 0; u < program.unit_count(); ++u) {
        fs::path in = fs::absolute(program.unit_path(u)).lexically_normal();
        fs::path target = config.out_dir / in.lexically_relative(root);
        std::string text = program.render(u);
        if (config.long_spelling)
            text = convert_spelling(text, true);
        write_file(target, text);
        result.outputs[target.string()] = std::move(text);
    }
    return result;
}

std::string summary_table(const PipelineResult &result) {
    std::ostringstream os;
    os << std::left << std::setw(6) << "pass" << std::setw(18) << "task" << std::right << std::setw(8) << "queries"
       << std::setw(9) << "applied" << std::setw(7) << "empty" << std::setw(9) << "skipped" << std::setw(10)
       << "rejected" << std::setw(7) << "added" << std::setw(9) << "dropped" << std::setw(10) << "warnings"
       << "\n";
    for (const auto &r : result.reports) {
        os << std::left << std::setw(6) << r.pass << std::setw(18) << to_string(r.task) << std::right;
        if (!r.ran) {
            os << "  not selected\n";
            continue;
        }
        os << std::setw(8) << r.queries << std::setw(9) << r.count(OutcomeKind::Applied) << std::setw(7)
           << r.count(OutcomeKind::Empty) << std::setw(9) << r.count(OutcomeKind::Skipped) << std::setw(10)
           << r.count(OutcomeKind::Rejected) << std::setw(7) << r.added.size() << std::setw(9) << r.dropped.size()
           << std::setw(10) << r.warnings.size() << "\n";
    }
    return os.str();
}

} // namespace ccport
