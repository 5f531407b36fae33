#pragma once

// The three transformation passes over a whole program and the symbolic
// steps around them.

#include "ccport/depgraph.hpp"
#include "ccport/llm_gateway.hpp"
#include "ccport/patch_engine.hpp"
#include "ccport/prompt_engine.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace ccport {

/// The program as a list of units, each an alternation of untouched gap text
/// and declaration code. Rendering a unit concatenates both, so text outside
/// declarations is always preserved.
class Program {
public:
    static Program load(std::vector<SourceUnit> units);

    const std::vector<Declaration> &decls() const { return decls_; }
    const Declaration *find(const std::string &id) const;
    std::size_t unit_count() const { return units_.size(); }
    const std::string &unit_path(std::size_t unit) const { return units_[unit].path; }
    std::string render(std::size_t unit) const;

    /// Replaces the code of one declaration. The text has to parse as exactly
    /// one declaration of the same kind and name; returns false otherwise and
    /// changes nothing.
    bool set_code(const std::string &id, const std::string &code);

    /// Inserts `text` immediately before the declaration and re-parses the
    /// whole program.
    void insert_before(const std::string &id, const std::string &text);

    /// Re-parses every unit from its rendered text; ids are recomputed.
    void reparse_all();

private:
    struct Unit {
        std::string path;
        std::vector<std::string> gaps; // gaps.size() == decls.size() + 1
        std::vector<std::size_t> decls;
    };
    void rebuild(std::vector<SourceUnit> units);

    std::vector<Unit> units_;
    std::vector<Declaration> decls_;
};

struct TransformState {
    std::map<std::string, std::string> oldcode;
    std::map<std::string, bool> refactored;
    std::map<std::string, std::size_t> refactored_at; // order of refactoring, for history recency
    std::size_t clock = 0;

    void mark(const std::string &id) {
        refactored[id] = true;
        refactored_at[id] = ++clock;
    }

    /// Snapshot at pass start: nothing refactored, oldcode = current code.
    static TransformState start(const Program &program);
};

enum class OutcomeKind { Applied, Empty, Skipped, Rejected };
std::string_view to_string(OutcomeKind k);

struct DeclOutcome {
    std::string decl_id;
    OutcomeKind kind = OutcomeKind::Skipped;
    std::string reason;
    std::string fingerprint;
    std::vector<std::pair<std::string, std::size_t>> tally;
    std::vector<std::string> history; // names of the successors in the history
};

struct AnnotationChange {
    std::string decl_id;
    std::string symbol;
    std::string annotation;
    std::string reason; // drops only
};

struct PassReport {
    int pass = 0;
    TaskId task = TaskId::BoundsInference;
    bool ran = false;
    std::vector<DeclOutcome> outcomes;
    std::size_t queries = 0;
    std::size_t completions = 0;
    std::vector<AnnotationChange> added;
    std::vector<AnnotationChange> dropped;
    std::vector<std::string> warnings;

    std::size_t count(OutcomeKind k) const;
};

/// Per-pass report as JSON (outcomes, tallies, annotation changes).
std::string report_to_json(const PassReport &report);

/// Where per-query prompts and records go; empty disables logging.
struct QueryLog {
    std::filesystem::path dir;
    std::size_t next_seq = 1;
};

struct PassOptions {
    std::size_t completions = 10;
    std::size_t token_budget = kDefaultTokenBudget;
};

/// A bounds annotation one procedure's query put on a global or field.
struct SharedSiteProposal {
    std::string target_id;
    std::string symbol;
    std::string normalized_bounds;
    std::string proposer;
};

/// Runs the generic transformation for one task over the program.
/// BoundsInference visits procedures only. A declaration is skipped when it
/// has neither task elements nor refactored successors. Blocks of a winning
/// patch that do not match the declaration may apply to a global or type in
/// its context instead; the whole patch still applies atomically.
PassReport run_pass(int pass, TaskId task, Program &program, Backend &backend, const PassOptions &options,
                    TransformState &state, QueryLog *log = nullptr,
                    const std::vector<IntroducedBoundsVar> &introduced = {},
                    std::vector<SharedSiteProposal> *proposals = nullptr);

/// Inserts `typedef struct arr_of_T { arr<T> ptr : count(len); int len; }
/// arr_of_T;` once per element type T of an array-of-arrays site, before the
/// first declaration holding such a site. Returns the inserted type names.
/// Throws NameCollision when arr_of_T exists with a different shape.
std::vector<std::string> pass1_prepare(Program &program);

/// Removes global / field annotations that different procedures proposed
/// with different bounds. Returns the removed annotations.
std::vector<AnnotationChange> pass2_postprocess(Program &program, const std::vector<SharedSiteProposal> &proposals);

struct Pass3Preparation {
    std::vector<IntroducedBoundsVar> introduced;
    std::map<std::string, std::string> before; // decl id -> code before the step
    std::vector<std::string> warnings;
};

/// For every unannotated arr global g / field f, declares `int count_for_X;`
/// (suffixed on collision) and annotates X with count(count_for_X).
Pass3Preparation pass3_prepare(Program &program);

struct PipelineConfig {
    std::vector<std::string> inputs;
    std::filesystem::path out_dir;
    std::vector<int> passes{1, 2, 3};
    PassOptions options;
    bool long_spelling = false;
    std::filesystem::path log_dir; // empty: no logs
};

struct PipelineResult {
    std::vector<PassReport> reports; // one per pass 1..3, `ran` false when not selected
    std::vector<std::string> warnings;
    std::map<std::string, std::string> outputs; // written path -> text
};

/// Parses the inputs, runs the selected passes with their preparation steps
/// and writes the transformed units under out_dir, mirroring the inputs'
/// common directory. Throws ParseError / IoError / EncodingError.
PipelineResult run_pipeline(const PipelineConfig &config, Backend &backend);

/// Fixed-width per-pass table: queries, applied, empty, skipped, rejected,
/// annotations added and dropped, warnings.
std::string summary_table(const PipelineResult &result);

} // namespace ccport
