#pragma once

// Scoring a transformed codebase against hand-written annotations.

#include "ccport/checkedc.hpp"
#include "ccport/source_model.hpp"

#include <string>
#include <vector>

namespace ccport {

struct GroundTruthEntry {
    std::string decl;   // declaration name
    std::string symbol; // parameter, local, field or global
    PointerKind kind = PointerKind::Arr;
    std::string bounds; // normalized; empty for an unannotated kind
};

struct GroundTruth {
    std::vector<GroundTruthEntry> entries;
};

/// JSON lines: {"decl": ..., "symbol": ..., "kind": "arr", "bounds": "count(n)"}.
/// Blank lines are skipped. Throws IoError, or Error for a malformed line or a
/// repeated (decl, symbol).
GroundTruth load_ground_truth(const std::string &path);
GroundTruth parse_ground_truth(const std::string &text);

struct Metrics {
    std::size_t required = 0;
    std::size_t inferred = 0;
    std::size_t correct = 0;
    std::size_t incorrect = 0;
    std::size_t not_inferred = 0;
};

struct EntryVerdict {
    enum class Status { Correct, Incorrect, NotInferred, MissingDecl };

    GroundTruthEntry expected;
    Status status = Status::NotInferred;
    std::string found_kind;
    std::string found_bounds;
};

std::string_view to_string(EntryVerdict::Status s);

struct EvalResult {
    Metrics metrics;
    std::vector<EntryVerdict> verdicts; // sorted by (decl, symbol)
    std::vector<std::string> mismatches; // GroundTruthMismatch messages
    std::size_t call_arity_mismatches = 0;
};

/// A site counts as inferred when it carries a bounds annotation (or, for an
/// entry without bounds, a checked spelling). It is correct when the kind
/// matches and the normalized bounds are equal; equivalent but differently
/// written expressions are not recognized.
EvalResult score(const std::vector<Declaration> &decls, const GroundTruth &gt);

/// Calls to program procedures whose argument count differs from the
/// callee's parameter count (callers not updated after a signature change).
std::size_t call_arity_mismatches(const std::vector<Declaration> &decls);

std::string metrics_to_json(const EvalResult &r);
std::string eval_report(const EvalResult &r);

} // namespace ccport
