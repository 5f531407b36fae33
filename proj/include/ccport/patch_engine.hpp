#pragma once

// Line-oriented patches in the block format the prompts ask for:
//
//   <<<<ORIGINAL
//   ...original lines...
//   ====
//   >>>>REFACTORED
//   ...replacement lines...
//   <<<<END
//
// Markers are recognized on their own (whitespace-trimmed) line. Text outside
// blocks is ignored.

#include "ccport/source_model.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ccport {

struct PatchBlock {
    std::vector<std::string> original;
    std::vector<std::string> refactored;

    bool operator==(const PatchBlock &) const = default;
};

struct Patch {
    std::vector<PatchBlock> blocks;

    bool empty() const { return blocks.empty(); }
    bool operator==(const Patch &) const = default;
};

/// Throws MalformedBlock for a block that is opened but not closed, has its
/// markers out of order, or has no original lines.
Patch parse_response(std::string_view text);

/// Wire form of a patch; parse_response(serialize_patch(p)) == p.
std::string serialize_patch(const Patch &p);

/// Each line trimmed with inner whitespace runs collapsed to one space.
Patch normalize_patch(const Patch &p);

struct LineRange {
    std::size_t first = 0; // 0-based line index into the patched text
    std::size_t count = 0;
};

struct PatchApplication {
    std::string code;
    std::vector<LineRange> matched; // one per block, in the original text
};

/// Replaces, for every block in order, the first run of lines equal (after
/// trimming each line) to its original lines that no earlier block claimed.
/// All-or-nothing: throws PatchRejected and changes nothing when a block has
/// no match (NoMatch) or only matches regions already claimed
/// (AmbiguousOverlap).
PatchApplication apply_patch_detailed(const Patch &p, const std::string &code);
std::string apply_patch(const Patch &p, const std::string &code);

/// Procedures: whether a block that changes text matched a line of the
/// signature. Other declarations: whether the patch is non-empty.
bool signature_changed(const Patch &p, const Declaration &d);

struct VoteResult {
    Patch winner;
    std::string winner_key; // serialized normalized form
    /// normalized serialization -> votes, best first
    std::vector<std::pair<std::string, std::size_t>> tally;
    std::size_t total = 0;     // parseable completions
    std::size_t malformed = 0; // completions discarded
};

/// Plurality vote over whole normalized patches; the empty patch is a
/// candidate like any other. Ties go to fewer blocks, then fewer refactored
/// lines, then the lexicographically smaller serialization. Independent of
/// the order of `completions`.
VoteResult majority_vote(const std::vector<std::string> &completions);

/// A patch turning `before` into `after`, built from a line diff. Every
/// block's original lines are extended with context until they match at the
/// intended place, so apply_patch(diff_to_patch(a, b), a) == b.
Patch diff_to_patch(const std::string &before, const std::string &after);

} // namespace ccport
