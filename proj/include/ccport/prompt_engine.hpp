#pragma once

// Query prompts: a fixed Checked C preamble, the task text and example, then
// the declaration under transformation with its context, the refactor
// history of its successors and the elements to work on.

#include "ccport/checkedc.hpp"
#include "ccport/depgraph.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace ccport {

enum class TaskId { NestedArrays, BoundsInference, GlobalsFields };

std::string_view to_string(TaskId id); // "nested-arrays", "bounds-inference", "globals-fields"
TaskId task_id_from_string(std::string_view s);

struct TaskSpec {
    TaskId id;
    std::string_view description;
    std::string_view example;
};

const TaskSpec &task_spec(TaskId id);

struct RefactorHistoryEntry {
    std::string decl_name;
    std::string old_code;
    std::string new_code;
};

struct TaskElement {
    std::string symbol;
    std::size_t line = 0; // 1-based within the declaration's code

    bool operator==(const TaskElement &) const = default;
};
using TaskElements = std::vector<TaskElement>;

struct PromptText {
    std::string rendered;
    std::string fingerprint; // sha256 of rendered

    static PromptText from(std::string rendered);
};

constexpr std::size_t kDefaultTokenBudget = 24000;
constexpr std::size_t kHistoryCap = 20;

/// Token estimate used for the budget: one token per four characters.
std::size_t estimate_tokens(std::string_view text);

/// Sections in order: preamble, task, refactor instruction, output format,
/// example, prelude, code, history (most recent first), elements. Empty
/// prelude, history or elements render as "(none)". Throws PromptTooLarge
/// when the estimate exceeds `token_budget`.
PromptText render_prompt(const TaskSpec &task, const std::vector<PreludeFragment> &prelude, const std::string &code,
                         const std::vector<RefactorHistoryEntry> &history, const TaskElements &elements,
                         std::size_t token_budget = kDefaultTokenBudget);

/// A bounds variable introduced before the globals/fields pass.
struct IntroducedBoundsVar {
    std::string pointer; // the global or field it describes
    std::string var;     // count_for_<pointer>, possibly suffixed
    SiteScope scope = SiteScope::Global;
};

/// NestedArrays: nested sites declared in `d` plus nested globals / fields
/// `d` refers to. BoundsInference: unannotated arr / nt_arr parameters and
/// locals of `d`. GlobalsFields: the introduced variables whose pointer `d`
/// assigns, at the line of the first assignment. `sites` may cover the whole
/// program; only those relevant to `d` are used.
TaskElements elements_for(TaskId task, const Declaration &d, const std::vector<AnnotationSite> &sites,
                          const std::vector<IntroducedBoundsVar> &introduced = {});

// Pieces of a rendered prompt, for consumers that read prompts back (the
// mock backend, log tooling).
struct PromptSections {
    TaskId task = TaskId::BoundsInference;
    std::string code;
    TaskElements elements;
    std::vector<std::string> prelude_blocks;
};

/// Throws Error when `rendered` does not have the render_prompt layout.
PromptSections parse_prompt(std::string_view rendered);

} // namespace ccport
