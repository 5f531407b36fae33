#include "ccport/prompt_engine.hpp"

#include "ccport/errors.hpp"
#include "ccport/hash.hpp"
#include "ccport/lexer.hpp"

#include <algorithm>
#include <map>

namespace ccport {

namespace {

constexpr std::string_view kPreamble = R"(## Checked C
Checked C extends C with checked pointer types. The compiler checks every
access through a checked pointer against the pointer's bounds. Three checked
pointer types exist:

  ptr<T>     points to a single object of type T. No pointer arithmetic and
             no indexing beyond element 0. Needs no bounds annotation.
  arr<T>     points into an array of T. Indexing and pointer arithmetic are
             allowed and every access is checked against a bounds annotation.
  nt_arr<T>  points into an array of T terminated by a null element (usually a
             string). Reading may continue past the declared bounds up to the
             terminator, so the bounds may widen as the terminator is found.

A bounds annotation follows the declared name after a colon:

  arr<int> p : count(n)            p[0] .. p[n-1] are accessible
  arr<char> b : byte_count(len)    len bytes starting at b are accessible
  arr<long> q : bounds(lo, hi)     lo <= address < hi is accessible
  nt_arr<char> s : count(n)        n elements plus the terminator, that is
                                   at least n + 1 elements in memory

Rules for annotations:
  - The annotation goes after the name and before any initializer:
      arr<int> p : count(n) = buf;
  - Parameters carry the annotation inside the parameter list:
      int sum(arr<int> a : count(len), int len)
  - Bounds expressions use variables, integer constants, + - * / and
    parentheses only. Function calls and casts are not allowed.
  - Every name in a bounds expression must be in scope at the declaration:
    a parameter, a local declared earlier, a global or a macro. A struct
    field may only use sibling fields of the same struct.
  - For a null-terminated array declared as T a[N], an nt_arr<T> pointing to
    it has count(N - 1), because the last element holds the terminator.
  - arr<arr<T>> is not supported; an array of arrays has to become an array
    of structs that pair each inner pointer with its length.
  - Unchecked C pointers (T *) may still appear; leave them alone unless the
    task asks otherwise.
)";

constexpr std::string_view kHistoryInstruction =
    R"(Other declarations of this program were already rewritten; the refactor
history below shows each of them before and after. Update the code so it stays
consistent with those changes, for example by passing a new argument wherever
a callee gained a parameter.)";

constexpr std::string_view kOutputFormat = R"(Report every change as a block that repeats the original lines exactly and
then gives the lines that replace them:

<<<<ORIGINAL
original line(s)
====
>>>>REFACTORED
refactored line(s)
<<<<END

Emit one block per change, in order. Each marker stands on a line of its own.
Original lines must be copied from the code verbatim. To insert lines, repeat a
neighbouring line in both parts. Text outside blocks is ignored. If nothing
needs to change, output no blocks.)";

constexpr std::string_view kNestedDescription =
    R"(You are given a list of Checked C declarations and a partially converted Checked C code
snippet. Array of arr<T> is not supported in Checked C. Your task is to replace them
with an array of struct having a pointer field 'ptr' and a bounds field 'len'. You will 
also have to replace the uses of the nested array with the uses of the struct 'ptr' field
instead. Make sure to update the 'len' field whenever the 'ptr' field is updated.)";

constexpr std::string_view kNestedExample = R"(From:
int foo(arr<arr<int>> a, int i) {
  return a[i][i];
}
To:
// New struct
typedef struct arr_of_int {
  arr<int> ptr : count(len);
  int len;
} arr_of_int;
// type of a changes
int foo(arr<struct arr_of_int> a, int i) {
  // nested pointer access via the ptr field
  return a[i].ptr[i];
})";

constexpr std::string_view kBoundsDescription =
    R"(Determine and assign 'count(..)' or 'bounds(.., ..)' expressions for each arr and nt_arr in
the given function. To find valid bounds for a pointer p, examine all uses of p and set
bounds that encompass every access. Alternatively, adopt the bounds from the pointer from
which p was assigned.   

You will be provided a list of pointer variable names along with their declaration line
number. You must choose one of the following rules for each of them.

[A0] Infer a valid bounds expression:
    Provide a 'count(..)' or 'bounds(..,..)' expression at the line of declaration. Choose
    this only when you are completely sure that the bounds are valid. 

[A1] Say unknown:
    When there is not enough information to infer bounds for a pointer, it is okay to leave
    the annotated line same as the original line. Follow this by explaining why enough 
    information is not available. This can be chosen when there is not a clear upper bound
    to all accesses through the pointer or the pointer depends on other pointers whose 
    bounds are not known.

[A2] Change an arr to nt_arr:
    If you cannot infer the bounds to arr p but you do know that p is terminated with a
    null character from its use, you can change its type to nt_arr. Make sure to also 
    change the pointers that p was derived from to nt_arr in such a case. This can also
    be due to a callee now taking nt_arr instead of arr due to an earlier refactor.

[A3] Add a parameter for bounds:
    If you cannot infer a reasonable bound for a pointer parameter, add a new parameter to
    store its bounds and use that in the bounds expression. Going ahead, all calls of this
    function will have to be passed this extra bounds argument.)";

constexpr std::string_view kBoundsExample = R"(From:
struct x { int f; int g; }
int foo(arr<struct x> a, int i) {
  int j = a[i].f;
  arr<struct x> p = a;
  return a[j].f;
}
To:
// [A3] As j is read from the heap, the access
// a[j] could be anything. Moreover, j is not
// in scope at line 1. Since 'a' is a pointer
// parameter, add a bounds parameter instead
// of saying 'unknown'.
int foo(arr<struct x> a : count(count_for_a),
  int count_for_a, int i) {
  int j = a[i].f;
  // [A0] As p is assigned a, the bounds for a
  // are valid for p too.
  arr<struct x> p : count(count_for_a) = a;
  return a[j].f;
}

From:
void foo() { 
  char a[10]; nt_arr<char> p = a;
}
To:
void foo() {
  char a[10];
  // [A0] When an array is converted to nt_arr 
  // the count is the size of the array - 1.
  nt_arr<char> p : count(9) = a;
})";

constexpr std::string_view kGlobalsDescription =
    R"(You are given a Checked C code snippet, with a history of refactors. The refactors
introduce a new variable to store the bounds of a pointer variable, which can be a 
struct field or a global variable. Update the newly introduced bounds variable with
the correct bounds whenever its corresponding pointer variable is assigned a new 
value. Make the update in the same statement as the assignment.)";

constexpr std::string_view kGlobalsExample = R"(From:
void foo(arr<struct x> a, int i) {
  a[i].p = malloc(sizeof(int) * 10);
}

To:
struct x {
  int count_for_p;
  arr<int> p: count(count_for_p);
}

void foo(arr<struct x> a, int i){
  a[i].p = malloc(sizeof(int) * 10),
  a[i].count_for_p = 10;
})";

const TaskSpec kTasks[] = {
    {TaskId::NestedArrays, kNestedDescription, kNestedExample},
    {TaskId::BoundsInference, kBoundsDescription, kBoundsExample},
    {TaskId::GlobalsFields, kGlobalsDescription, kGlobalsExample},
};

constexpr std::string_view kNone = "(none)";

// Section headers; parse_prompt relies on them.
constexpr std::string_view kTaskHeader = "## Task (";
constexpr std::string_view kHistoryInstructionHeader = "## Earlier refactors";
constexpr std::string_view kFormatHeader = "## Output format";
constexpr std::string_view kExampleHeader = "## Example";
constexpr std::string_view kPreludeHeader = "## Context";
constexpr std::string_view kCodeHeader = "## Code";
constexpr std::string_view kHistoryHeader = "## Refactor history";
constexpr std::string_view kElementsHeader = "## Elements";

std::string fenced(std::string_view code) {
    std::string out = "```c\n";
    out += code;
    if (out.back() != '\n')
        out.push_back('\n');
    return out + "```\n";
}

std::size_t first_line_of(const std::vector<Token> &toks, std::string_view symbol, bool member) {
    for (std::size_t k = 0; k < toks.size(); ++k) {
        if (!toks[k].is_ident() || toks[k].text != symbol)
            continue;
        bool after_member = k > 0 && (toks[k - 1].is(".") || toks[k - 1].is("->"));
        if (after_member == member)
            return toks[k].line;
    }
    return 0;
}

// Line of the first assignment to `symbol` (x.p = / x->p = for fields,
// g = for globals), or 0.
std::size_t first_assignment_line(const std::vector<Token> &toks, std::string_view symbol, bool member) {
    for (std::size_t k = 0; k + 1 < toks.size(); ++k) {
        if (!toks[k].is_ident() || toks[k].text != symbol || !toks[k + 1].is("="))
            continue;
        bool after_member = k > 0 && (toks[k - 1].is(".") || toks[k - 1].is("->"));
        if (after_member == member)
            return toks[k].line;
    }
    return 0;
}

std::string_view section_body(std::string_view text, std::string_view header, std::string_view next_header) {
    std::size_t at = text.find(std::string("\n") + std::string(header));
    if (at == std::string_view::npos)
        throw Error("prompt has no '" + std::string(header) + "' section");
    std::size_t body = text.find('\n', at + 1);
    if (body == std::string_view::npos)
        return {};
    ++body;
    std::size_t end = next_header.empty() ? text.size() : text.find(std::string("\n") + std::string(next_header), body);
    if (end == std::string_view::npos)
        throw Error("prompt has no '" + std::string(next_header) + "' section");
    return text.substr(body, end - body);
}

std::string unfence(std::string_view body) {
    std::size_t open = body.find("```c\n");
    std::size_t close = body.rfind("```");
    if (open == std::string_view::npos || close == std::string_view::npos || close < open + 5)
        return {};
    return std::string(body.substr(open + 5, close - open - 5));
}

} // namespace

std::string_view to_string(TaskId id) {
    switch (id) {
    case TaskId::NestedArrays:
        return "nested-arrays";
    case TaskId::BoundsInference:
        return "bounds-inference";
    case TaskId::GlobalsFields:
        return "globals-fields";
    }
    return "?";
}

TaskId task_id_from_string(std::string_view s) {
    for (const auto &t : kTasks)
        if (to_string(t.id) == s)
            return t.id;
    throw Error("unknown task: " + std::string(s));
}

const TaskSpec &task_spec(TaskId id) {
    for (const auto &t : kTasks)
        if (t.id == id)
            return t;
    throw Error("unknown task");
}

PromptText PromptText::from(std::string rendered) {
    PromptText p;
    p.fingerprint = sha256_hex(rendered);
    p.rendered = std::move(rendered);
    return p;
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

PromptText render_prompt(const TaskSpec &task, const std::vector<PreludeFragment> &prelude, const std::string &code,
                         const std::vector<RefactorHistoryEntry> &history, const TaskElements &elements,
                         std::size_t token_budget) {
    std::string out(kPreamble);
    out += "\n";
    out += std::string(kTaskHeader) + std::string(to_string(task.id)) + ")\n";
    out += std::string(task.description) + "\n\n";
    out += std::string(kHistoryInstructionHeader) + "\n" + std::string(kHistoryInstruction) + "\n\n";
    out += std::string(kFormatHeader) + "\n" + std::string(kOutputFormat) + "\n\n";
    out += std::string(kExampleHeader) + "\n" + std::string(task.example) + "\n\n";

    out += std::string(kPreludeHeader) + "\n";
    if (prelude.empty()) {
        out += std::string(kNone) + "\n";
    } else {
        std::string joined;
        for (const auto &f : prelude) {
            joined += f.text;
            joined += "\n";
        }
        out += fenced(joined);
    }
    out += "\n";

    out += std::string(kCodeHeader) + "\n" + fenced(code) + "\n";

    out += std::string(kHistoryHeader) + "\n";
    if (history.empty()) {
        out += std::string(kNone) + "\n";
    } else {
        std::size_t shown = std::min(history.size(), kHistoryCap);
        // callers pass entries oldest first; the prompt lists the newest first
        for (std::size_t k = 0; k < shown; ++k) {
            const auto &h = history[history.size() - 1 - k];
            out += "### " + h.decl_name + "\nBefore:\n" + fenced(h.old_code) + "After:\n" + fenced(h.new_code);
        }
        if (history.size() > shown)
            out += "(" + std::to_string(history.size() - shown) + " older changes omitted)\n";
    }
    out += "\n";

    out += std::string(kElementsHeader) + "\n";
    if (elements.empty())
        out += std::string(kNone) + "\n";
    for (const auto &e : elements)
        out += "- " + e.symbol + " (line " + std::to_string(e.line) + ")\n";

    std::size_t tokens = estimate_tokens(out);
    if (tokens > token_budget)
        throw PromptTooLarge("prompt needs about " + std::to_string(tokens) + " tokens, budget is " +
                             std::to_string(token_budget));
    return PromptText::from(std::move(out));
}

TaskElements elements_for(TaskId task, const Declaration &d, const std::vector<AnnotationSite> &sites,
                          const std::vector<IntroducedBoundsVar> &introduced) {
    TaskElements out;
    std::vector<Token> toks;
    if (d.kind != DeclKind::Macro)
        toks = tokenize(d.code, d.span.file);
    switch (task) {
    case TaskId::BoundsInference:
        for (const auto &s : sites) {
            if (s.decl_id != d.id || s.annotated() || s.symbol == "return")
                continue;
            if (s.scope != SiteScope::Param && s.scope != SiteScope::Local)
                continue;
            if (s.kind == PointerKind::Arr || s.kind == PointerKind::NtArr)
                out.push_back({s.symbol, s.line});
        }
        break;
    case TaskId::NestedArrays:
        for (const auto &s : sites) {
            if (!s.nested)
                continue;
            if (s.decl_id == d.id) {
                out.push_back({s.symbol, s.line});
            } else if (d.kind == DeclKind::Procedure &&
                       (s.scope == SiteScope::Global || s.scope == SiteScope::Field)) {
                std::size_t line = first_line_of(toks, s.symbol, s.scope == SiteScope::Field);
                if (line)
                    out.push_back({s.symbol, line});
            }
        }
        break;
    case TaskId::GlobalsFields:
        if (d.kind != DeclKind::Procedure)
            break;
        for (const auto &v : introduced) {
            std::size_t line = first_assignment_line(toks, v.pointer, v.scope == SiteScope::Field);
            if (line)
                out.push_back({v.var, line});
        }
        break;
    }
    std::stable_sort(out.begin(), out.end(), [](const TaskElement &a, const TaskElement &b) {
        return std::tie(a.line, a.symbol) < std::tie(b.line, b.symbol);
    });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

PromptSections parse_prompt(std::string_view rendered) {
    PromptSections out;
    std::size_t at = rendered.find(std::string("\n") + std::string(kTaskHeader));
    if (at == std::string_view::npos)
        throw Error("prompt has no task section");
    std::size_t name_begin = at + 1 + kTaskHeader.size();
    std::size_t name_end = rendered.find(')', name_begin);
    out.task = task_id_from_string(rendered.substr(name_begin, name_end - name_begin));

    out.code = unfence(section_body(rendered, kCodeHeader, kHistoryHeader));
    if (!out.code.empty() && out.code.back() == '\n')
        out.code.pop_back();

    std::string prelude = unfence(section_body(rendered, kPreludeHeader, kCodeHeader));
    if (!prelude.empty())
        out.prelude_blocks.push_back(prelude);

    std::string_view elements = section_body(rendered, kElementsHeader, {});
    std::size_t pos = 0;
    while (pos < elements.size()) {
        std::size_t nl = elements.find('\n', pos);
        std::string_view line = elements.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? elements.size() : nl + 1;
        if (line.substr(0, 2) != "- ")
            continue;
        std::size_t paren = line.rfind(" (line ");
        if (paren == std::string_view::npos)
            continue;
        TaskElement e;
        e.symbol = std::string(line.substr(2, paren - 2));
        e.line = std::stoul(std::string(line.substr(paren + 7)));
        out.elements.push_back(std::move(e));
    }
    return out;
}

} // namespace ccport
