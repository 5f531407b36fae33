#include "ccport/patch_engine.hpp"

#include "ccport/errors.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <tuple>

namespace ccport {

namespace {

constexpr std::string_view kOpen = "<<<<ORIGINAL";
constexpr std::string_view kSeparator = "====";
constexpr std::string_view kRefactored = ">>>>REFACTORED";
constexpr std::string_view kEnd = "<<<<END";

std::string_view trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b])))
        ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])))
        --e;
    return s.substr(b, e - b);
}

std::string collapse(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : trim(s)) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = true;
            continue;
        }
        if (space)
            out.push_back(' ');
        space = false;
        out.push_back(c);
    }
    return out;
}

std::vector<std::string> lines_of(const std::string &code) {
    std::vector<std::string> out;
    std::size_t at = 0;
    while (true) {
        std::size_t nl = code.find('\n', at);
        if (nl == std::string::npos) {
            out.push_back(code.substr(at));
            return out;
        }
        out.push_back(code.substr(at, nl - at));
        at = nl + 1;
    }
}

std::string join(const std::vector<std::string> &lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i)
            out.push_back('\n');
        out += lines[i];
    }
    return out;
}

bool overlaps(const LineRange &a, const LineRange &b) {
    return a.first < b.first + b.count && b.first < a.first + a.count;
}

bool matches_at(const std::vector<std::string> &trimmed, const std::vector<std::string> &orig, std::size_t at) {
    if (at + orig.size() > trimmed.size())
        return false;
    for (std::size_t k = 0; k < orig.size(); ++k)
        if (trimmed[at + k] != trim(orig[k]))
            return false;
    return true;
}

struct MatchOutcome {
    std::optional<std::size_t> at;
    bool any = false; // matched somewhere, possibly overlapping
};

MatchOutcome find_match(const std::vector<std::string> &trimmed, const std::vector<std::string> &orig,
                        const std::vector<LineRange> &claimed) {
    MatchOutcome out;
    if (orig.empty())
        return out;
    for (std::size_t i = 0; i + orig.size() <= trimmed.size(); ++i) {
        if (!matches_at(trimmed, orig, i))
            continue;
        out.any = true;
        LineRange r{i, orig.size()};
        if (std::none_of(claimed.begin(), claimed.end(), [&](const LineRange &c) { return overlaps(c, r); })) {
            out.at = i;
            return out;
        }
    }
    return out;
}

std::vector<std::string> trimmed_lines(const std::vector<std::string> &lines) {
    std::vector<std::string> out;
    out.reserve(lines.size());
    for (const auto &l : lines)
        out.emplace_back(trim(l));
    return out;
}

std::size_t refactored_lines(const Patch &p) {
    std::size_t n = 0;
    for (const auto &b : p.blocks)
        n += b.refactored.size();
    return n;
}

} // namespace

Patch parse_response(std::string_view text) {
    enum class State { Outside, Original, AwaitRefactored, Refactored };
    State state = State::Outside;
    Patch patch;
    PatchBlock current;
    std::size_t line_no = 0;
    std::size_t opened_at = 0;
    auto malformed = [&](const std::string &what) {
        return MalformedBlock("block opened at response line " + std::to_string(opened_at) + ": " + what);
    };
    std::size_t at = 0;
    while (at <= text.size()) {
        std::size_t nl = text.find('\n', at);
        std::string_view raw = text.substr(at, nl == std::string_view::npos ? std::string_view::npos : nl - at);
        at = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (!raw.empty() && raw.back() == '\r')
            raw.remove_suffix(1);
        std::string_view t = trim(raw);
        bool marker = t == kOpen || t == kSeparator || t == kRefactored || t == kEnd;
        switch (state) {
        case State::Outside:
            if (t == kOpen) {
                state = State::Original;
                opened_at = line_no;
                current = PatchBlock{};
            }
            break;
        case State::Original:
            if (t == kSeparator) {
                if (current.original.empty())
                    throw malformed("no original lines");
                state = State::AwaitRefactored;
            } else if (marker) {
                throw malformed("unexpected '" + std::string(t) + "' before '====' ");
            } else {
                current.original.emplace_back(raw);
            }
            break;
        case State::AwaitRefactored:
            if (t != kRefactored)
                throw malformed("expected '>>>>REFACTORED' after '===='");
            state = State::Refactored;
            break;
        case State::Refactored:
            if (t == kEnd) {
                patch.blocks.push_back(std::move(current));
                current = PatchBlock{};
                state = State::Outside;
            } else if (marker) {
                throw malformed("unexpected '" + std::string(t) + "' before '<<<<END'");
            } else {
                current.refactored.emplace_back(raw);
            }
            break;
        }
    }
    if (state != State::Outside)
        throw malformed("not terminated");
    return patch;
}

std::string serialize_patch(const Patch &p) {
    std::string out;
    for (const auto &b : p.blocks) {
        out += std::string(kOpen) + "\n";
        for (const auto &l : b.original)
            out += l + "\n";
        out += std::string(kSeparator) + "\n" + std::string(kRefactored) + "\n";
        for (const auto &l : b.refactored)
            out += l + "\n";
        out += std::string(kEnd) + "\n";
    }
    return out;
}

Patch normalize_patch(const Patch &p) {
    Patch out;
    for (const auto &b : p.blocks) {
        PatchBlock nb;
        for (const auto &l : b.original)
            nb.original.push_back(collapse(l));
        for (const auto &l : b.refactored)
            nb.refactored.push_back(collapse(l));
        out.blocks.push_back(std::move(nb));
    }
    return out;
}

PatchApplication apply_patch_detailed(const Patch &p, const std::string &code) {
    PatchApplication result;
    if (p.empty()) {
        result.code = code;
        return result;
    }
    auto lines = lines_of(code);
    auto trimmed = trimmed_lines(lines);
    std::vector<LineRange> claimed;
    for (std::size_t i = 0; i < p.blocks.size(); ++i) {
        auto m = find_match(trimmed, p.blocks[i].original, claimed);
        if (!m.at) {
            if (m.any)
                throw PatchRejected(PatchRejected::Reason::AmbiguousOverlap, i,
                                    "block " + std::to_string(i + 1) + " only matches lines another block claimed");
            throw PatchRejected(PatchRejected::Reason::NoMatch, i,
                                "block " + std::to_string(i + 1) + " does not match the declaration");
        }
        claimed.push_back({*m.at, p.blocks[i].original.size()});
    }
    std::vector<std::size_t> by_position(p.blocks.size());
    for (std::size_t i = 0; i < by_position.size(); ++i)
        by_position[i] = i;
    std::sort(by_position.begin(), by_position.end(),
              [&](std::size_t a, std::size_t b) { return claimed[a].first > claimed[b].first; });
    for (std::size_t i : by_position) {
        const auto &r = claimed[i];
        const auto &repl = p.blocks[i].refactored;
        lines.erase(lines.begin() + r.first, lines.begin() + r.first + r.count);
        lines.insert(lines.begin() + r.first, repl.begin(), repl.end());
    }
    result.code = join(lines);
    result.matched = std::move(claimed);
    return result;
}

std::string apply_patch(const Patch &p, const std::string &code) { return apply_patch_detailed(p, code).code; }

bool signature_changed(const Patch &p, const Declaration &d) {
    if (p.empty())
        return false;
    if (d.kind != DeclKind::Procedure)
        return true;
    std::vector<LineRange> matched;
    try {
        matched = apply_patch_detailed(p, d.code).matched;
    } catch (const PatchRejected &) {
        return false;
    }
    std::size_t sig_lines = static_cast<std::size_t>(std::count(d.meta.signature_text.begin(),
                                                                d.meta.signature_text.end(), '\n')) + 1;
    Patch norm = normalize_patch(p);
    for (std::size_t i = 0; i < p.blocks.size(); ++i) {
        if (norm.blocks[i].original == norm.blocks[i].refactored)
            continue;
        if (matched[i].first < sig_lines)
            return true;
    }
    return false;
}

VoteResult majority_vote(const std::vector<std::string> &completions) {
    struct Candidate {
        std::size_t votes = 0;
        Patch normalized;
        std::string representative; // smallest raw serialization in the group
        Patch raw;
    };
    std::map<std::string, Candidate> groups;
    VoteResult result;
    for (const auto &text : completions) {
        Patch p;
        try {
            p = parse_response(text);
        } catch (const MalformedBlock &) {
            ++result.malformed;
            continue;
        }
        ++result.total;
        Patch norm = normalize_patch(p);
        std::string key = serialize_patch(norm);
        std::string raw = serialize_patch(p);
        auto &c = groups[key];
        if (c.votes == 0 || raw < c.representative) {
            c.representative = raw;
            c.raw = p;
            c.normalized = norm;
        }
        ++c.votes;
    }
    std::vector<const std::pair<const std::string, Candidate> *> ranked;
    for (const auto &entry : groups)
        ranked.push_back(&entry);
    std::sort(ranked.begin(), ranked.end(), [](const auto *a, const auto *b) {
        const Candidate &x = a->second, &y = b->second;
        auto key = [](const std::string &k, const Candidate &c) {
            return std::make_tuple(-static_cast<long long>(c.votes), c.normalized.blocks.size(),
                                   refactored_lines(c.normalized), std::cref(k));
        };
        return key(a->first, x) < key(b->first, y);
    });
    for (const auto *entry : ranked)
        result.tally.emplace_back(entry->first, entry->second.votes);
    if (!ranked.empty()) {
        result.winner = ranked.front()->second.raw;
        result.winner_key = ranked.front()->first;
    }
    return result;
}

Patch diff_to_patch(const std::string &before, const std::string &after) {
    auto a = lines_of(before);
    auto b = lines_of(after);
    const std::size_t n = a.size(), m = b.size();
    // LCS table over whole lines
    std::vector<std::vector<std::size_t>> lcs(n + 1, std::vector<std::size_t>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;)
        for (std::size_t j = m; j-- > 0;)
            lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);

    struct Hunk {
        std::size_t a_first, a_end, b_first, b_end;
    };
    std::vector<Hunk> hunks;
    std::size_t i = 0, j = 0;
    while (i < n || j < m) {
        if (i < n && j < m && a[i] == b[j]) {
            ++i;
            ++j;
            continue;
        }
        Hunk h{i, i, j, j};
        while ((i < n || j < m) && !(i < n && j < m && a[i] == b[j])) {
            if (j < m && (i == n || lcs[i][j + 1] >= lcs[i + 1][j]))
                ++j;
            else
                ++i;
        }
        h.a_end = i;
        h.b_end = j;
        hunks.push_back(h);
    }

    auto trimmed = trimmed_lines(a);
    std::vector<Hunk> placed;
    for (std::size_t k = 0; k < hunks.size(); ++k) {
        Hunk h = hunks[k];
        bool grow_front = true;
        while (true) {
            std::size_t lo_limit = placed.empty() ? 0 : placed.back().a_end;
            std::vector<std::string> orig(a.begin() + h.a_first, a.begin() + h.a_end);
            std::vector<LineRange> claimed;
            for (const auto &p : placed)
                claimed.push_back({p.a_first, p.a_end - p.a_first});
            if (!orig.empty()) {
                auto mm = find_match(trimmed, orig, claimed);
                if (mm.at && *mm.at == h.a_first)
                    break;
            }
            bool can_front = h.a_first > lo_limit;
            bool can_back = h.a_end < n;
            if (!can_front && !can_back) {
                if (placed.empty())
                    break;
                // no distinguishing context left: fold into the previous block
                h.a_first = placed.back().a_first;
                h.b_first = placed.back().b_first;
                placed.pop_back();
                continue;
            }
            if ((grow_front && can_front) || !can_back) {
                --h.a_first;
                --h.b_first;
            } else {
                ++h.a_end;
                ++h.b_end;
                if (k + 1 < hunks.size() && h.a_end > hunks[k + 1].a_first) {
                    // context ran into the next change: take it along
                    ++k;
                    h.a_end = hunks[k].a_end;
                    h.b_end = hunks[k].b_end;
                }
            }
            grow_front = !grow_front;
        }
        placed.push_back(h);
    }

    Patch p;
    for (const auto &h : placed) {
        PatchBlock blk;
        blk.original.assign(a.begin() + h.a_first, a.begin() + h.a_end);
        blk.refactored.assign(b.begin() + h.b_first, b.begin() + h.b_end);
        p.blocks.push_back(std::move(blk));
    }
    return p;
}

} // namespace ccport
