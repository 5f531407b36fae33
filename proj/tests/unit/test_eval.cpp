#include "ccport/errors.hpp"
#include "ccport/eval.hpp"

#include "doctest.h"

#include <algorithm>
#include <random>

using namespace ccport;

namespace {

std::vector<Declaration> parse(const std::string &text) {
    return extract_declarations({SourceUnit::from_text("out.c", text)});
}

const char *kOut = R"(struct stack {
  arr<int> items : count(cap);
  int cap;
};

void fill(arr<int> buf : count(n * 4), int n) {
  for (int i = 0; i < n * 4; i++) buf[i] = 0;
}

int len(nt_arr<char> s : count(0)) {
  int k = 0;
  while (s[k]) k++;
  return k;
}

void pop(arr<int> top : count(n), int n) {
  top[-n] = 0;
}

void copy(int *dst, int n) {
  dst[n - 1] = 0;
}
)";

} // namespace

TEST_CASE("ground truth parsing") {
    auto gt = parse_ground_truth("{\"decl\":\"f\",\"symbol\":\"p\",\"kind\":\"arr\",\"bounds\":\"count(4 * n)\"}\n\n"
                                 "{\"decl\":\"f\",\"symbol\":\"q\",\"kind\":\"ptr\"}\n");
    REQUIRE(gt.entries.size() == 2);
    CHECK(gt.entries[0].bounds == "count(4*n)");
    CHECK(gt.entries[1].kind == PointerKind::Ptr);
    CHECK(gt.entries[1].bounds.empty());
    CHECK_THROWS_AS(parse_ground_truth("{\"decl\":\"f\"}\n"), Error);
    CHECK_THROWS_AS(parse_ground_truth("not json\n"), Error);
    CHECK_THROWS_AS(parse_ground_truth("{\"decl\":\"f\",\"symbol\":\"p\",\"kind\":\"arr\"}\n"
                                       "{\"decl\":\"f\",\"symbol\":\"p\",\"kind\":\"ptr\"}\n"),
                    Error);
    CHECK_THROWS_AS(load_ground_truth("/nonexistent/gt.jsonl"), IoError);
}

TEST_CASE("scoring verdicts") {
    auto decls = parse(kOut);
    auto gt = parse_ground_truth(
        "{\"decl\":\"stack\",\"symbol\":\"items\",\"kind\":\"arr\",\"bounds\":\"count(cap)\"}\n"
        "{\"decl\":\"fill\",\"symbol\":\"buf\",\"kind\":\"arr\",\"bounds\":\"count(4*n)\"}\n"
        "{\"decl\":\"len\",\"symbol\":\"s\",\"kind\":\"nt_arr\",\"bounds\":\"count(0)\"}\n"
        "{\"decl\":\"pop\",\"symbol\":\"top\",\"kind\":\"arr\",\"bounds\":\"bounds(top - n, top)\"}\n"
        "{\"decl\":\"copy\",\"symbol\":\"dst\",\"kind\":\"arr\",\"bounds\":\"count(n)\"}\n"
        "{\"decl\":\"gone\",\"symbol\":\"x\",\"kind\":\"arr\",\"bounds\":\"count(n)\"}\n");
    EvalResult r = score(decls, gt);
    CHECK(r.metrics.required == 6);
    CHECK(r.metrics.correct == 3);
    CHECK(r.metrics.incorrect == 1);
    CHECK(r.metrics.inferred == 4);
    CHECK(r.metrics.not_inferred == 2);
    REQUIRE(r.mismatches.size() == 1);
    CHECK(r.mismatches[0].find("gone") != std::string::npos);

    auto status = [&](const std::string &decl) {
        for (const auto &v : r.verdicts)
            if (v.expected.decl == decl)
                return v.status;
        FAIL("missing " << decl);
        return EntryVerdict::Status::NotInferred;
    };
    CHECK(status("fill") == EntryVerdict::Status::Correct); // commutative normalization
    CHECK(status("pop") == EntryVerdict::Status::Incorrect);
    CHECK(status("copy") == EntryVerdict::Status::NotInferred);
    CHECK(status("gone") == EntryVerdict::Status::MissingDecl);

    std::string report = eval_report(r);
    CHECK(report.find("incorrect  pop.top") != std::string::npos);
    CHECK(report.find("- arr bounds(top-n,top)") != std::string::npos);
    std::string json = metrics_to_json(r);
    CHECK(json.find("\"required\": 6") != std::string::npos);
}

TEST_CASE("empty ground truth gives zero metrics") {
    EvalResult r = score(parse(kOut), GroundTruth{});
    CHECK(r.metrics.required == 0);
    CHECK(r.metrics.inferred == 0);
    CHECK(r.metrics.correct == 0);
    CHECK(r.metrics.not_inferred == 0);
}

TEST_CASE("metric identities hold and scoring ignores entry order") {
    auto decls = parse(kOut);
    const char *symbols[][2] = {{"stack", "items"}, {"stack", "cap"}, {"fill", "buf"}, {"len", "s"},
                                {"pop", "top"},     {"copy", "dst"},  {"nope", "x"}};
    const char *kinds[] = {"arr", "nt_arr", "ptr"};
    const char *bounds[] = {"count(cap)", "count(n * 4)", "count(0)", "count(n)", ""};
    std::mt19937 rng(7);
    for (int round = 0; round < 200; ++round) {
        GroundTruth gt;
        for (auto &s : symbols) {
            if (rng() % 3 == 0)
                continue;
            gt.entries.push_back({s[0], s[1], pointer_kind_from_string(kinds[rng() % 3]),
                                  normalize_bounds_text(bounds[rng() % 5])});
        }
        EvalResult a = score(decls, gt);
        const Metrics &m = a.metrics;
        CHECK(m.inferred == m.correct + m.incorrect);
        CHECK(m.not_inferred == m.required - m.inferred);
        CHECK(m.required == gt.entries.size());
        std::shuffle(gt.entries.begin(), gt.entries.end(), rng);
        EvalResult b = score(decls, gt);
        CHECK(metrics_to_json(a) == metrics_to_json(b));
    }
}

TEST_CASE("call arity mismatches") {
    auto decls = parse("int f(int a, int b);\nint f(int a, int b) { return a + b; }\n"
                       "int g(void) { return f(1, 2) + f(3); }\n"
                       "int h(void) { return g() + g(); }\n"
                       "int v(const char *fmt, ...) { return 0; }\n"
                       "int w(void) { return v(\"x\") + v(\"%d\", 1, 2); }\n");
    CHECK(call_arity_mismatches(decls) == 1);
}
