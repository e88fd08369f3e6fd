#include "doctest.h"

#include <algorithm>
#include <vector>

#include "support/test_support.hpp"
#include "vulnscore/error.hpp"
#include "vulnscore/features.hpp"
#include "vulnscore/file_io.hpp"
#include "vulnscore/findings.hpp"
#include "vulnscore/rng.hpp"

using namespace vulnscore;
using testing::fixture_dir;

namespace {

double sum_l1(const FeatureVector& v) {
    double s = 0;
    for (const auto& [name, value] : v)
        s += value;
    return s;
}

const char* const kL1[] = {"l1.buffer_write", "l1.null_deref", "l1.use_after_free",
                           "l1.memory_leak",  "l1.stack_return", "l1.use_before_def"};

} // namespace

TEST_CASE("cppcheck memleak element") {
    const auto r = parse_cppcheck_xml(R"(<results><error id="memleak" file="a.c" line="12" msg="Memory leak: p"/></results>)");
    REQUIRE(r.findings.size() == 1);
    CHECK(r.findings[0].category == FindingCategory::MemoryLeak);
    CHECK(r.findings[0].file == "a.c");
    CHECK(r.findings[0].line == 12);
    CHECK(r.findings[0].tool == "cppcheck");
    CHECK(r.errors.empty());
}

TEST_CASE("empty cppcheck results") {
    const auto r = parse_cppcheck_xml("<results/>");
    CHECK(r.findings.empty());
    CHECK(r.errors.empty());
}

TEST_CASE("unmapped cppcheck id is Other") {
    const auto r = parse_cppcheck_xml(R"(<results><error id="unusedVariable" file="a.c" line="3"/></results>)");
    REQUIRE(r.findings.size() == 1);
    CHECK(r.findings[0].category == FindingCategory::Other);
}

TEST_CASE("malformed XML reports its position") {
    try {
        parse_cppcheck_xml("<results>\n  <error id=\"x\" file=\"a.c\" line=\"1\">\n</results>");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse_cppcheck_xml("<other/>"), FormatError);
}

TEST_CASE("a bad element is skipped and parsing continues") {
    const auto r = parse_cppcheck_xml(R"(<results>
<error id="memleak" line="4"/>
<error id="nullPointer" file="b.c" line="9"/>
</results>)");
    CHECK(r.errors.size() == 1);
    CHECK(r.errors[0].line == 2);
    REQUIRE(r.findings.size() == 1);
    CHECK(r.findings[0].category == FindingCategory::NullDeref);
}

TEST_CASE("splint headline classification") {
    auto r = parse_splint_text("a.c:5:3: Variable x used before definition\n");
    REQUIRE(r.findings.size() == 1);
    CHECK(r.findings[0].category == FindingCategory::UseBeforeDef);
    CHECK(r.findings[0].file == "a.c");
    CHECK(r.findings[0].line == 5);

    r = parse_splint_text("a.c:9:1: Possible out-of-bounds store: buffer may overflow");
    REQUIRE(r.findings.size() == 1);
    CHECK(r.findings[0].category == FindingCategory::BufferWrite);
    CHECK(r.findings[0].line == 9);

    CHECK(parse_splint_text("").findings.empty());
}

TEST_CASE("splint keyword table") {
    const auto& rules = SplintRules::builtin();
    CHECK(rules.classify("Dereference of possibly null pointer p") == FindingCategory::NullDeref);
    CHECK(rules.classify("Fresh storage x not released before return") == FindingCategory::MemoryLeak);
    CHECK(rules.classify("Stack-allocated storage buf reachable from return value") == FindingCategory::StackReturn);
    CHECK(rules.classify("Variable used after being released") == FindingCategory::UseAfterFree);
    CHECK(rules.classify("Possible out-of-bounds read: buf[3]") == FindingCategory::Other);
    CHECK(rules.classify("Function main declared but not used") == FindingCategory::Other);
}

TEST_CASE("splint continuation lines attach to the open finding") {
    const auto r = parse_splint_text("x.c:1: Memory leak detected\n"
                                     "   more detail about a null dereference\n"
                                     "banner\n"
                                     "   orphan continuation\n");
    REQUIRE(r.findings.size() == 1);
    CHECK(r.findings[0].category == FindingCategory::MemoryLeak);
    CHECK(r.findings[0].raw_message.find("more detail") != std::string::npos);
    CHECK(r.unmatched_lines == 2);
}

TEST_CASE("splint header keeps drive letters and optional columns") {
    const auto r = parse_splint_text("C:\\src\\a.c:17: Fresh storage q not released\nb.c:3:0: null dereference");
    REQUIRE(r.findings.size() == 2);
    CHECK(r.findings[0].file == "C:\\src\\a.c");
    CHECK(r.findings[0].line == 17);
    CHECK(r.findings[1].line == 3);
}

TEST_CASE("aggregation counts per category") {
    FindingsReport r;
    r.tool = "cppcheck";
    r.findings = {{FindingCategory::MemoryLeak, "a.c", 1, "cppcheck", ""},
                  {FindingCategory::MemoryLeak, "a.c", 2, "cppcheck", ""},
                  {FindingCategory::NullDeref, "b.c", 1, "cppcheck", ""},
                  {FindingCategory::Other, "b.c", 7, "cppcheck", ""}};
    const auto v = aggregate_layer1(r);
    CHECK(v.size() == 6);
    CHECK(v.get("l1.memory_leak") == 2.0);
    CHECK(v.get("l1.null_deref") == 1.0);
    CHECK(v.get("l1.buffer_write") == 0.0);
    CHECK(v.get("l1.use_after_free") == 0.0);
    CHECK(v.get("l1.stack_return") == 0.0);
    CHECK(v.get("l1.use_before_def") == 0.0);

    const auto empty = aggregate_layer1(FindingsReport{});
    CHECK(empty.size() == 6);
    CHECK(sum_l1(empty) == 0.0);
}

TEST_CASE("aggregation is additive over reports") {
    std::vector<FindingsReport> reports(3);
    for (std::size_t i = 0; i < 3; ++i)
        reports[i].findings = {{FindingCategory::BufferWrite, "f" + std::to_string(i) + ".c", 1, "splint", ""}};
    CHECK(aggregate_layer1(reports).get("l1.buffer_write") == 3.0);
}

TEST_CASE("deduplication is per tool") {
    std::vector<FindingsReport> reports(2);
    reports[0].findings = {{FindingCategory::NullDeref, "a.c", 4, "cppcheck", "x"},
                           {FindingCategory::NullDeref, "a.c", 4, "cppcheck", "y"}};
    reports[1].findings = {{FindingCategory::NullDeref, "a.c", 4, "splint", "z"}};
    CHECK(aggregate_layer1(reports).get("l1.null_deref") == 2.0);
    CHECK(testing::distinct_categorized(reports) == 2);
}

TEST_CASE("aggregation is invariant under finding order") {
    Rng rng(99);
    FindingsReport r;
    const FindingCategory cats[] = {FindingCategory::BufferWrite, FindingCategory::NullDeref,
                                    FindingCategory::UseAfterFree, FindingCategory::MemoryLeak,
                                    FindingCategory::StackReturn, FindingCategory::UseBeforeDef,
                                    FindingCategory::Other};
    for (int i = 0; i < 200; ++i)
        r.findings.push_back({cats[rng.below(7)], "f" + std::to_string(rng.below(3)) + ".c",
                              static_cast<std::size_t>(1 + rng.below(20)), rng.below(2) ? "splint" : "cppcheck", ""});
    const auto base = aggregate_layer1(r);
    CHECK(sum_l1(base) == static_cast<double>(testing::distinct_categorized({r})));
    for (int k = 0; k < 10; ++k) {
        rng.shuffle(std::span<Finding>(r.findings));
        CHECK(aggregate_layer1(r) == base);
    }
}

TEST_CASE("binarize caps every count at one") {
    FeatureVector v{{"l1.memory_leak", 3}, {"l1.null_deref", 0}, {"l1.buffer_write", 1}};
    const auto b = binarize_layer1(v);
    CHECK(b.get("l1.memory_leak") == 1.0);
    CHECK(b.get("l1.null_deref") == 0.0);
    CHECK(b.get("l1.buffer_write") == 1.0);
}

TEST_CASE("fixture reports match their golden counts") {
    const auto golden = parse_json_text(read_text_file(fixture_dir() / "golden/reports.json"));
    std::vector<FindingsReport> all;
    for (const auto& [rel, expect] : golden.items()) {
        CAPTURE(rel);
        const auto report = parse_findings_file(fixture_dir() / rel);
        const auto others = std::count_if(report.findings.begin(), report.findings.end(),
                                          [](const Finding& f) { return f.category == FindingCategory::Other; });
        CHECK(report.findings.size() == expect["findings"].get<std::size_t>());
        CHECK(static_cast<std::size_t>(others) == expect["other"].get<std::size_t>());
        CHECK(report.errors.size() == expect["element_errors"].get<std::size_t>());
        CHECK(report.unmatched_lines == expect["unmatched_lines"].get<std::size_t>());
        const auto l1 = aggregate_layer1(report);
        for (const char* name : kL1)
            CHECK(l1.get(name) == expect["l1"][name].get<double>());
        CHECK(sum_l1(l1) == static_cast<double>(testing::distinct_categorized({report})));
        CHECK(parse_findings_file(fixture_dir() / rel) == report);
        all.push_back(report);
    }
    CHECK(sum_l1(aggregate_layer1(all)) == static_cast<double>(testing::distinct_categorized(all)));
}

TEST_CASE("shipped mapping tables equal the built-in ones") {
    const auto root = fixture_dir().parent_path().parent_path() / "data";
    CHECK(CppcheckIdMap::load(root / "cppcheck_ids.json").entries() == CppcheckIdMap::builtin().entries());
    const auto loaded = SplintRules::load(root / "splint_rules.json");
    CHECK(loaded.to_json() == SplintRules::builtin().to_json());
    CHECK(read_text_file(root / "cppcheck_ids.json") == CppcheckIdMap::builtin().to_json().dump(2) + "\n");
    CHECK(read_text_file(root / "splint_rules.json") == SplintRules::builtin().to_json().dump(2) + "\n");
}

TEST_CASE("custom tables change the mapping") {
    const CppcheckIdMap ids(std::map<std::string, FindingCategory>{{"unusedVariable", FindingCategory::UseBeforeDef}});
    const auto r = parse_cppcheck_xml(R"(<results><error id="unusedVariable" file="a.c" line="3"/></results>)", ids);
    CHECK(r.findings.at(0).category == FindingCategory::UseBeforeDef);
    CHECK_THROWS_AS(SplintRules::from_json(nlohmann::json::parse(R"([{"all_of": [], "category": "Other"}])")),
                    SchemaError);
    CHECK_THROWS_AS(CppcheckIdMap::from_json(nlohmann::json::parse(R"({"x": "Nope"})")), SchemaError);
}
