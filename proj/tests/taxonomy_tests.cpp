#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "sqlrefine/errors.hpp"
#include "sqlrefine/taxonomy.hpp"

using namespace sqlrefine;

namespace {

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    nlohmann::json j;
    in >> j;
    return j;
}

const std::string kGoldenDir = SQLREFINE_GOLDEN_DIR;

}  // namespace

TEST_CASE("token_for maps labels to indexed tokens and null to the null token") {
    const Taxonomy& tax = Taxonomy::instance();
    CHECK(tax.token_for(ErrorType::value_error).surface == "[ERR]_7");
    CHECK(tax.token_for(ErrorType::table_mismatch).surface == "[ERR]_4");
    CHECK(tax.token_for(std::nullopt).surface == "[ERR]_\xE2\x88\x85");
    CHECK(tax.token_for(ErrorType::modifier_error).surface == "[ERR]_12");
}

TEST_CASE("label_for is the inverse of token_for; reserved and unknown are rejected") {
    const Taxonomy& tax = Taxonomy::instance();
    CHECK(tax.label_for("[ERR]_7") == ErrorType::value_error);
    CHECK(tax.label_for("[ERR]_\xE2\x88\x85") == std::nullopt);
    CHECK_THROWS_AS(tax.label_for("[ERR]_13"), ReservedToken);
    CHECK_THROWS_AS(tax.label_for("[ERR]_32"), ReservedToken);
    CHECK_THROWS_AS(tax.label_for("[ERR]_33"), UnknownToken);
    CHECK_THROWS_AS(tax.label_for("[ERR]_0"), UnknownToken);
    CHECK_THROWS_AS(tax.label_for("[ERR]_"), UnknownToken);
    CHECK_THROWS_AS(tax.label_for("value_error"), UnknownToken);

    for (int i = 1; i <= kErrorTypeCount; ++i) {
        ErrorType type = static_cast<ErrorType>(i);
        auto round = tax.label_for(tax.token_for(type).surface);
        REQUIRE(round.has_value());
        CHECK(*round == type);
    }
}

TEST_CASE("priority is a strict total order with the declared tiers") {
    const Taxonomy& tax = Taxonomy::instance();
    CHECK(tax.priority(ErrorType::table_missing) < tax.priority(ErrorType::value_error));
    CHECK(tax.priority(ErrorType::table_mismatch) < tax.priority(ErrorType::attribute_mismatch));
    CHECK(tax.priority(ErrorType::attribute_missing) < tax.priority(ErrorType::condition_error));
    CHECK(tax.priority(ErrorType::value_error) < tax.priority(ErrorType::function_error));

    std::set<int> ranks;
    for (int i = 1; i <= kErrorTypeCount; ++i) {
        ranks.insert(tax.priority(static_cast<ErrorType>(i)));
    }
    CHECK(ranks.size() == kErrorTypeCount);  // total and antisymmetric

    auto sorted = priority_sorted(
        {ErrorType::modifier_error, ErrorType::table_missing, ErrorType::condition_error});
    REQUIRE(sorted.size() == 3);
    CHECK(sorted[0] == ErrorType::table_missing);
    CHECK(sorted[1] == ErrorType::condition_error);
    CHECK(sorted[2] == ErrorType::modifier_error);
}

TEST_CASE("external mapping matches the golden table") {
    const Taxonomy& tax = Taxonomy::instance();
    auto value_pairs = tax.map_external(ErrorType::value_error);
    REQUIRE(value_pairs.size() == 2);
    CHECK(value_pairs[0] == std::make_pair(std::string("Value-related Errors"),
                                           std::string("Value Mismatch")));
    CHECK(value_pairs[1] == std::make_pair(std::string("Value-related Errors"),
                                           std::string("Data Format Mismatch")));

    auto cond_pairs = tax.map_external(ErrorType::condition_missing);
    REQUIRE(cond_pairs.size() == 2);
    CHECK(cond_pairs[0].second == "Explicit Condition Missing");
    CHECK(cond_pairs[1].second == "Implicit Condition Missing");

    bool subquery_uncovered = false;
    int subquery_count = 0;
    for (const auto& [category, subcategory] : tax.uncovered_external()) {
        if (category == "Subquery-related Errors") {
            subquery_uncovered = true;
            ++subquery_count;
        }
    }
    CHECK(subquery_uncovered);
    CHECK(subquery_count == 3);
}

TEST_CASE("exported taxonomy matches the golden files field-for-field") {
    nlohmann::json exported = nlohmann::json::parse(Taxonomy::instance().export_json());
    nlohmann::json golden = load_json(kGoldenDir + "/taxonomy_golden.json");

    CHECK(exported["reserved_slots"] == golden["reserved_slots"]);
    CHECK(exported["reserved_tokens"]["from"] == golden["reserved_tokens"]["from"]);
    CHECK(exported["reserved_tokens"]["to"] == golden["reserved_tokens"]["to"]);
    CHECK(exported["null_token"]["token"] == golden["null_token"]);

    REQUIRE(exported["error_types"].size() == golden["types"].size());
    for (std::size_t i = 0; i < golden["types"].size(); ++i) {
        const auto& g = golden["types"][i];
        const auto& e = exported["error_types"][i];
        CHECK(e["id"] == g["id"]);
        CHECK(e["token"] == g["token"]);
        CHECK(e["name"] == g["name"]);
        CHECK(e["display_name"] == g["display_name"]);
    }

    nlohmann::json mapping_golden = load_json(kGoldenDir + "/external_mapping_golden.json");
    REQUIRE(exported["external_mapping"].size() == mapping_golden.size());
    for (std::size_t i = 0; i < mapping_golden.size(); ++i) {
        const auto& g = mapping_golden[i];
        const auto& e = exported["external_mapping"][i];
        CHECK(e["category"] == g["category"]);
        CHECK(e["subcategory"] == g["subcategory"]);
        CHECK(e["error_token"] == g["error_token"]);
    }
}

TEST_CASE("taxonomy export round-trips byte-identically") {
    std::string once = Taxonomy::instance().export_json();
    // reparse and re-dump through the same ordered path
    nlohmann::ordered_json parsed = nlohmann::ordered_json::parse(once);
    CHECK(parsed.dump(2) + "\n" == once);
    CHECK(Taxonomy::instance().export_json() == once);
}

TEST_CASE("guideline templates cover all 12 types with the two-section shape") {
    const Taxonomy& tax = Taxonomy::instance();
    for (int i = 1; i <= kErrorTypeCount; ++i) {
        ErrorType type = static_cast<ErrorType>(i);
        const GuidelineTemplate& tmpl = tax.guideline(type);
        CHECK(tmpl.error_type == type);
        CHECK(!tmpl.localization_slots.empty());
        CHECK(!tmpl.analysis_slots.empty());
        // slot names unique within a template
        std::set<std::string> names;
        for (const auto& slot : tmpl.slot_names()) CHECK(names.insert(slot).second);
        // every template localizes nodes and a clause
        CHECK(names.count("nodes") == 1);
        CHECK(names.count("clause") == 1);
    }

    // the illustrated value-error template carries the expected slots
    const GuidelineTemplate& value = tax.guideline(ErrorType::value_error);
    auto slots = value.slot_names();
    std::set<std::string> slot_set(slots.begin(), slots.end());
    for (const char* slot : {"nodes", "current_value", "clause", "correct_value_from_nl",
                             "data_type", "format_issue"}) {
        CHECK(slot_set.count(slot) == 1);
    }

    std::string rendered = value.render_unfilled();
    CHECK(rendered.find("{current_value}") != std::string::npos);
    CHECK(rendered.find("[Localization]") != std::string::npos);
    CHECK(rendered.find("[Analysis]") != std::string::npos);
}

TEST_CASE("filled guidelines know when every slot is assigned") {
    const Taxonomy& tax = Taxonomy::instance();
    const GuidelineTemplate& tmpl = tax.guideline(ErrorType::value_error);
    FilledGuideline filled;
    filled.error_type = ErrorType::value_error;
    CHECK_FALSE(filled.all_assigned(tmpl));
    for (const auto& slot : tmpl.slot_names()) filled.values[slot] = "x";
    CHECK(filled.all_assigned(tmpl));
    CHECK(filled.render(tmpl).find("Current Value: x") != std::string::npos);
}

TEST_CASE("error label sets keep the no-error marker exclusive") {
    ErrorLabelSet none = ErrorLabelSet::none();
    CHECK(none.is_no_error());
    CHECK(none.valid());
    ErrorLabelSet some = ErrorLabelSet::of({ErrorType::value_error});
    CHECK(some.valid());
    CHECK_FALSE(some.is_no_error());
    ErrorLabelSet broken;
    broken.no_error = true;
    broken.labels.insert(ErrorType::value_error);
    CHECK_FALSE(broken.valid());
}

TEST_CASE("reserved slot capacity is clamped to at least the taxonomy size") {
    Taxonomy small(4);
    CHECK(small.reserved_slots() == kErrorTypeCount);
    Taxonomy large(64);
    CHECK(large.reserved_slots() == 64);
    CHECK_THROWS_AS(large.label_for("[ERR]_64"), ReservedToken);
    CHECK_THROWS_AS(large.label_for("[ERR]_65"), UnknownToken);
}
