#include "sqlrefine/taxonomy.hpp"

#include <algorithm>
#include <array>

#include <nlohmann/json.hpp>

#include "sqlrefine/errors.hpp"

namespace sqlrefine {

namespace {

constexpr const char* kNullTokenSurface = "[ERR]_\xE2\x88\x85";  // [ERR]_∅

struct ExternalMapEntry {
    std::optional<ErrorType> type;
    const char* category;
    const char* subcategory;
};

const std::vector<ExternalMapEntry>& external_map() {
    static const std::vector<ExternalMapEntry> m = {
        {ErrorType::attribute_mismatch, "Attribute-related Errors", "Attribute Mismatch"},
        {ErrorType::attribute_redundancy, "Attribute-related Errors", "Attribute Redundancy"},
        {ErrorType::attribute_missing, "Attribute-related Errors", "Attribute Missing"},
        {ErrorType::table_mismatch, "Table-related Errors", "Table Mismatch"},
        {ErrorType::table_redundancy, "Table-related Errors", "Table Redundancy"},
        {ErrorType::table_missing, "Table-related Errors", "Table Missing"},
        {std::nullopt, "Table-related Errors", "Join Condition Mismatch"},
        {std::nullopt, "Table-related Errors", "Join Type Mismatch"},
        {ErrorType::value_error, "Value-related Errors", "Value Mismatch"},
        {ErrorType::value_error, "Value-related Errors", "Data Format Mismatch"},
        {std::nullopt, "Operator-related Errors", "Comparison Operator"},
        {std::nullopt, "Operator-related Errors", "Logical Operator"},
        {ErrorType::condition_missing, "Condition-related Errors", "Explicit Condition Missing"},
        {ErrorType::condition_error, "Condition-related Errors", "Explicit Condition Mismatch"},
        {ErrorType::condition_error, "Condition-related Errors", "Explicit Condition Redundancy"},
        {ErrorType::condition_missing, "Condition-related Errors", "Implicit Condition Missing"},
        {ErrorType::function_error, "Function-related Errors", "Aggregate Functions"},
        {std::nullopt, "Function-related Errors", "Window Functions"},
        {ErrorType::function_error, "Function-related Errors", "Date/Time Functions"},
        {std::nullopt, "Function-related Errors", "Conversion Functions"},
        {ErrorType::function_error, "Function-related Errors", "Math Functions"},
        {ErrorType::function_error, "Function-related Errors", "String Functions"},
        {ErrorType::function_error, "Function-related Errors", "Conditional Functions"},
        {ErrorType::clause_error, "Clause-related Errors", "Clause Missing"},
        {ErrorType::clause_error, "Clause-related Errors", "Clause Redundancy"},
        {std::nullopt, "Subquery-related Errors", "Subquery Missing"},
        {std::nullopt, "Subquery-related Errors", "Subquery Mismatch"},
        {std::nullopt, "Subquery-related Errors", "Partial Query"},
        {ErrorType::modifier_error, "Other Errors", "ASC/DESC"},
        {ErrorType::modifier_error, "Other Errors", "DISTINCT"},
        {std::nullopt, "Other Errors", "Other"},
    };
    return m;
}

GuidelineTemplate make_template(ErrorType type,
                                std::vector<std::pair<std::string, std::string>> loc,
                                std::vector<std::pair<std::string, std::string>> analysis) {
    GuidelineTemplate t;
    t.error_type = type;
    t.localization_slots = std::move(loc);
    t.analysis_slots = std::move(analysis);
    return t;
}

}  // namespace

std::vector<std::string> GuidelineTemplate::slot_names() const {
    std::vector<std::string> out;
    for (const auto& [slot, label] : localization_slots) out.push_back(slot);
    for (const auto& [slot, label] : analysis_slots) out.push_back(slot);
    return out;
}

std::string GuidelineTemplate::render_unfilled() const {
    std::string out = "[Error Type] " + error_type_name(error_type) + "\n[Localization]\n";
    for (const auto& [slot, label] : localization_slots) {
        out += label + ": {" + slot + "}\n";
    }
    out += "[Analysis]\n";
    for (const auto& [slot, label] : analysis_slots) {
        out += label + ": {" + slot + "}\n";
    }
    return out;
}

bool FilledGuideline::all_assigned(const GuidelineTemplate& tmpl) const {
    for (const std::string& slot : tmpl.slot_names()) {
        if (values.find(slot) == values.end()) return false;
    }
    return true;
}

std::string FilledGuideline::render(const GuidelineTemplate& tmpl) const {
    std::string out = "[Error Type] " + error_type_name(error_type) + "\n[Localization]\n";
    auto value_of = [&](const std::string& slot) {
        auto it = values.find(slot);
        return it == values.end() ? std::string("(unassigned)") : it->second;
    };
    for (const auto& [slot, label] : tmpl.localization_slots) {
        out += label + ": " + value_of(slot) + "\n";
    }
    out += "[Analysis]\n";
    for (const auto& [slot, label] : tmpl.analysis_slots) {
        out += label + ": " + value_of(slot) + "\n";
    }
    return out;
}

const Taxonomy& Taxonomy::instance() {
    static const Taxonomy taxonomy(32);
    return taxonomy;
}

Taxonomy::Taxonomy(int reserved_slots) : reserved_slots_(reserved_slots) {
    if (reserved_slots_ < kErrorTypeCount) reserved_slots_ = kErrorTypeCount;

    types_ = {
        {1, "attribute_mismatch", "Attribute Mismatch",
         "The SQL selects incorrect attributes (columns) from the schema, indicating "
         "misalignment between the user question intent and attribute selection.",
         "Question asks for student names but the SQL selects student.id instead of "
         "student.name.",
         {"incorrect", "attribute", "column", "mismatch"},
         true},
        {2, "attribute_redundancy", "Attribute Redundancy",
         "The SQL includes unnecessary attributes (columns) not mentioned or implied in the "
         "user question.",
         "Question asks to list course names but the SQL also selects course.credits and "
         "course.department.",
         {"unnecessary", "attribute", "column", "redundant"},
         false},
        {3, "attribute_missing", "Attribute Missing",
         "The SQL fails to include essential attributes (columns) required by the user "
         "question.",
         "Question asks for student names and their grades but the SQL only selects "
         "student.name.",
         {"missing", "attribute", "column", "omitted"},
         false},
        {4, "table_mismatch", "Table Mismatch",
         "The SQL references incorrect tables from the database schema.",
         "Question asks about course enrollments but the SQL queries the attendance table "
         "instead of enrollment.",
         {"incorrect", "table", "wrong", "mismatch"},
         true},
        {5, "table_redundancy", "Table Redundancy",
         "The SQL joins unnecessary tables not required by the query logic.",
         "Question asks to list all students but the SQL joins student, enrollment and course "
         "when only student is needed.",
         {"extra", "redundant", "unnecessary columns"},
         true},
        {6, "table_missing", "Table Missing",
         "The SQL omits required tables needed to answer the user question.",
         "Question asks for student names and their course grades but the SQL only queries "
         "student without joining enrollment.",
         {"missing", "table", "omitted", "join"},
         false},
        {7, "value_error", "Value Error",
         "The SQL uses incorrect values or wrong data formats in conditions.",
         "Question asks for courses after January 1, 2023 but the SQL uses start_date > "
         "'01/01/23' instead of '2023-01-01'.",
         {"incorrect", "value", "format", "condition"},
         true},
        {8, "condition_missing", "Condition Missing",
         "The SQL fails to include necessary filtering conditions stated or implied in the "
         "user question.",
         "Question asks for students who completed the Database course but the SQL omits "
         "WHERE course.name = 'Database'.",
         {"missing", "condition", "filter", "implied"},
         false},
        {9, "condition_error", "Condition Error",
         "The SQL contains incorrect or redundant conditions that deviate from the user "
         "question intent.",
         "Question asks for Grade 3 students with Math OR English above 90 but the SQL mixes "
         "AND/OR without parentheses.",
         {"incorrect", "condition", "deviate", "parentheses"},
         false},
        {10, "function_error", "Function Error",
         "The SQL misuses aggregate, date/time, string, or conditional functions.",
         "Question asks for average grade above 85 per course but the SQL places AVG(grade) "
         "in WHERE instead of HAVING.",
         {"misuse", "function", "aggregate", "placement"},
         false},
        {11, "clause_error", "Clause Error",
         "The SQL incorrectly includes or omits essential clauses like GROUP BY, ORDER BY, or "
         "HAVING.",
         "Question asks to count students per department but the SQL omits GROUP BY "
         "department.",
         {"clause", "omitted", "unnecessary", "group"},
         true},
        {12, "modifier_error", "Modifier Error",
         "The SQL incorrectly uses or omits modifiers like DISTINCT, ASC, or DESC.",
         "Question asks for unique course names in descending order but the SQL omits "
         "DISTINCT or uses ASC instead of DESC.",
         {"modifier", "distinct", "ascending", "descending"},
         false},
    };

    null_words_ = {"correct", "SQL"};

    templates_ = {
        make_template(ErrorType::attribute_mismatch,
                      {{"nodes", "Error Node(s)"},
                       {"current_attribute", "Current Attribute"},
                       {"clause", "Located In"}},
                      {{"expected_attribute_from_nl", "NL Specified Attribute"},
                       {"table", "Owning Table"},
                       {"selection_intent", "Selection Intent"}}),
        make_template(ErrorType::attribute_redundancy,
                      {{"nodes", "Error Node(s)"},
                       {"redundant_attributes", "Redundant Attributes"},
                       {"clause", "Located In"}},
                      {{"required_attributes_from_nl", "NL Required Attributes"},
                       {"justification", "Why Redundant"}}),
        make_template(ErrorType::attribute_missing,
                      {{"nodes", "Error Node(s)"},
                       {"current_attributes", "Current Attributes"},
                       {"clause", "Located In"}},
                      {{"missing_attribute_from_nl", "NL Missing Attribute"},
                       {"table", "Owning Table"}}),
        make_template(ErrorType::table_mismatch,
                      {{"nodes", "Error Node(s)"},
                       {"current_table", "Current Table"},
                       {"clause", "Located In"}},
                      {{"expected_table_from_nl", "NL Specified Table"},
                       {"required_columns", "Columns Required"},
                       {"join_path", "Join Path"}}),
        make_template(ErrorType::table_redundancy,
                      {{"nodes", "Error Node(s)"},
                       {"redundant_tables", "Redundant Tables"},
                       {"clause", "Located In"}},
                      {{"required_tables_from_nl", "NL Required Tables"},
                       {"join_impact", "Join Impact"}}),
        make_template(ErrorType::table_missing,
                      {{"nodes", "Error Node(s)"},
                       {"current_tables", "Current Tables"},
                       {"clause", "Located In"}},
                      {{"missing_table_from_nl", "NL Missing Table"},
                       {"join_condition", "Join Condition"},
                       {"required_columns", "Columns Required"}}),
        make_template(ErrorType::value_error,
                      {{"nodes", "Error Node(s)"},
                       {"current_value", "Current Value"},
                       {"clause", "Located In"}},
                      {{"correct_value_from_nl", "NL Specified Value"},
                       {"data_type", "Column Data Type"},
                       {"format_issue", "Format Issue"}}),
        make_template(ErrorType::condition_missing,
                      {{"nodes", "Error Node(s)"},
                       {"current_conditions", "Current Conditions"},
                       {"clause", "Located In"}},
                      {{"missing_condition_from_nl", "NL Missing Condition"},
                       {"condition_column", "Condition Column"},
                       {"implicit", "Implicit Condition"}}),
        make_template(ErrorType::condition_error,
                      {{"nodes", "Error Node(s)"},
                       {"current_condition", "Current Condition"},
                       {"clause", "Located In"}},
                      {{"expected_condition_from_nl", "NL Specified Condition"},
                       {"operator_issue", "Operator Issue"},
                       {"grouping_issue", "Grouping Issue"}}),
        make_template(ErrorType::function_error,
                      {{"nodes", "Error Node(s)"},
                       {"current_function", "Current Function"},
                       {"clause", "Located In"}},
                      {{"expected_function_from_nl", "NL Specified Function"},
                       {"argument_issue", "Argument Issue"},
                       {"placement_issue", "Placement Issue"}}),
        make_template(ErrorType::clause_error,
                      {{"nodes", "Error Node(s)"},
                       {"current_clauses", "Current Clauses"},
                       {"clause", "Located In"}},
                      {{"expected_clause_from_nl", "NL Specified Clause"},
                       {"aggregation_columns", "Aggregation Columns"},
                       {"reason", "Why Needed"}}),
        make_template(ErrorType::modifier_error,
                      {{"nodes", "Error Node(s)"},
                       {"current_modifier", "Current Modifier"},
                       {"clause", "Located In"}},
                      {{"expected_modifier_from_nl", "NL Specified Modifier"},
                       {"ordering_column", "Ordering Column"},
                       {"uniqueness_required", "Uniqueness Required"}}),
    };

    for (const auto& entry : external_map()) {
        if (!entry.type) null_external_.emplace_back(entry.category, entry.subcategory);
    }
}

const ErrorTypeInfo& Taxonomy::info(ErrorType type) const {
    return types_[static_cast<std::size_t>(static_cast<int>(type) - 1)];
}

std::optional<ErrorType> Taxonomy::by_name(const std::string& name) const {
    for (const auto& t : types_) {
        if (t.name == name || t.display_name == name) return static_cast<ErrorType>(t.id);
    }
    return std::nullopt;
}

ErrorToken Taxonomy::token_for(std::optional<ErrorType> label) const {
    if (!label) return ErrorToken{kNullTokenSurface, std::nullopt};
    int id = static_cast<int>(*label);
    return ErrorToken{"[ERR]_" + std::to_string(id), label};
}

std::optional<ErrorType> Taxonomy::label_for(const std::string& surface) const {
    if (surface == kNullTokenSurface) return std::nullopt;
    const std::string prefix = "[ERR]_";
    if (surface.rfind(prefix, 0) != 0) throw UnknownToken(surface);
    std::string tail = surface.substr(prefix.size());
    if (tail.empty() || !std::all_of(tail.begin(), tail.end(),
                                     [](unsigned char c) { return std::isdigit(c); })) {
        throw UnknownToken(surface);
    }
    int index = 0;
    try {
        index = std::stoi(tail);
    } catch (const std::exception&) {
        throw UnknownToken(surface);
    }
    if (index >= 1 && index <= kErrorTypeCount) return static_cast<ErrorType>(index);
    if (index > kErrorTypeCount && index <= reserved_slots_) throw ReservedToken(index);
    throw UnknownToken(surface);
}

int Taxonomy::priority(ErrorType type) const {
    // table tier > attribute tier > condition/value tier > function/clause/modifier
    static const std::array<int, 13> rank = {
        0,
        4,   // attribute_mismatch
        5,   // attribute_redundancy
        6,   // attribute_missing
        1,   // table_mismatch
        2,   // table_redundancy
        3,   // table_missing
        7,   // value_error
        8,   // condition_missing
        9,   // condition_error
        10,  // function_error
        11,  // clause_error
        12,  // modifier_error
    };
    return rank[static_cast<std::size_t>(static_cast<int>(type))];
}

const GuidelineTemplate& Taxonomy::guideline(ErrorType type) const {
    return templates_[static_cast<std::size_t>(static_cast<int>(type) - 1)];
}

std::vector<std::pair<std::string, std::string>> Taxonomy::map_external(ErrorType type) const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& entry : external_map()) {
        if (entry.type && *entry.type == type) out.emplace_back(entry.category, entry.subcategory);
    }
    return out;
}

const std::vector<std::pair<std::string, std::string>>& Taxonomy::uncovered_external() const {
    return null_external_;
}

std::string Taxonomy::export_json() const {
    nlohmann::ordered_json j;
    j["version"] = "taxonomy/1";
    j["reserved_slots"] = reserved_slots_;

    nlohmann::ordered_json types = nlohmann::ordered_json::array();
    for (const auto& t : types_) {
        nlohmann::ordered_json e;
        e["id"] = t.id;
        e["token"] = "[ERR]_" + std::to_string(t.id);
        e["name"] = t.name;
        e["display_name"] = t.display_name;
        e["description"] = t.description;
        e["example"] = t.example;
        e["related_words"] = t.related_words;
        e["has_static_rule"] = t.has_static_rule;
        e["priority"] = priority(static_cast<ErrorType>(t.id));
        types.push_back(std::move(e));
    }
    j["error_types"] = std::move(types);

    j["null_token"] = {{"token", kNullTokenSurface}, {"related_words", null_words_}};
    j["reserved_tokens"] = {{"from", kErrorTypeCount + 1}, {"to", reserved_slots_}};

    nlohmann::ordered_json templates = nlohmann::ordered_json::array();
    for (const auto& t : templates_) {
        nlohmann::ordered_json e;
        e["error_type"] = error_type_name(t.error_type);
        e["slots_source"] = t.error_type == ErrorType::value_error ? "illustrated" : "authored";
        nlohmann::ordered_json loc = nlohmann::ordered_json::array();
        for (const auto& [slot, label] : t.localization_slots) {
            loc.push_back({{"slot", slot}, {"label", label}});
        }
        nlohmann::ordered_json ana = nlohmann::ordered_json::array();
        for (const auto& [slot, label] : t.analysis_slots) {
            ana.push_back({{"slot", slot}, {"label", label}});
        }
        e["localization"] = std::move(loc);
        e["analysis"] = std::move(ana);
        templates.push_back(std::move(e));
    }
    j["guideline_templates"] = std::move(templates);

    nlohmann::ordered_json mapping = nlohmann::ordered_json::array();
    for (const auto& entry : external_map()) {
        nlohmann::ordered_json e;
        e["category"] = entry.category;
        e["subcategory"] = entry.subcategory;
        if (entry.type) {
            e["error_token"] = "[ERR]_" + std::to_string(static_cast<int>(*entry.type));
            e["error_type"] = error_type_name(*entry.type);
        } else {
            e["error_token"] = nullptr;
            e["error_type"] = nullptr;
        }
        mapping.push_back(std::move(e));
    }
    j["external_mapping"] = std::move(mapping);

    nlohmann::ordered_json uncovered = nlohmann::ordered_json::array();
    for (const auto& [category, subcategory] : null_external_) {
        uncovered.push_back({{"category", category}, {"subcategory", subcategory}});
    }
    j["uncovered_external"] = std::move(uncovered);

    return j.dump(2) + "\n";
}

std::vector<std::string> valid_token_surfaces() {
    std::vector<std::string> out;
    for (int i = 1; i <= kErrorTypeCount; ++i) out.push_back("[ERR]_" + std::to_string(i));
    out.push_back(kNullTokenSurface);
    return out;
}

std::string error_type_name(ErrorType type) {
    return Taxonomy::instance().info(type).name;
}

std::vector<ErrorType> priority_sorted(const std::set<ErrorType>& labels) {
    std::vector<ErrorType> out(labels.begin(), labels.end());
    const Taxonomy& tax = Taxonomy::instance();
    std::sort(out.begin(), out.end(), [&](ErrorType a, ErrorType b) {
        int pa = tax.priority(a);
        int pb = tax.priority(b);
        if (pa != pb) return pa < pb;
        return static_cast<int>(a) < static_cast<int>(b);
    });
    return out;
}

}  // namespace sqlrefine
