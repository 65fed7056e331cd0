#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace sqlrefine {

/// The twelve detectable error types. Numeric values are the token indices.
enum class ErrorType : int {
    attribute_mismatch = 1,
    attribute_redundancy = 2,
    attribute_missing = 3,
    table_mismatch = 4,
    table_redundancy = 5,
    table_missing = 6,
    value_error = 7,
    condition_missing = 8,
    condition_error = 9,
    function_error = 10,
    clause_error = 11,
    modifier_error = 12,
};

constexpr int kErrorTypeCount = 12;

struct ErrorTypeInfo {
    int id;
    std::string name;          // snake_case identifier
    std::string display_name;  // human-readable name
    std::string description;
    std::string example;
    std::vector<std::string> related_words;
    bool has_static_rule;
};

struct ErrorToken {
    std::string surface;                 // "[ERR]_i" or "[ERR]_∅"
    std::optional<ErrorType> maps_to;    // empty for the null token
};

/// A set of error labels, or the explicit no-error marker. The marker never
/// co-occurs with labels; a plain empty set (no marker) is the intermediate
/// state before aggregation.
struct ErrorLabelSet {
    std::set<ErrorType> labels;
    bool no_error = false;

    static ErrorLabelSet none() { return ErrorLabelSet{{}, true}; }
    static ErrorLabelSet of(std::initializer_list<ErrorType> types) {
        return ErrorLabelSet{std::set<ErrorType>(types), false};
    }

    bool empty() const { return labels.empty() && !no_error; }
    bool is_no_error() const { return no_error; }
    bool contains(ErrorType t) const { return labels.count(t) != 0; }
    bool valid() const { return !(no_error && !labels.empty()); }

    bool operator==(const ErrorLabelSet& other) const {
        return labels == other.labels && no_error == other.no_error;
    }
};

/// Per-error-type guideline template: named slots grouped into a
/// localization section and an analysis section.
struct GuidelineTemplate {
    ErrorType error_type;
    std::vector<std::pair<std::string, std::string>> localization_slots;  // slot -> label
    std::vector<std::pair<std::string, std::string>> analysis_slots;

    std::vector<std::string> slot_names() const;
    std::string render_unfilled() const;
};

struct FilledGuideline {
    ErrorType error_type;
    std::map<std::string, std::string> values;

    bool all_assigned(const GuidelineTemplate& tmpl) const;
    std::string render(const GuidelineTemplate& tmpl) const;
};

/// Static taxonomy data: the 12 error types, their tokens, guideline
/// templates, priority ordering, related-word sets and the external
/// benchmark category mapping. Read-only after construction.
class Taxonomy {
public:
    /// Shared instance with the default reserved-slot capacity (N = 32).
    static const Taxonomy& instance();

    explicit Taxonomy(int reserved_slots = 32);

    int reserved_slots() const { return reserved_slots_; }

    const ErrorTypeInfo& info(ErrorType type) const;
    const std::vector<ErrorTypeInfo>& all() const { return types_; }
    std::optional<ErrorType> by_name(const std::string& name) const;

    /// λ_i -> "[ERR]_i"; no-error -> "[ERR]_∅".
    ErrorToken token_for(std::optional<ErrorType> label) const;

    /// Inverse of token_for. Throws UnknownToken / ReservedToken.
    std::optional<ErrorType> label_for(const std::string& surface) const;

    /// Strict total order: table tier, then attribute tier, then
    /// condition/value, then function/clause/modifier; id tie-break.
    /// Lower rank = higher priority.
    int priority(ErrorType type) const;

    const GuidelineTemplate& guideline(ErrorType type) const;

    /// External benchmark (category, subcategory) pairs covered by a type.
    std::vector<std::pair<std::string, std::string>> map_external(ErrorType type) const;
    /// External (category, subcategory) pairs no internal type covers.
    const std::vector<std::pair<std::string, std::string>>& uncovered_external() const;

    /// Words whose embeddings would seed the null token ("no error") slot.
    const std::vector<std::string>& null_token_words() const { return null_words_; }

    /// Versioned, deterministic JSON export of the whole taxonomy.
    std::string export_json() const;

private:
    int reserved_slots_;
    std::vector<ErrorTypeInfo> types_;
    std::vector<GuidelineTemplate> templates_;
    std::vector<std::pair<std::string, std::string>> null_external_;
    std::vector<std::string> null_words_;
};

/// All valid token surfaces ("[ERR]_1".."[ERR]_12" plus "[ERR]_∅").
std::vector<std::string> valid_token_surfaces();

std::string error_type_name(ErrorType type);

/// Sort a label set by priority (ties by id).
std::vector<ErrorType> priority_sorted(const std::set<ErrorType>& labels);

}  // namespace sqlrefine
