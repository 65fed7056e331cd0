#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sqlrefine/db.hpp"

namespace sqlrefine {

struct TableInfo {
    std::string name;
    std::optional<std::string> description;
};

struct ColumnInfo {
    std::string table;
    std::string name;
    std::string declared_type;
    std::optional<std::string> description;
    std::vector<std::string> example_values;
    bool primary_key = false;
};

enum class SchemaEdgeKind { has_column, primary_key_of, foreign_key_to };

/// Typed edge; table endpoints leave the column field empty.
struct SchemaEdge {
    SchemaEdgeKind kind;
    std::string from_table;
    std::string from_column;
    std::string to_table;
    std::string to_column;

    bool operator==(const SchemaEdge& other) const = default;
};

class SchemaGraph {
public:
    const std::vector<TableInfo>& tables() const { return tables_; }
    const std::vector<ColumnInfo>& columns() const { return columns_; }
    const std::vector<SchemaEdge>& edges() const { return edges_; }

    void add_table(TableInfo table);
    void add_column(ColumnInfo column);
    void add_edge(SchemaEdge edge);

    /// Case-insensitive resolution; returns the stored (case-preserved) name.
    std::optional<std::string> resolve_table(const std::string& name) const;
    std::optional<std::pair<std::string, std::string>> resolve_column(
        const std::string& table, const std::string& column) const;
    /// Tables owning a column with this name (case-insensitive).
    std::vector<std::string> tables_with_column(const std::string& column) const;

    std::vector<const ColumnInfo*> columns_of(const std::string& table) const;
    const ColumnInfo* find_column(const std::string& table, const std::string& column) const;

    /// foreign_key_to pairs (one direction each; the stored edge list keeps
    /// both directions).
    std::vector<std::pair<std::pair<std::string, std::string>,
                          std::pair<std::string, std::string>>>
    foreign_key_pairs() const;

    bool empty() const { return tables_.empty(); }

private:
    std::vector<TableInfo> tables_;
    std::vector<ColumnInfo> columns_;
    std::vector<SchemaEdge> edges_;
};

/// Read the full schema graph out of a SQLite file: tables, columns with
/// declared types, PK flags, FK edges in both directions, and up to
/// `example_values` deterministic sample values per column.
SchemaGraph introspect_schema(const std::string& db_path, int example_values = 3);

struct ValueDomain {
    std::vector<SqlValue> values;
    bool truncated = false;
};

/// Distinct non-null values of a column in deterministic order, truncated at
/// `limit`. Throws UnknownColumn.
ValueDomain lookup_values(const SchemaGraph& schema, const std::string& table,
                          const std::string& column, const Db& db, std::size_t limit = 10000);

struct QuestionNode {
    std::string text;
    std::size_t char_begin = 0;
    std::size_t char_end = 0;  // exclusive
};

enum class LinkKind { q_to_table, q_to_column, value_match };

struct LinkEdge {
    LinkKind kind;
    std::size_t question_node = 0;  // index into question_nodes
    std::string table;
    std::string column;         // empty for q_to_table
    std::string matched_value;  // value_match only

    bool operator==(const LinkEdge& other) const = default;
};

struct QuestionSchemaStructure {
    std::string question;
    std::vector<QuestionNode> question_nodes;
    SchemaGraph schema;  // possibly pruned
    std::vector<LinkEdge> link_edges;
};

/// External schema-linking result (Strategy 1 ingestion).
struct SchemaLinkingResult {
    std::vector<std::string> tables;
    std::vector<std::pair<std::string, std::string>> columns;

    struct SpanAssignment {
        std::string span_text;
        std::vector<std::string> tables;
        std::vector<std::pair<std::string, std::string>> columns;
    };
    std::vector<SpanAssignment> spans;

    static SchemaLinkingResult from_json(const std::string& json_text);
    std::string to_json() const;
};

/// 1 - normalized Levenshtein distance over case-folded strings.
double fuzzy_ratio(const std::string& a, const std::string& b);

/// Character-level fuzzy value linking: token-boundary-aligned question
/// spans matched case-insensitively against column cell values.
std::vector<LinkEdge> link_values(const std::string& question, const SchemaGraph& schema,
                                  const Db& db, double threshold = 0.85,
                                  std::size_t max_span_tokens = 6);

/// Assemble the question-schema structure. With a linking result the schema
/// is pruned to the linked elements plus PK/FK closure; without one a
/// deterministic exact/partial name-match fallback builds the link edges.
/// Throws UnresolvedLinkTarget for linking names missing from the schema.
QuestionSchemaStructure build_qss(const std::string& question, const SchemaGraph& schema,
                                  const std::optional<SchemaLinkingResult>& sl,
                                  const std::vector<LinkEdge>& value_links);

/// Induced subgraph over the given (resolved) tables and columns, extended
/// by PK/FK closure: primary keys of retained tables and foreign-key
/// columns connecting two retained tables are kept.
SchemaGraph closure_subgraph(const SchemaGraph& schema, std::set<std::string> tables,
                             std::set<std::pair<std::string, std::string>> columns);

/// Deterministic text rendering of the QSS (schema block, relations, link
/// annotations). Byte-identical for identical input.
std::string serialize_mschema(const QuestionSchemaStructure& qss);

/// Word tokens of a question with character offsets.
std::vector<QuestionNode> question_tokens(const std::string& question);

}  // namespace sqlrefine
