#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sqlrefine/ast.hpp"

namespace sqlrefine {

/// Lex SQL text into tokens. Comments are stripped beforehand; string
/// literals and quoted identifiers survive as single tokens. Throws
/// ParseError on unterminated strings/identifiers.
std::vector<Token> lex_sql(const std::string& text);

/// Parse a single SELECT statement in the SQLite subset used by the
/// BIRD/Spider benchmarks. Throws ParseError with the offending token index.
SqlAst parse_sql(const std::string& text, Dialect dialect = Dialect::sqlite);

/// Render an ast back to SQL text. parse_sql(flatten_ast(a)) is structurally
/// identical to a up to whitespace and keyword casing.
std::string flatten_ast(const SqlAst& ast);

/// Render the subtree rooted at `id` as SQL text.
std::string flatten_node(const SqlAst& ast, NodeId id);

/// Render a fragment (whole subtree under fragment.root) as SQL text.
std::string flatten_fragment(const SqlAst& ast, const AstFragment& fragment);

/// Structural equality: node kinds, attrs and child order, ignoring ids and
/// spans.
bool structurally_equal(const SqlAst& a, const SqlAst& b);
bool structurally_equal(const SqlAst& a, NodeId na, const SqlAst& b, NodeId nb);

/// Smallest connected fragment containing all requested nodes, extended
/// upward to the nearest clause-kind ancestor (select/from/where/group
/// by/having/order by/limit); the whole statement when no clause ancestor
/// exists. Empty input yields the empty fragment. Throws UnknownNode.
AstFragment minimal_enclosing_subtree(const SqlAst& ast, const std::set<NodeId>& node_ids);

bool is_clause_kind(NodeKind kind);

/// Traversal index over the ast: every table_ref, column_ref and literal in
/// deterministic pre-order. Literals under comparison/IN predicates carry
/// the resolved (column, operator) context.
enum class RefKind { table, column, literal };

struct PredicateContext {
    std::string table;     // resolved table name ("" when unresolvable)
    std::string column;
    std::string op;        // comparison operator symbol, e.g. "=" or "IN"
    NodeKind clause;       // enclosing clause kind

    std::string qualified_column() const {
        return table.empty() ? column : table + "." + column;
    }
};

struct SchemaReference {
    NodeId node_id = 0;
    RefKind kind = RefKind::table;
    std::string name;                      // table name, column name, or literal value
    std::optional<std::string> qualifier;  // alias/table as written, columns only
    std::optional<PredicateContext> predicate_context;  // literals only
};

std::vector<SchemaReference> collect_schema_references(const SqlAst& ast);

/// Alias (or bare table name) -> table name map built from the ast's
/// table_ref nodes. Keys are case-folded.
std::vector<std::pair<std::string, std::string>> table_alias_map(const SqlAst& ast);

/// Resolve a column qualifier (alias or table name, possibly empty) to a
/// table name using the ast's FROM items. Empty result when ambiguous.
std::string resolve_qualifier(const SqlAst& ast, const std::string& qualifier);

/// Versioned indented-tree rendering of the ast, used in detection inputs.
std::string render_ast_tree(const SqlAst& ast);

}  // namespace sqlrefine
