#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sqlrefine {

enum class Dialect { sqlite };

enum class TokenKind { word, number, string, quoted_ident, op, punct };

struct Token {
    TokenKind kind;
    std::string text;     // raw lexeme as written (quotes included for strings)
    std::size_t offset;   // character offset in the stripped source text
};

enum class NodeKind {
    select_clause,
    from_item,
    join,
    where_clause,
    group_by,
    having,
    order_by,
    limit,
    predicate,
    comparison,
    logical_op,
    function_call,
    column_ref,
    table_ref,
    literal,
    modifier,
    subquery,
    star,
};

const char* node_kind_name(NodeKind kind);

using NodeId = std::uint32_t;

/// Inclusive token-index span into the source token stream.
struct Span {
    std::size_t first = 0;
    std::size_t last = 0;

    bool contains(const Span& other) const {
        return first <= other.first && other.last <= last;
    }
    bool overlaps(const Span& other) const {
        return !(last < other.first || other.last < first);
    }
};

struct AstNode {
    NodeId id = 0;
    NodeKind kind = NodeKind::literal;
    Span span;
    std::map<std::string, std::string> attrs;

    std::string attr(const std::string& key) const {
        auto it = attrs.find(key);
        return it == attrs.end() ? std::string() : it->second;
    }
    bool has_attr(const std::string& key) const { return attrs.count(key) != 0; }
};

/// Parsed SQL statement: a rooted tree of syntactic units plus the token
/// stream of the original text. Node spans index into source_tokens.
///
/// Values are immutable in normal use; the mutation API below exists for the
/// perturbation operators, which flatten and re-parse their edits before
/// handing the result onward, so parse-time span invariants are only
/// guaranteed on parser output.
class SqlAst {
public:
    SqlAst() = default;

    const AstNode& node(NodeId id) const;
    AstNode& node_mut(NodeId id);
    const std::vector<NodeId>& children(NodeId id) const;
    std::optional<NodeId> parent(NodeId id) const;
    NodeId root() const { return root_; }
    std::size_t node_count() const { return nodes_.size(); }
    bool valid_id(NodeId id) const { return id < nodes_.size(); }

    const std::vector<Token>& source_tokens() const { return source_tokens_; }
    Dialect dialect() const { return dialect_; }

    /// Pre-order walk over nodes reachable from the root.
    std::vector<NodeId> preorder() const;
    std::vector<NodeId> preorder_from(NodeId start) const;

    /// Source text covered by a span, tokens joined with single spaces.
    std::string token_text(const Span& span) const;

    bool reachable(NodeId id) const;

    // -- mutation support (perturbation operators only) --
    void set_attr(NodeId id, const std::string& key, const std::string& value);
    void erase_attr(NodeId id, const std::string& key);
    /// Detach a node (and its subtree) from its parent's child list.
    void detach(NodeId id);
    /// Move a node (with its subtree) under a new parent at child index
    /// `position` (clamped).
    void move_node(NodeId id, NodeId new_parent, std::size_t position);
    /// Insert a fresh node under `parent` at child index `position`
    /// (clamped). Returns the new node's id.
    NodeId insert_node(NodeKind kind, NodeId parent, std::size_t position,
                       std::map<std::string, std::string> attrs);
    /// Deep-copy the subtree rooted at `source` (which may live in another
    /// ast) under `parent` at `position`. Returns the new subtree root id.
    NodeId graft(const SqlAst& source_ast, NodeId source, NodeId parent, std::size_t position);

private:
    friend class AstBuilder;

    std::vector<AstNode> nodes_;
    std::vector<std::vector<NodeId>> children_;
    std::vector<std::optional<NodeId>> parent_;
    NodeId root_ = 0;
    std::vector<Token> source_tokens_;
    Dialect dialect_ = Dialect::sqlite;
};

/// Builder used by the parser; keeps SqlAst construction in one place.
class AstBuilder {
public:
    explicit AstBuilder(std::vector<Token> tokens, Dialect dialect = Dialect::sqlite);

    NodeId add(NodeKind kind, std::optional<NodeId> parent = std::nullopt);
    void set_span(NodeId id, std::size_t first, std::size_t last);
    void set_attr(NodeId id, const std::string& key, std::string value);
    void reparent(NodeId child, NodeId new_parent);
    SqlAst finish(NodeId root);

private:
    SqlAst ast_;
};

/// Connected fragment of an ast: a subtree root plus its pre-order node set.
/// Empty fragment (no root) models the vacuous-input case.
struct AstFragment {
    std::optional<NodeId> root;
    std::vector<NodeId> nodes;

    bool empty() const { return !root.has_value(); }
};

}  // namespace sqlrefine
