#include "sqlrefine/ast.hpp"

#include <algorithm>

#include "sqlrefine/errors.hpp"

namespace sqlrefine {

const char* node_kind_name(NodeKind kind) {
    switch (kind) {
        case NodeKind::select_clause: return "select_clause";
        case NodeKind::from_item: return "from_item";
        case NodeKind::join: return "join";
        case NodeKind::where_clause: return "where_clause";
        case NodeKind::group_by: return "group_by";
        case NodeKind::having: return "having";
        case NodeKind::order_by: return "order_by";
        case NodeKind::limit: return "limit";
        case NodeKind::predicate: return "predicate";
        case NodeKind::comparison: return "comparison";
        case NodeKind::logical_op: return "logical_op";
        case NodeKind::function_call: return "function_call";
        case NodeKind::column_ref: return "column_ref";
        case NodeKind::table_ref: return "table_ref";
        case NodeKind::literal: return "literal";
        case NodeKind::modifier: return "modifier";
        case NodeKind::subquery: return "subquery";
        case NodeKind::star: return "star";
    }
    return "unknown";
}

const AstNode& SqlAst::node(NodeId id) const {
    if (!valid_id(id)) throw UnknownNode(id);
    return nodes_[id];
}

AstNode& SqlAst::node_mut(NodeId id) {
    if (!valid_id(id)) throw UnknownNode(id);
    return nodes_[id];
}

const std::vector<NodeId>& SqlAst::children(NodeId id) const {
    if (!valid_id(id)) throw UnknownNode(id);
    return children_[id];
}

std::optional<NodeId> SqlAst::parent(NodeId id) const {
    if (!valid_id(id)) throw UnknownNode(id);
    return parent_[id];
}

std::vector<NodeId> SqlAst::preorder() const {
    return preorder_from(root_);
}

std::vector<NodeId> SqlAst::preorder_from(NodeId start) const {
    std::vector<NodeId> out;
    if (nodes_.empty()) return out;
    if (!valid_id(start)) throw UnknownNode(start);
    std::vector<NodeId> stack{start};
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        out.push_back(id);
        const auto& kids = children_[id];
        for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }
    return out;
}

std::string SqlAst::token_text(const Span& span) const {
    std::string out;
    for (std::size_t i = span.first; i <= span.last && i < source_tokens_.size(); ++i) {
        if (!out.empty()) out += ' ';
        out += source_tokens_[i].text;
    }
    return out;
}

bool SqlAst::reachable(NodeId id) const {
    if (!valid_id(id)) return false;
    NodeId cur = id;
    while (true) {
        if (cur == root_) return true;
        auto p = parent_[cur];
        if (!p) return false;
        cur = *p;
    }
}

void SqlAst::set_attr(NodeId id, const std::string& key, const std::string& value) {
    node_mut(id).attrs[key] = value;
}

void SqlAst::erase_attr(NodeId id, const std::string& key) {
    node_mut(id).attrs.erase(key);
}

void SqlAst::detach(NodeId id) {
    if (!valid_id(id)) throw UnknownNode(id);
    auto p = parent_[id];
    if (!p) return;
    auto& kids = children_[*p];
    kids.erase(std::remove(kids.begin(), kids.end(), id), kids.end());
    parent_[id] = std::nullopt;
}

void SqlAst::move_node(NodeId id, NodeId new_parent, std::size_t position) {
    if (!valid_id(id) || !valid_id(new_parent)) throw UnknownNode(id);
    detach(id);
    auto& kids = children_[new_parent];
    position = std::min(position, kids.size());
    kids.insert(kids.begin() + static_cast<std::ptrdiff_t>(position), id);
    parent_[id] = new_parent;
}

NodeId SqlAst::insert_node(NodeKind kind, NodeId parent, std::size_t position,
                           std::map<std::string, std::string> attrs) {
    if (!valid_id(parent)) throw UnknownNode(parent);
    NodeId id = static_cast<NodeId>(nodes_.size());
    AstNode n;
    n.id = id;
    n.kind = kind;
    n.span = nodes_[parent].span;  // placeholder; synthetic nodes are re-spanned on re-parse
    n.attrs = std::move(attrs);
    nodes_.push_back(std::move(n));
    children_.emplace_back();
    parent_.push_back(parent);
    auto& kids = children_[parent];
    position = std::min(position, kids.size());
    kids.insert(kids.begin() + static_cast<std::ptrdiff_t>(position), id);
    return id;
}

NodeId SqlAst::graft(const SqlAst& source_ast, NodeId source, NodeId parent, std::size_t position) {
    // copy by value up front: self-grafts reallocate the node storage
    const AstNode src = source_ast.node(source);
    const std::vector<NodeId> kids = source_ast.children(source);
    NodeId copy = insert_node(src.kind, parent, position, src.attrs);
    for (std::size_t i = 0; i < kids.size(); ++i) {
        graft(source_ast, kids[i], copy, i);
    }
    return copy;
}

AstBuilder::AstBuilder(std::vector<Token> tokens, Dialect dialect) {
    ast_.source_tokens_ = std::move(tokens);
    ast_.dialect_ = dialect;
}

NodeId AstBuilder::add(NodeKind kind, std::optional<NodeId> parent) {
    NodeId id = static_cast<NodeId>(ast_.nodes_.size());
    AstNode n;
    n.id = id;
    n.kind = kind;
    ast_.nodes_.push_back(std::move(n));
    ast_.children_.emplace_back();
    ast_.parent_.push_back(parent);
    if (parent) ast_.children_[*parent].push_back(id);
    return id;
}

void AstBuilder::set_span(NodeId id, std::size_t first, std::size_t last) {
    ast_.nodes_[id].span = Span{first, last};
}

void AstBuilder::set_attr(NodeId id, const std::string& key, std::string value) {
    ast_.nodes_[id].attrs[key] = std::move(value);
}

void AstBuilder::reparent(NodeId child, NodeId new_parent) {
    auto old = ast_.parent_[child];
    if (old) {
        auto& kids = ast_.children_[*old];
        kids.erase(std::remove(kids.begin(), kids.end(), child), kids.end());
    }
    ast_.parent_[child] = new_parent;
    ast_.children_[new_parent].push_back(child);
}

SqlAst AstBuilder::finish(NodeId root) {
    ast_.root_ = root;
    return std::move(ast_);
}

}  // namespace sqlrefine
