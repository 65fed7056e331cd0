#include "sqlrefine/perturb.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <set>
#include <unordered_set>

#include "sqlrefine/errors.hpp"
#include "sqlrefine/execution.hpp"
#include "sqlrefine/parser.hpp"

namespace sqlrefine {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {

std::string fold(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string clause_name_at(const SqlAst& ast, NodeId id) {
    std::optional<NodeId> cur = id;
    while (cur) {
        if (is_clause_kind(ast.node(*cur).kind)) return node_kind_name(ast.node(*cur).kind);
        cur = ast.parent(*cur);
    }
    return node_kind_name(NodeKind::subquery);
}

std::optional<NodeId> root_clause(const SqlAst& ast, NodeKind kind) {
    for (NodeId kid : ast.children(ast.root())) {
        if (ast.node(kid).kind == kind) return kid;
    }
    return std::nullopt;
}

std::size_t child_index(const SqlAst& ast, NodeId id) {
    auto parent = ast.parent(id);
    if (!parent) return 0;
    const auto& kids = ast.children(*parent);
    for (std::size_t i = 0; i < kids.size(); ++i) {
        if (kids[i] == id) return i;
    }
    return 0;
}

/// Column names (folded) referenced anywhere in the ast.
std::set<std::string> used_column_names(const SqlAst& ast) {
    std::set<std::string> out;
    for (NodeId id : ast.preorder()) {
        const AstNode& n = ast.node(id);
        if (n.kind == NodeKind::column_ref) out.insert(fold(n.attr("column")));
    }
    return out;
}

std::set<std::string> referenced_tables(const SqlAst& ast, const SchemaGraph& schema) {
    std::set<std::string> out;
    for (NodeId id : ast.preorder()) {
        const AstNode& n = ast.node(id);
        if (n.kind != NodeKind::table_ref) continue;
        auto resolved = schema.resolve_table(n.attr("table"));
        out.insert(fold(resolved.value_or(n.attr("table"))));
    }
    return out;
}

/// Columns that are primary keys or endpoints of any foreign key.
std::set<std::pair<std::string, std::string>> key_columns(const SchemaGraph& schema) {
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& col : schema.columns()) {
        if (col.primary_key) keys.insert({fold(col.table), fold(col.name)});
    }
    for (const auto& fk : schema.foreign_key_pairs()) {
        keys.insert({fold(fk.first.first), fold(fk.first.second)});
        keys.insert({fold(fk.second.first), fold(fk.second.second)});
    }
    return keys;
}

using MutationFn = std::function<std::optional<std::vector<MutationRecord>>(SqlAst&)>;

// ---- per-type candidate enumeration ----

std::vector<MutationFn> sites_attribute_mismatch(const SqlAst& ast, const SchemaGraph& schema) {
    std::vector<MutationFn> out;
    auto select = root_clause(ast, NodeKind::select_clause);
    if (!select) return out;
    auto keys = key_columns(schema);
    auto used = used_column_names(ast);

    for (NodeId id : ast.preorder_from(*select)) {
        const AstNode& n = ast.node(id);
        if (n.kind != NodeKind::column_ref) continue;
        std::string table = resolve_qualifier(ast, n.attr("table"));
        if (table.empty()) continue;
        auto resolved = schema.resolve_table(table);
        if (!resolved) continue;
        std::string before = n.attr("column");
        std::string clause = clause_name_at(ast, id);
        for (const auto* col : schema.columns_of(*resolved)) {
            if (fold(col->name) == fold(before)) continue;
            if (used.count(fold(col->name))) continue;
            if (keys.count({fold(col->table), fold(col->name)})) continue;
            std::string after = col->name;
            std::string table_name = col->table;
            out.push_back([id, before, after, table_name, clause](SqlAst& work)
                              -> std::optional<std::vector<MutationRecord>> {
                work.set_attr(id, "column", after);
                return std::vector<MutationRecord>{{id, before, after, table_name, after, clause}};
            });
        }
    }
    return out;
}

std::vector<MutationFn> sites_attribute_redundancy(const SqlAst& ast, const SchemaGraph& schema) {
    std::vector<MutationFn> out;
    auto select = root_clause(ast, NodeKind::select_clause);
    if (!select) return out;
    auto keys = key_columns(schema);
    auto used = used_column_names(ast);

    // qualifier to use per table: the alias when the table_ref has one
    std::map<std::string, std::string> qualifier_of;
    for (NodeId id : ast.preorder()) {
        const AstNode& n = ast.node(id);
        if (n.kind != NodeKind::table_ref) continue;
        auto resolved = schema.resolve_table(n.attr("table"));
        if (!resolved) continue;
        qualifier_of[fold(*resolved)] =
            n.has_attr("alias") ? n.attr("alias") : n.attr("table");
    }

    NodeId select_id = *select;
    for (const auto& [table_key, qualifier] : qualifier_of) {
        auto resolved = schema.resolve_table(table_key);
        if (!resolved) continue;
        for (const auto* col : schema.columns_of(*resolved)) {
            if (used.count(fold(col->name))) continue;
            if (keys.count({fold(col->table), fold(col->name)})) continue;
            std::string column = col->name;
            std::string table_name = col->table;
            std::string qual = qualifier;
            out.push_back([select_id, column, table_name, qual](SqlAst& work)
                              -> std::optional<std::vector<MutationRecord>> {
                NodeId added = work.insert_node(
                    NodeKind::column_ref, select_id, work.children(select_id).size(),
                    {{"column", column}, {"table", qual}});
                return std::vector<MutationRecord>{{added, "", qual + "." + column, table_name,
                                                    column, "select_clause"}};
            });
        }
    }
    return out;
}

std::vector<MutationFn> sites_attribute_missing(const SqlAst& ast, const SchemaGraph&) {
    std::vector<MutationFn> out;
    auto select = root_clause(ast, NodeKind::select_clause);
    if (!select) return out;
    std::vector<NodeId> items;
    for (NodeId kid : ast.children(*select)) {
        if (ast.node(kid).kind != NodeKind::modifier) items.push_back(kid);
    }
    if (items.size() < 2) return out;
    for (NodeId item : items) {
        std::string before = flatten_node(ast, item);
        out.push_back([item, before](SqlAst& work) -> std::optional<std::vector<MutationRecord>> {
            work.detach(item);
            return std::vector<MutationRecord>{{item, before, "", "", "", "select_clause"}};
        });
    }
    return out;
}

/// Column names referenced through a specific FROM entry (alias key).
std::set<std::string> columns_via_key(const SqlAst& ast, const std::string& key,
                                      bool include_unqualified) {
    std::set<std::string> out;
    for (NodeId id : ast.preorder()) {
        const AstNode& n = ast.node(id);
        if (n.kind != NodeKind::column_ref) continue;
        std::string qual = n.attr("table");
        if (qual.empty() ? include_unqualified : fold(qual) == key) out.insert(fold(n.attr("column")));
    }
    return out;
}

std::vector<MutationFn> sites_table_mismatch(const SqlAst& ast, const SchemaGraph& schema) {
    std::vector<MutationFn> out;
    auto tables_in_query = referenced_tables(ast, schema);
    std::size_t ref_count = 0;
    for (NodeId id : ast.preorder()) {
        if (ast.node(id).kind == NodeKind::table_ref) ++ref_count;
    }

    for (NodeId id : ast.preorder()) {
        const AstNode& n = ast.node(id);
        if (n.kind != NodeKind::table_ref) continue;
        std::string old_table = n.attr("table");
        bool has_alias = n.has_attr("alias");
        std::string key = fold(has_alias ? n.attr("alias") : old_table);
        auto needed = columns_via_key(ast, key, /*include_unqualified=*/ref_count == 1);

        for (const auto& candidate : schema.tables()) {
            if (tables_in_query.count(fold(candidate.name))) continue;
            bool covers = true;
            for (const auto& col : needed) {
                if (!schema.resolve_column(candidate.name, col)) {
                    covers = false;
                    break;
                }
            }
            if (!covers) continue;
            std::string after = candidate.name;
            std::string clause = clause_name_at(ast, id);
            out.push_back([id, old_table, after, has_alias, clause](SqlAst& work)
                              -> std::optional<std::vector<MutationRecord>> {
                work.set_attr(id, "table", after);
                if (!has_alias) {
                    // unqualified alias: column qualifiers spelled with the old
                    // table name must follow
                    for (NodeId cid : work.preorder()) {
                        const AstNode& cn = work.node(cid);
                        if (cn.kind == NodeKind::column_ref &&
                            fold(cn.attr("table")) == fold(old_table)) {
                            work.set_attr(cid, "table", after);
                        }
                    }
                }
                return std::vector<MutationRecord>{{id, old_table, after, after, "", clause}};
            });
        }
    }
    return out;
}

std::vector<MutationFn> sites_table_redundancy(const SqlAst& ast, const SchemaGraph& schema) {
    std::vector<MutationFn> out;
    auto from = root_clause(ast, NodeKind::from_item);
    if (!from) return out;

    // existing alias keys, to keep the duplicate alias fresh
    std::set<std::string> taken;
    for (NodeId id : ast.preorder()) {
        const AstNode& n = ast.node(id);
        if (n.kind != NodeKind::table_ref) continue;
        taken.insert(fold(n.attr("table")));
        if (n.has_attr("alias")) taken.insert(fold(n.attr("alias")));
    }

    NodeId from_id = *from;
    for (NodeId join : ast.children(from_id)) {
        const AstNode& jn = ast.node(join);
        if (jn.kind != NodeKind::join) continue;
        const auto& jkids = ast.children(join);
        if (jkids.size() < 2) continue;  // need an ON condition to mirror
        const AstNode& tref = ast.node(jkids[0]);
        if (tref.kind != NodeKind::table_ref) continue;
        if (!schema.resolve_table(tref.attr("table"))) continue;

        std::string old_key = tref.has_attr("alias") ? tref.attr("alias") : tref.attr("table");
        std::string fresh = old_key + "_2";
        int suffix = 2;
        while (taken.count(fold(fresh))) fresh = old_key + "_" + std::to_string(++suffix);
        std::string table_name = tref.attr("table");

        out.push_back([from_id, join, old_key, fresh, table_name](SqlAst& work)
                          -> std::optional<std::vector<MutationRecord>> {
            NodeId copy = work.graft(work, join, from_id, work.children(from_id).size());
            for (NodeId id : work.preorder_from(copy)) {
                AstNode& n = work.node_mut(id);
                if (n.kind == NodeKind::table_ref && fold(n.attr("table")) == fold(table_name)) {
                    n.attrs["alias"] = fresh;
                } else if (n.kind == NodeKind::column_ref &&
                           fold(n.attr("table")) == fold(old_key)) {
                    n.attrs["table"] = fresh;
                }
            }
            std::string after = flatten_node(work, copy);
            return std::vector<MutationRecord>{{copy, "", after, table_name, "", "from_item"}};
        });
    }
    return out;
}

std::vector<MutationFn> sites_table_missing(const SqlAst& ast, const SchemaGraph& schema) {
    std::vector<MutationFn> out;
    auto from = root_clause(ast, NodeKind::from_item);
    if (!from) return out;

    for (NodeId join : ast.children(*from)) {
        const AstNode& jn = ast.node(join);
        if (jn.kind != NodeKind::join) continue;
        const auto& jkids = ast.children(join);
        if (jkids.empty()) continue;
        const AstNode& tref = ast.node(jkids[0]);
        if (tref.kind != NodeKind::table_ref) continue;
        std::string key = fold(tref.has_attr("alias") ? tref.attr("alias") : tref.attr("table"));

        // the join's table must not be referenced outside the join subtree
        std::set<NodeId> inside;
        for (NodeId id : ast.preorder_from(join)) inside.insert(id);
        bool referenced_outside = false;
        for (NodeId id : ast.preorder()) {
            if (inside.count(id)) continue;
            const AstNode& n = ast.node(id);
            if (n.kind != NodeKind::column_ref) continue;
            std::string qual = n.attr("table");
            if (!qual.empty()) {
                if (fold(qual) == key) {
                    referenced_outside = true;
                    break;
                }
            } else if (schema.resolve_column(tref.attr("table"), n.attr("column"))) {
                referenced_outside = true;  // could silently rebind; skip site
                break;
            }
        }
        if (referenced_outside) continue;

        std::string before = flatten_node(ast, join);
        std::string table_name = tref.attr("table");
        out.push_back([join, before, table_name](SqlAst& work)
                          -> std::optional<std::vector<MutationRecord>> {
            work.detach(join);
            return std::vector<MutationRecord>{{join, before, "", table_name, "", "from_item"}};
        });
    }
    return out;
}

std::string title_case(const std::string& s) {
    std::string out = fold(s);
    if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return out;
}

std::string upper_case(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

bool looks_like_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    return true;
}

/// Out-of-domain replacement pool: morphological truncation, case variants,
/// plural shift, and format shifts, in deterministic order.
std::vector<std::string> value_candidates(const std::string& value, const std::string& type) {
    std::vector<std::string> out;
    if (type == "string") {
        if (value.size() >= 2) out.push_back(value.substr(0, value.size() - 1));
        if (value.size() >= 4) out.push_back(value.substr(0, value.size() - 2));
        out.push_back(fold(value));
        out.push_back(upper_case(value));
        out.push_back(title_case(value));
        out.push_back(value + "s");
        if (looks_like_iso_date(value)) {
            out.push_back(value.substr(5, 2) + "/" + value.substr(8, 2) + "/" + value.substr(0, 4));
        }
    } else if (type == "number") {
        try {
            if (value.find('.') == std::string::npos) {
                long long v = std::stoll(value);
                out.push_back(std::to_string(v + 1));
                out.push_back(std::to_string(v - 1));
                out.push_back(std::to_string(v * 10));
            } else {
                double v = std::stod(value);
                auto render = [](double d) {
                    std::string s = std::to_string(d);
                    while (s.size() > 1 && s.back() == '0') s.pop_back();
                    if (!s.empty() && s.back() == '.') s.pop_back();
                    return s;
                };
                out.push_back(render(v + 1.0));
                out.push_back(render(v - 1.0));
                out.push_back(render(v * 10.0));
            }
        } catch (const std::exception&) {
        }
    }
    // dedupe while keeping order; drop unchanged and empty
    std::vector<std::string> unique;
    for (const auto& s : out) {
        if (s.empty() || s == value) continue;
        if (std::find(unique.begin(), unique.end(), s) == unique.end()) unique.push_back(s);
    }
    return unique;
}

bool value_in_domain(const std::string& raw, const std::string& type, const ValueDomain& domain) {
    bool numeric = false;
    double number = 0.0;
    if (type == "number" || type == "string") {
        try {
            std::size_t consumed = 0;
            number = std::stod(raw, &consumed);
            numeric = consumed == raw.size() && !raw.empty();
        } catch (const std::exception&) {
        }
    }
    for (const auto& v : domain.values) {
        if (v.is_numeric() && numeric) {
            if (v.as_double() == number) return true;
        } else if (v.kind == SqlValue::Kind::text && v.text_value == raw) {
            return true;
        }
    }
    return false;
}

std::vector<MutationFn> sites_value_error(const SqlAst& ast, const SchemaGraph& schema,
                                          const Db& db) {
    std::vector<MutationFn> out;
    for (const auto& ref : collect_schema_references(ast)) {
        if (ref.kind != RefKind::literal || !ref.predicate_context) continue;
        const PredicateContext& ctx = *ref.predicate_context;
        if (ctx.op != "=" && ctx.op != "IN") continue;
        if (ctx.clause != NodeKind::where_clause && ctx.clause != NodeKind::having) continue;
        if (ctx.table.empty()) continue;
        auto resolved = schema.resolve_column(ctx.table, ctx.column);
        if (!resolved) continue;

        ValueDomain domain;
        try {
            domain = lookup_values(schema, ctx.table, ctx.column, db);
        } catch (const std::exception&) {
            continue;
        }
        if (domain.truncated) continue;  // out-of-domain filter unsound

        const AstNode& lit = ast.node(ref.node_id);
        std::string type = lit.attr("type");
        std::string before = lit.attr("value");
        for (const auto& candidate : value_candidates(before, type)) {
            if (value_in_domain(candidate, type, domain)) continue;  // must leave the domain
            NodeId id = ref.node_id;
            std::string table = resolved->first;
            std::string column = resolved->second;
            std::string clause(node_kind_name(ctx.clause));
            std::string after = candidate;
            out.push_back([id, before, after, table, column, clause](SqlAst& work)
                              -> std::optional<std::vector<MutationRecord>> {
                work.set_attr(id, "value", after);
                return std::vector<MutationRecord>{{id, before, after, table, column, clause}};
            });
        }
    }
    return out;
}

void collect_conjuncts(const SqlAst& ast, NodeId id, std::vector<NodeId>& out) {
    const AstNode& n = ast.node(id);
    if (n.kind == NodeKind::logical_op && n.attr("op") == "AND") {
        for (NodeId kid : ast.children(id)) collect_conjuncts(ast, kid, out);
    } else {
        out.push_back(id);
    }
}

std::vector<MutationFn> sites_condition_missing(const SqlAst& ast, const SchemaGraph&) {
    std::vector<MutationFn> out;
    auto where = root_clause(ast, NodeKind::where_clause);
    if (!where) return out;
    const auto& kids = ast.children(*where);
    if (kids.empty()) return out;

    std::vector<NodeId> conjuncts;
    collect_conjuncts(ast, kids[0], conjuncts);

    if (conjuncts.size() >= 2) {
        for (NodeId conjunct : conjuncts) {
            std::string before = flatten_node(ast, conjunct);
            out.push_back([conjunct, before](SqlAst& work)
                              -> std::optional<std::vector<MutationRecord>> {
                auto parent = work.parent(conjunct);
                if (!parent) return std::nullopt;
                // replace the enclosing AND with the surviving sibling
                NodeId and_node = *parent;
                if (work.node(and_node).kind != NodeKind::logical_op) return std::nullopt;
                NodeId sibling = 0;
                bool found = false;
                for (NodeId kid : work.children(and_node)) {
                    if (kid != conjunct) {
                        sibling = kid;
                        found = true;
                    }
                }
                if (!found) return std::nullopt;
                auto grandparent = work.parent(and_node);
                if (!grandparent) return std::nullopt;
                std::size_t pos = child_index(work, and_node);
                work.move_node(sibling, *grandparent, pos);
                work.detach(and_node);
                return std::vector<MutationRecord>{
                    {conjunct, before, "", "", "", "where_clause"}};
            });
        }
    } else {
        NodeId where_id = *where;
        std::string before = flatten_node(ast, where_id);
        out.push_back([where_id, before](SqlAst& work)
                          -> std::optional<std::vector<MutationRecord>> {
            work.detach(where_id);
            return std::vector<MutationRecord>{{where_id, before, "", "", "", "where_clause"}};
        });
    }
    return out;
}

std::vector<MutationFn> sites_condition_error(const SqlAst& ast, const SchemaGraph&) {
    std::vector<MutationFn> out;
    static const std::map<std::string, std::string> flip = {
        {"=", "!="}, {"!=", "="}, {"<>", "="},       {"<", ">"},
        {">", "<"},  {"<=", ">="}, {">=", "<="},     {"LIKE", "NOT LIKE"},
        {"NOT LIKE", "LIKE"},
    };

    for (NodeKind clause_kind : {NodeKind::where_clause, NodeKind::having}) {
        auto clause = root_clause(ast, clause_kind);
        if (!clause) continue;
        std::string clause_name(node_kind_name(clause_kind));
        for (NodeId id : ast.preorder_from(*clause)) {
            const AstNode& n = ast.node(id);
            if (n.kind == NodeKind::comparison) {
                auto it = flip.find(n.attr("op"));
                if (it == flip.end()) continue;
                std::string before = n.attr("op");
                std::string after = it->second;
                out.push_back([id, before, after, clause_name](SqlAst& work)
                                  -> std::optional<std::vector<MutationRecord>> {
                    work.set_attr(id, "op", after);
                    return std::vector<MutationRecord>{{id, before, after, "", "", clause_name}};
                });
            } else if (n.kind == NodeKind::logical_op) {
                std::string op = n.attr("op");
                if (op != "AND" && op != "OR") continue;
                std::string after = op == "AND" ? "OR" : "AND";
                out.push_back([id, op, after, clause_name](SqlAst& work)
                                  -> std::optional<std::vector<MutationRecord>> {
                    work.set_attr(id, "op", after);
                    return std::vector<MutationRecord>{{id, op, after, "", "", clause_name}};
                });
            }
        }
    }
    return out;
}

std::vector<MutationFn> sites_function_error(const SqlAst& ast, const SchemaGraph&) {
    std::vector<MutationFn> out;
    static const std::map<std::string, std::string> swap = {
        {"MIN", "MAX"}, {"MAX", "MIN"}, {"SUM", "AVG"}, {"AVG", "SUM"}};

    for (NodeId id : ast.preorder()) {
        const AstNode& n = ast.node(id);
        if (n.kind != NodeKind::function_call || n.attr("infix") == "1") continue;
        std::string name = n.attr("name");
        std::string clause = clause_name_at(ast, id);
        auto it = swap.find(name);
        if (it != swap.end()) {
            std::string after = it->second;
            out.push_back([id, name, after, clause](SqlAst& work)
                              -> std::optional<std::vector<MutationRecord>> {
                work.set_attr(id, "name", after);
                return std::vector<MutationRecord>{{id, name, after, "", "", clause}};
            });
        } else if (name == "COUNT" && !ast.children(id).empty() &&
                   ast.node(ast.children(id)[0]).kind == NodeKind::column_ref) {
            out.push_back([id, name, clause](SqlAst& work)
                              -> std::optional<std::vector<MutationRecord>> {
                work.set_attr(id, "name", "SUM");
                return std::vector<MutationRecord>{{id, name, "SUM", "", "", clause}};
            });
        }
    }
    return out;
}

std::vector<MutationFn> sites_clause_error(const SqlAst& ast, const SchemaGraph&) {
    std::vector<MutationFn> out;
    auto group = root_clause(ast, NodeKind::group_by);
    if (!group) return out;
    auto select = root_clause(ast, NodeKind::select_clause);
    if (!select) return out;

    // only applicable when removal leaves the aggregate-with-bare-column
    // signature behind
    bool any_aggregate = false;
    bool any_bare = false;
    for (NodeId item : ast.children(*select)) {
        const AstNode& n = ast.node(item);
        if (n.kind == NodeKind::modifier) continue;
        bool aggregate = false;
        for (NodeId sub : ast.preorder_from(item)) {
            const AstNode& s = ast.node(sub);
            if (s.kind == NodeKind::function_call && s.attr("infix") != "1") {
                std::string name = s.attr("name");
                if (name == "COUNT" || name == "SUM" || name == "AVG" || name == "MIN" ||
                    name == "MAX" || name == "TOTAL" || name == "GROUP_CONCAT") {
                    aggregate = true;
                    break;
                }
            }
        }
        if (aggregate) {
            any_aggregate = true;
        } else if (n.kind == NodeKind::column_ref) {
            any_bare = true;
        }
    }
    if (!any_aggregate || !any_bare) return out;

    NodeId group_id = *group;
    auto having = root_clause(ast, NodeKind::having);
    std::string before = flatten_node(ast, group_id);
    std::optional<NodeId> having_id = having;
    std::string having_before = having ? flatten_node(ast, *having) : "";
    out.push_back([group_id, before, having_id, having_before](SqlAst& work)
                      -> std::optional<std::vector<MutationRecord>> {
        std::vector<MutationRecord> records;
        work.detach(group_id);
        records.push_back({group_id, before, "", "", "", "group_by"});
        if (having_id) {
            work.detach(*having_id);
            records.push_back({*having_id, having_before, "", "", "", "having"});
        }
        return records;
    });
    return out;
}

std::vector<MutationFn> sites_modifier_error(const SqlAst& ast, const SchemaGraph&) {
    std::vector<MutationFn> out;

    if (auto order = root_clause(ast, NodeKind::order_by)) {
        const auto& kids = ast.children(*order);
        for (std::size_t i = 0; i < kids.size(); ++i) {
            const AstNode& n = ast.node(kids[i]);
            if (n.kind == NodeKind::modifier) {
                std::string before = n.attr("keyword");
                std::string after = before == "DESC" ? "ASC" : "DESC";
                NodeId id = kids[i];
                out.push_back([id, before, after](SqlAst& work)
                                  -> std::optional<std::vector<MutationRecord>> {
                    work.set_attr(id, "keyword", after);
                    return std::vector<MutationRecord>{{id, before, after, "", "", "order_by"}};
                });
            } else {
                bool has_modifier =
                    i + 1 < kids.size() && ast.node(kids[i + 1]).kind == NodeKind::modifier;
                if (has_modifier) continue;
                NodeId order_id = *order;
                std::size_t pos = i + 1;
                out.push_back([order_id, pos](SqlAst& work)
                                  -> std::optional<std::vector<MutationRecord>> {
                    NodeId added = work.insert_node(NodeKind::modifier, order_id, pos,
                                                    {{"keyword", "DESC"}});
                    return std::vector<MutationRecord>{
                        {added, "ASC", "DESC", "", "", "order_by"}};
                });
            }
        }
    }

    if (auto select = root_clause(ast, NodeKind::select_clause)) {
        const auto& kids = ast.children(*select);
        bool has_distinct =
            !kids.empty() && ast.node(kids[0]).kind == NodeKind::modifier;
        NodeId select_id = *select;
        if (has_distinct) {
            NodeId mod = kids[0];
            out.push_back([mod](SqlAst& work) -> std::optional<std::vector<MutationRecord>> {
                work.detach(mod);
                return std::vector<MutationRecord>{
                    {mod, "DISTINCT", "", "", "", "select_clause"}};
            });
        } else {
            out.push_back([select_id](SqlAst& work) -> std::optional<std::vector<MutationRecord>> {
                NodeId added =
                    work.insert_node(NodeKind::modifier, select_id, 0, {{"keyword", "DISTINCT"}});
                return std::vector<MutationRecord>{
                    {added, "", "DISTINCT", "", "", "select_clause"}};
            });
        }
    }
    return out;
}

std::vector<MutationFn> enumerate_mutations(const SqlAst& ast, const SchemaGraph& schema,
                                            const Db& db, ErrorType label) {
    switch (label) {
        case ErrorType::attribute_mismatch: return sites_attribute_mismatch(ast, schema);
        case ErrorType::attribute_redundancy: return sites_attribute_redundancy(ast, schema);
        case ErrorType::attribute_missing: return sites_attribute_missing(ast, schema);
        case ErrorType::table_mismatch: return sites_table_mismatch(ast, schema);
        case ErrorType::table_redundancy: return sites_table_redundancy(ast, schema);
        case ErrorType::table_missing: return sites_table_missing(ast, schema);
        case ErrorType::value_error: return sites_value_error(ast, schema, db);
        case ErrorType::condition_missing: return sites_condition_missing(ast, schema);
        case ErrorType::condition_error: return sites_condition_error(ast, schema);
        case ErrorType::function_error: return sites_function_error(ast, schema);
        case ErrorType::clause_error: return sites_clause_error(ast, schema);
        case ErrorType::modifier_error: return sites_modifier_error(ast, schema);
    }
    return {};
}

bool has_top_level_order_by(const SqlAst& ast) {
    for (NodeId kid : ast.children(ast.root())) {
        if (ast.node(kid).kind == NodeKind::order_by) return true;
    }
    return false;
}

constexpr std::int64_t kPerturbExecTimeoutMs = 30000;

}  // namespace

PerturbationOutcome perturb(const SqlAst& ast, const SchemaGraph& schema, const Db& db,
                            ErrorType label, std::uint64_t seed) {
    if (!db.valid()) throw ExecutionError("database unreadable for perturbation verification");

    PerturbationOutcome outcome;
    std::string original_sql = flatten_ast(ast);
    ExecOutcome original = execute(original_sql, db, kPerturbExecTimeoutMs);
    if (original.status != ExecOutcome::Status::rows) return outcome;

    auto candidates = enumerate_mutations(ast, schema, db, label);
    if (candidates.empty()) return outcome;

    bool order_sensitive = has_top_level_order_by(ast);
    std::size_t start = splitmix64(seed) % candidates.size();

    for (std::size_t k = 0; k < candidates.size(); ++k) {
        std::size_t idx = (start + k) % candidates.size();
        SqlAst work = ast;
        auto records = candidates[idx](work);
        if (!records) continue;

        std::string mutated_sql = flatten_ast(work);
        SqlAst reparsed;
        try {
            reparsed = parse_sql(mutated_sql);
        } catch (const ParseError&) {
            continue;
        }
        ExecOutcome mutated = execute(mutated_sql, db, kPerturbExecTimeoutMs);
        if (mutated.status != ExecOutcome::Status::rows) continue;
        if (exec_equivalent(mutated, original, order_sensitive)) continue;

        outcome.status = PerturbationOutcome::Status::applied;
        outcome.perturbed_ast = std::move(reparsed);
        outcome.perturbed_sql = mutated_sql;
        outcome.injected_labels = ErrorLabelSet::of({label});
        outcome.mutation_log = std::move(*records);
        return outcome;
    }
    return outcome;
}

bool compatible_pair(ErrorType a, ErrorType b) {
    if (a == b) return false;
    auto family = [](ErrorType t) {
        switch (t) {
            case ErrorType::attribute_mismatch:
            case ErrorType::attribute_redundancy:
            case ErrorType::attribute_missing:
                return 1;
            case ErrorType::table_mismatch:
            case ErrorType::table_redundancy:
            case ErrorType::table_missing:
                return 2;
            default:
                return 0;
        }
    };
    if (family(a) != 0 && family(a) == family(b)) return false;
    auto is_condition = [](ErrorType t) {
        return t == ErrorType::condition_missing || t == ErrorType::condition_error;
    };
    if (is_condition(a) && is_condition(b)) return false;
    return true;
}

PerturbationOutcome compose(const SqlAst& ast, const SchemaGraph& schema, const Db& db,
                            std::pair<ErrorType, ErrorType> labels, std::uint64_t seed) {
    if (labels.first == labels.second) {
        throw std::invalid_argument("compose requires two distinct error types");
    }
    if (!compatible_pair(labels.first, labels.second)) {
        throw IncompatiblePair(error_type_name(labels.first), error_type_name(labels.second));
    }
    if (!db.valid()) throw ExecutionError("database unreadable for perturbation verification");

    PerturbationOutcome outcome;
    std::string original_sql = flatten_ast(ast);
    ExecOutcome original = execute(original_sql, db, kPerturbExecTimeoutMs);
    if (original.status != ExecOutcome::Status::rows) return outcome;

    bool order_sensitive = has_top_level_order_by(ast);

    auto first_candidates = enumerate_mutations(ast, schema, db, labels.first);
    if (first_candidates.empty()) return outcome;
    std::size_t start1 = splitmix64(seed) % first_candidates.size();

    constexpr std::size_t kMaxFirstTries = 8;
    constexpr std::size_t kMaxSecondTries = 6;

    for (std::size_t k1 = 0; k1 < std::min(first_candidates.size(), kMaxFirstTries); ++k1) {
        SqlAst stage1 = ast;
        auto records1 = first_candidates[(start1 + k1) % first_candidates.size()](stage1);
        if (!records1) continue;

        auto second_candidates = enumerate_mutations(stage1, schema, db, labels.second);
        if (second_candidates.empty()) continue;
        std::size_t start2 = splitmix64(seed ^ 0x5bf0'3635'dcf9'e1d3ULL) % second_candidates.size();

        for (std::size_t k2 = 0; k2 < std::min(second_candidates.size(), kMaxSecondTries); ++k2) {
            SqlAst stage2 = stage1;
            auto records2 = second_candidates[(start2 + k2) % second_candidates.size()](stage2);
            if (!records2) continue;

            std::string mutated_sql = flatten_ast(stage2);
            SqlAst reparsed;
            try {
                reparsed = parse_sql(mutated_sql);
            } catch (const ParseError&) {
                continue;
            }
            ExecOutcome mutated = execute(mutated_sql, db, kPerturbExecTimeoutMs);
            if (mutated.status != ExecOutcome::Status::rows) continue;
            if (exec_equivalent(mutated, original, order_sensitive)) continue;

            outcome.status = PerturbationOutcome::Status::applied;
            outcome.perturbed_ast = std::move(reparsed);
            outcome.perturbed_sql = mutated_sql;
            outcome.injected_labels = ErrorLabelSet::of({labels.first, labels.second});
            outcome.mutation_log = std::move(*records1);
            outcome.mutation_log.insert(outcome.mutation_log.end(), records2->begin(),
                                        records2->end());
            return outcome;
        }
    }
    return outcome;
}

}  // namespace sqlrefine
