#include "sqlrefine/detection.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_set>

#include "sqlrefine/errors.hpp"

namespace sqlrefine {

namespace {

std::string fold(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool is_aggregate_name(const std::string& name) {
    static const std::unordered_set<std::string> aggregates = {
        "COUNT", "SUM", "AVG", "MIN", "MAX", "TOTAL", "GROUP_CONCAT"};
    return aggregates.count(name) != 0;
}

bool subtree_has_aggregate(const SqlAst& ast, NodeId id) {
    for (NodeId n : ast.preorder_from(id)) {
        const AstNode& node = ast.node(n);
        if (node.kind == NodeKind::subquery && n != id) break;  // stay in scope
        if (node.kind == NodeKind::function_call && node.attr("infix") != "1" &&
            is_aggregate_name(node.attr("name"))) {
            return true;
        }
    }
    return false;
}

bool subtree_has_bare_column(const SqlAst& ast, NodeId id) {
    const AstNode& node = ast.node(id);
    if (node.kind == NodeKind::column_ref) return true;
    if (node.kind == NodeKind::function_call && node.attr("infix") != "1" &&
        is_aggregate_name(node.attr("name"))) {
        return false;  // columns under an aggregate do not count
    }
    if (node.kind == NodeKind::subquery) return false;
    for (NodeId kid : ast.children(id)) {
        if (subtree_has_bare_column(ast, kid)) return true;
    }
    return false;
}

/// Alias -> table map scoped to one subquery: its own FROM items plus every
/// enclosing subquery's (correlated references).
std::map<std::string, std::string> scope_tables(const SqlAst& ast, NodeId at) {
    std::map<std::string, std::string> out;
    // walk up collecting enclosing subquery nodes
    std::vector<NodeId> scopes;
    std::optional<NodeId> cur = at;
    while (cur) {
        if (ast.node(*cur).kind == NodeKind::subquery) scopes.push_back(*cur);
        cur = ast.parent(*cur);
    }
    for (NodeId scope : scopes) {
        for (NodeId kid : ast.children(scope)) {
            if (ast.node(kid).kind != NodeKind::from_item) continue;
            for (NodeId n : ast.preorder_from(kid)) {
                const AstNode& node = ast.node(n);
                if (node.kind != NodeKind::table_ref) continue;
                out.emplace(fold(node.attr("table")), node.attr("table"));
                if (node.has_attr("alias")) out.emplace(fold(node.attr("alias")), node.attr("table"));
            }
        }
    }
    return out;
}

bool literal_matches_domain(const AstNode& literal, const ValueDomain& domain) {
    const std::string& raw = literal.attr("value");
    const std::string type = literal.attr("type");
    if (type == "null") return true;  // not assertable

    bool literal_numeric = false;
    double literal_number = 0.0;
    try {
        std::size_t consumed = 0;
        literal_number = std::stod(raw, &consumed);
        literal_numeric = consumed == raw.size() && !raw.empty();
    } catch (const std::exception&) {
        literal_numeric = false;
    }

    for (const auto& value : domain.values) {
        if (value.is_numeric() && literal_numeric) {
            if (std::fabs(value.as_double() - literal_number) < 1e-9) return true;
        } else if (value.kind == SqlValue::Kind::text) {
            if (value.text_value == raw) return true;
        }
    }
    return false;
}

}  // namespace

std::string error_type_instructions() {
    const Taxonomy& tax = Taxonomy::instance();
    std::ostringstream out;
    out << "Error taxonomy (token -> type: definition):\n";
    for (const auto& info : tax.all()) {
        out << "[ERR]_" << info.id << " -> " << info.name << ": " << info.description << "\n";
    }
    out << tax.token_for(std::nullopt).surface << " -> no_error: the SQL is correct.\n";
    return out.str();
}

std::string render_exec_feedback(const ExecOutcome& outcome, std::size_t max_rows) {
    std::ostringstream out;
    switch (outcome.status) {
        case ExecOutcome::Status::error:
            out << "error: " << outcome.error_message;
            return out.str();
        case ExecOutcome::Status::timeout:
            out << "timeout";
            return out.str();
        case ExecOutcome::Status::rows:
            break;
    }
    out << "rows: " << outcome.rows.size();
    std::size_t shown = std::min(max_rows, outcome.rows.size());
    for (std::size_t i = 0; i < shown; ++i) {
        out << "\n(";
        for (std::size_t c = 0; c < outcome.rows[i].size(); ++c) {
            if (c) out << ", ";
            out << outcome.rows[i][c].to_display();
        }
        out << ")";
    }
    if (outcome.rows.size() > shown) out << "\n... (" << outcome.rows.size() - shown << " more)";
    return out.str();
}

ErrorLabelSet static_detect(const SqlAst* ast, const QuestionSchemaStructure& qss, const Db* db,
                            const ExecOutcome& exec_feedback) {
    ErrorLabelSet result;

    // execution-failure mapping; also covers unparseable predictions
    if (exec_feedback.status == ExecOutcome::Status::error) {
        std::string msg = fold(exec_feedback.error_message);
        if (msg.find("no such table") != std::string::npos) {
            result.labels.insert(ErrorType::table_mismatch);
        } else if (msg.find("no such column") != std::string::npos) {
            result.labels.insert(ErrorType::attribute_mismatch);
        } else {
            result.labels.insert(ErrorType::clause_error);
        }
    }
    if (!ast) {
        if (result.labels.empty()) result.labels.insert(ErrorType::clause_error);
        return result;
    }

    const SchemaGraph& schema = qss.schema;

    for (NodeId id : ast->preorder()) {
        const AstNode& node = ast->node(id);

        if (node.kind == NodeKind::table_ref) {
            if (!schema.resolve_table(node.attr("table"))) {
                result.labels.insert(ErrorType::table_mismatch);
            }
        }

        if (node.kind == NodeKind::column_ref) {
            auto tables = scope_tables(*ast, id);
            std::string qualifier = node.attr("table");
            const std::string column = node.attr("column");
            if (!qualifier.empty()) {
                auto it = tables.find(fold(qualifier));
                std::string table = it != tables.end() ? it->second : qualifier;
                if (schema.resolve_table(table)) {
                    if (!schema.resolve_column(table, column)) {
                        result.labels.insert(ErrorType::attribute_mismatch);
                    }
                }
                // unresolved table already reported as table_mismatch
            } else {
                bool any_table_known = false;
                bool found = false;
                std::unordered_set<std::string> seen;
                for (const auto& [alias, table] : tables) {
                    if (!seen.insert(fold(table)).second) continue;
                    if (!schema.resolve_table(table)) continue;
                    any_table_known = true;
                    if (schema.resolve_column(table, column)) {
                        found = true;
                        break;
                    }
                }
                if (any_table_known && !found) {
                    result.labels.insert(ErrorType::attribute_mismatch);
                }
            }
        }

        // duplicate FROM items within one subquery scope
        if (node.kind == NodeKind::from_item) {
            std::map<std::string, int> counts;
            for (NodeId n : ast->preorder_from(id)) {
                const AstNode& inner = ast->node(n);
                if (inner.kind == NodeKind::subquery) continue;
                if (inner.kind == NodeKind::table_ref) counts[fold(inner.attr("table"))] += 1;
            }
            for (const auto& [table, count] : counts) {
                if (count >= 2) {
                    result.labels.insert(ErrorType::table_redundancy);
                    break;
                }
            }
        }

        // aggregate alongside a bare column without GROUP BY; HAVING without
        // GROUP BY
        if (node.kind == NodeKind::subquery) {
            NodeId select = 0;
            bool has_select = false, has_group = false, has_having = false;
            for (NodeId kid : ast->children(id)) {
                NodeKind kk = ast->node(kid).kind;
                if (kk == NodeKind::select_clause) {
                    select = kid;
                    has_select = true;
                }
                if (kk == NodeKind::group_by) has_group = true;
                if (kk == NodeKind::having) has_having = true;
            }
            if (has_having && !has_group) result.labels.insert(ErrorType::clause_error);
            if (has_select && !has_group) {
                bool any_aggregate = false;
                bool any_bare = false;
                for (NodeId item : ast->children(select)) {
                    if (ast->node(item).kind == NodeKind::modifier) continue;
                    if (subtree_has_aggregate(*ast, item)) {
                        any_aggregate = true;
                    } else if (subtree_has_bare_column(*ast, item)) {
                        any_bare = true;
                    }
                }
                if (any_aggregate && any_bare) result.labels.insert(ErrorType::clause_error);
            }
        }
    }

    // value domain rule: literals under '='/IN comparisons in WHERE/HAVING
    if (db && db->valid()) {
        for (const auto& ref : collect_schema_references(*ast)) {
            if (ref.kind != RefKind::literal || !ref.predicate_context) continue;
            const PredicateContext& ctx = *ref.predicate_context;
            if (ctx.op != "=" && ctx.op != "IN") continue;
            if (ctx.clause != NodeKind::where_clause && ctx.clause != NodeKind::having) continue;
            if (ctx.table.empty()) continue;
            if (!schema.resolve_column(ctx.table, ctx.column)) continue;
            ValueDomain domain;
            try {
                domain = lookup_values(schema, ctx.table, ctx.column, *db);
            } catch (const std::exception&) {
                continue;  // unreadable database: non-assertable
            }
            if (domain.truncated) continue;
            if (!literal_matches_domain(ast->node(ref.node_id), domain)) {
                result.labels.insert(ErrorType::value_error);
            }
        }
    }

    return result;
}

std::string DetectionInput::serialized() const {
    std::ostringstream out;
    out << "== error_type_definitions ==\n" << instructions;
    out << "== question ==\n" << question << "\n";
    out << "== question_schema_structure ==\n" << qss_serialized;
    out << "== predicted_sql ==\n" << sql_text << "\n";
    out << "== ast ==\n" << ast_rendered;
    out << "== execution_feedback ==\n" << exec_rendered << "\n";
    out << "== rule_detection ==\n" << rule_rendered << "\n";
    return out.str();
}

DetectionInput build_detection_input(const DetectionSample& sample,
                                     const QuestionSchemaStructure& qss, const SqlAst* ast,
                                     const ExecOutcome& exec_feedback,
                                     const ErrorLabelSet& rule_set) {
    DetectionInput input;
    input.instructions = error_type_instructions();
    input.question = sample.question;
    input.qss_serialized = serialize_mschema(qss);
    input.sql_text = sample.predicted_sql;
    input.ast_rendered = ast ? render_ast_tree(*ast) : "ast/1\n(unparseable)\n";
    input.exec_rendered = render_exec_feedback(exec_feedback);
    if (rule_set.labels.empty()) {
        input.rule_rendered = "none";
    } else {
        const Taxonomy& tax = Taxonomy::instance();
        std::string rendered;
        for (ErrorType t : priority_sorted(rule_set.labels)) {
            if (!rendered.empty()) rendered += ' ';
            rendered += tax.token_for(t).surface + " (" + error_type_name(t) + ")";
        }
        input.rule_rendered = rendered;
    }
    return input;
}

namespace {

std::vector<std::string> whitespace_split(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

constexpr const char* kDetectorSystemPrompt =
    "You are a SQL error detector. Examine the structured input and answer with error "
    "tokens only: one token per detected error type, or the null token when the SQL is "
    "correct. Never answer with natural language.";

}  // namespace

std::pair<ErrorLabelSet, std::vector<std::string>> semantic_detect(const DetectionInput& input,
                                                                   ChatBackend& backend,
                                                                   int max_retries) {
    const Taxonomy& tax = Taxonomy::instance();
    std::vector<std::string> allowed = valid_token_surfaces();
    const std::string serialized = input.serialized();

    std::string raw;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        raw = backend.complete(kDetectorSystemPrompt, serialized,
                               backend.supports_constrained_decoding() ? &allowed : nullptr);
        std::vector<std::string> tokens = whitespace_split(raw);
        if (tokens.empty()) continue;

        bool valid = true;
        bool saw_null = false;
        ErrorLabelSet labels;
        for (const std::string& tok : tokens) {
            try {
                auto label = tax.label_for(tok);
                if (!label) {
                    saw_null = true;
                } else {
                    labels.labels.insert(*label);
                }
            } catch (const std::exception&) {
                valid = false;
                break;
            }
        }
        if (!valid) continue;
        if (saw_null) {
            // the null token anywhere forces the empty set
            return {ErrorLabelSet{}, tokens};
        }
        return {labels, tokens};
    }
    throw InvalidOutput(raw);
}

ErrorLabelSet aggregate_detection(const ErrorLabelSet& rule_set, const ErrorLabelSet& llm_set) {
    ErrorLabelSet final_set;
    final_set.labels = rule_set.labels;
    final_set.labels.insert(llm_set.labels.begin(), llm_set.labels.end());
    if (final_set.labels.empty()) final_set.no_error = true;
    return final_set;
}

DetectionResult detect(const DetectionSample& sample, const QuestionSchemaStructure& qss,
                       const SqlAst* ast, const Db* db, ChatBackend& backend,
                       std::int64_t exec_timeout_ms) {
    DetectionResult result;

    ExecOutcome feedback;
    if (db && db->valid()) {
        feedback = execute(sample.predicted_sql, *db, exec_timeout_ms);
    } else {
        feedback.status = ExecOutcome::Status::error;
        feedback.error_message = "database unavailable";
    }

    result.rule_set = static_detect(ast, qss, db, feedback);
    result.input = build_detection_input(sample, qss, ast, feedback, result.rule_set);

    auto [llm_set, raw_tokens] = semantic_detect(result.input, backend);
    result.llm_set = llm_set;
    result.raw_token_sequence = raw_tokens;
    result.final = aggregate_detection(result.rule_set, result.llm_set);
    return result;
}

}  // namespace sqlrefine
