#include "sqlrefine/schema_graph.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sqlrefine/errors.hpp"

namespace sqlrefine {

namespace {

std::string fold(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string quote_ident_sql(const std::string& name) {
    std::string out = "\"";
    for (char c : name) {
        out += c;
        if (c == '"') out += '"';
    }
    out += '"';
    return out;
}

}  // namespace

void SchemaGraph::add_table(TableInfo table) { tables_.push_back(std::move(table)); }
void SchemaGraph::add_column(ColumnInfo column) { columns_.push_back(std::move(column)); }
void SchemaGraph::add_edge(SchemaEdge edge) { edges_.push_back(std::move(edge)); }

std::optional<std::string> SchemaGraph::resolve_table(const std::string& name) const {
    std::string key = fold(name);
    for (const auto& t : tables_) {
        if (fold(t.name) == key) return t.name;
    }
    return std::nullopt;
}

std::optional<std::pair<std::string, std::string>> SchemaGraph::resolve_column(
    const std::string& table, const std::string& column) const {
    std::string tkey = fold(table);
    std::string ckey = fold(column);
    for (const auto& c : columns_) {
        if (fold(c.table) == tkey && fold(c.name) == ckey) return std::make_pair(c.table, c.name);
    }
    return std::nullopt;
}

std::vector<std::string> SchemaGraph::tables_with_column(const std::string& column) const {
    std::string ckey = fold(column);
    std::vector<std::string> out;
    for (const auto& c : columns_) {
        if (fold(c.name) == ckey) out.push_back(c.table);
    }
    return out;
}

std::vector<const ColumnInfo*> SchemaGraph::columns_of(const std::string& table) const {
    std::string tkey = fold(table);
    std::vector<const ColumnInfo*> out;
    for (const auto& c : columns_) {
        if (fold(c.table) == tkey) out.push_back(&c);
    }
    return out;
}

const ColumnInfo* SchemaGraph::find_column(const std::string& table,
                                           const std::string& column) const {
    std::string tkey = fold(table);
    std::string ckey = fold(column);
    for (const auto& c : columns_) {
        if (fold(c.table) == tkey && fold(c.name) == ckey) return &c;
    }
    return nullptr;
}

std::vector<std::pair<std::pair<std::string, std::string>, std::pair<std::string, std::string>>>
SchemaGraph::foreign_key_pairs() const {
    std::vector<std::pair<std::pair<std::string, std::string>, std::pair<std::string, std::string>>>
        out;
    std::set<std::string> seen;
    for (const auto& e : edges_) {
        if (e.kind != SchemaEdgeKind::foreign_key_to) continue;
        std::string fwd = e.from_table + "." + e.from_column + ">" + e.to_table + "." + e.to_column;
        std::string rev = e.to_table + "." + e.to_column + ">" + e.from_table + "." + e.from_column;
        if (seen.count(rev)) continue;  // reverse of an already-kept edge
        seen.insert(fwd);
        out.push_back({{e.from_table, e.from_column}, {e.to_table, e.to_column}});
    }
    return out;
}

SchemaGraph introspect_schema(const std::string& db_path, int example_values) {
    Db db = Db::open_readonly(db_path);
    SchemaGraph graph;

    std::vector<Row> table_rows;
    try {
        table_rows = db.query(
            "SELECT name FROM sqlite_master WHERE type='table' AND name NOT LIKE 'sqlite_%' "
            "ORDER BY name");
    } catch (const ExecutionError& e) {
        throw CorruptDatabase(std::string("cannot read schema: ") + e.what());
    }

    struct PendingFk {
        std::string from_table, from_column, to_table, to_column;
    };
    std::vector<PendingFk> fks;

    for (const auto& trow : table_rows) {
        std::string table = trow[0].text_value;
        graph.add_table(TableInfo{table, std::nullopt});

        auto cols = db.query("PRAGMA table_info(" + quote_ident_sql(table) + ")");
        for (const auto& crow : cols) {
            // (cid, name, type, notnull, dflt_value, pk)
            ColumnInfo col;
            col.table = table;
            col.name = crow[1].text_value;
            col.declared_type = crow[2].text_value;
            col.primary_key = crow[5].kind == SqlValue::Kind::integer && crow[5].int_value > 0;

            std::string quoted = quote_ident_sql(col.name);
            try {
                auto samples = db.query("SELECT DISTINCT " + quoted + " FROM " +
                                        quote_ident_sql(table) + " WHERE " + quoted +
                                        " IS NOT NULL ORDER BY " + quoted + " LIMIT " +
                                        std::to_string(example_values));
                for (const auto& srow : samples) col.example_values.push_back(srow[0].to_display());
            } catch (const ExecutionError&) {
                // virtual tables and the like; leave examples empty
            }

            graph.add_edge(SchemaEdge{SchemaEdgeKind::has_column, table, "", table, col.name});
            if (col.primary_key) {
                graph.add_edge(
                    SchemaEdge{SchemaEdgeKind::primary_key_of, table, col.name, table, ""});
            }
            graph.add_column(std::move(col));
        }

        auto fk_rows = db.query("PRAGMA foreign_key_list(" + quote_ident_sql(table) + ")");
        for (const auto& frow : fk_rows) {
            // (id, seq, table, from, to, on_update, on_delete, match)
            PendingFk fk;
            fk.from_table = table;
            fk.from_column = frow[3].text_value;
            fk.to_table = frow[2].text_value;
            fk.to_column = frow[4].kind == SqlValue::Kind::null ? "" : frow[4].text_value;
            fks.push_back(std::move(fk));
        }
    }

    for (auto& fk : fks) {
        if (fk.to_column.empty()) {
            // implicit reference to the target's primary key
            for (const auto* col : graph.columns_of(fk.to_table)) {
                if (col->primary_key) {
                    fk.to_column = col->name;
                    break;
                }
            }
        }
        if (fk.to_column.empty()) continue;
        graph.add_edge(SchemaEdge{SchemaEdgeKind::foreign_key_to, fk.from_table, fk.from_column,
                                  fk.to_table, fk.to_column});
        graph.add_edge(SchemaEdge{SchemaEdgeKind::foreign_key_to, fk.to_table, fk.to_column,
                                  fk.from_table, fk.from_column});
    }

    return graph;
}

ValueDomain lookup_values(const SchemaGraph& schema, const std::string& table,
                          const std::string& column, const Db& db, std::size_t limit) {
    auto resolved = schema.resolve_column(table, column);
    if (!resolved) throw UnknownColumn(table, column);

    std::string quoted = quote_ident_sql(resolved->second);
    std::string sql = "SELECT DISTINCT " + quoted + " FROM " + quote_ident_sql(resolved->first) +
                      " WHERE " + quoted + " IS NOT NULL ORDER BY " + quoted + " LIMIT " +
                      std::to_string(limit + 1);
    ValueDomain domain;
    auto rows = db.query(sql);
    for (const auto& row : rows) {
        if (domain.values.size() == limit) {
            domain.truncated = true;
            break;
        }
        domain.values.push_back(row[0]);
    }
    return domain;
}

double fuzzy_ratio(const std::string& a_raw, const std::string& b_raw) {
    std::string a = fold(a_raw);
    std::string b = fold(b_raw);
    if (a == b) return 1.0;
    if (a.empty() || b.empty()) return 0.0;
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
        }
        std::swap(prev, cur);
    }
    double dist = static_cast<double>(prev[b.size()]);
    double denom = static_cast<double>(std::max(a.size(), b.size()));
    return 1.0 - dist / denom;
}

std::vector<QuestionNode> question_tokens(const std::string& question) {
    std::vector<QuestionNode> out;
    std::size_t i = 0;
    auto is_word = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
    };
    while (i < question.size()) {
        if (!is_word(question[i])) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < question.size() && is_word(question[i])) ++i;
        out.push_back(QuestionNode{question.substr(start, i - start), start, i});
    }
    return out;
}

std::vector<LinkEdge> link_values(const std::string& question, const SchemaGraph& schema,
                                  const Db& db, double threshold, std::size_t max_span_tokens) {
    std::vector<LinkEdge> out;
    auto tokens = question_tokens(question);
    if (tokens.empty()) return out;

    struct SpanText {
        std::size_t node_index;  // index of first token
        std::string text;
    };
    std::vector<SpanText> spans;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        for (std::size_t n = 1; n <= max_span_tokens && i + n <= tokens.size(); ++n) {
            std::size_t begin = tokens[i].char_begin;
            std::size_t end = tokens[i + n - 1].char_end;
            spans.push_back(SpanText{i, question.substr(begin, end - begin)});
        }
    }

    for (const auto& col : schema.columns()) {
        ValueDomain domain;
        try {
            domain = lookup_values(schema, col.table, col.name, db);
        } catch (const ExecutionError&) {
            continue;
        }
        for (const auto& value : domain.values) {
            if (value.kind != SqlValue::Kind::text) continue;
            const std::string& cell = value.text_value;
            if (cell.size() < 3) continue;
            for (const auto& span : spans) {
                if (span.text.size() < 3) continue;
                if (fuzzy_ratio(span.text, cell) >= threshold) {
                    LinkEdge edge;
                    edge.kind = LinkKind::value_match;
                    edge.question_node = span.node_index;
                    edge.table = col.table;
                    edge.column = col.name;
                    edge.matched_value = cell;
                    if (std::find(out.begin(), out.end(), edge) == out.end()) {
                        out.push_back(std::move(edge));
                    }
                }
            }
        }
    }
    return out;
}

SchemaLinkingResult SchemaLinkingResult::from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    SchemaLinkingResult sl;
    for (const auto& t : j.value("tables", nlohmann::json::array())) {
        sl.tables.push_back(t.get<std::string>());
    }
    for (const auto& c : j.value("columns", nlohmann::json::array())) {
        sl.columns.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
    }
    for (const auto& s : j.value("spans", nlohmann::json::array())) {
        SpanAssignment span;
        span.span_text = s.value("text", "");
        for (const auto& t : s.value("tables", nlohmann::json::array())) {
            span.tables.push_back(t.get<std::string>());
        }
        for (const auto& c : s.value("columns", nlohmann::json::array())) {
            span.columns.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
        }
        sl.spans.push_back(std::move(span));
    }
    return sl;
}

std::string SchemaLinkingResult::to_json() const {
    nlohmann::ordered_json j;
    j["tables"] = tables;
    nlohmann::ordered_json cols = nlohmann::ordered_json::array();
    for (const auto& [t, c] : columns) cols.push_back({t, c});
    j["columns"] = std::move(cols);
    if (!spans.empty()) {
        nlohmann::ordered_json sp = nlohmann::ordered_json::array();
        for (const auto& s : spans) {
            nlohmann::ordered_json e;
            e["text"] = s.span_text;
            e["tables"] = s.tables;
            nlohmann::ordered_json scols = nlohmann::ordered_json::array();
            for (const auto& [t, c] : s.columns) scols.push_back({t, c});
            e["columns"] = std::move(scols);
            sp.push_back(std::move(e));
        }
        j["spans"] = std::move(sp);
    }
    return j.dump();
}

namespace {

// underscores fold to spaces so schema names can match question phrases
std::string name_as_phrase(const std::string& name) {
    std::string out = fold(name);
    std::replace(out.begin(), out.end(), '_', ' ');
    return out;
}

std::string strip_plural(const std::string& word) {
    if (word.size() > 3 && word.back() == 's') return word.substr(0, word.size() - 1);
    return word;
}

/// Finds the first question token span whose (plural-insensitive) text
/// matches the element name phrase. Returns the index of the first token.
std::optional<std::size_t> find_name_span(const std::vector<QuestionNode>& tokens,
                                          const std::string& name, std::size_t max_tokens = 4) {
    std::vector<std::string> name_words;
    {
        std::istringstream in(name_as_phrase(name));
        std::string w;
        while (in >> w) name_words.push_back(strip_plural(w));
    }
    if (name_words.empty()) return std::nullopt;
    for (std::size_t i = 0; i + name_words.size() <= tokens.size(); ++i) {
        if (name_words.size() > max_tokens) break;
        bool match = true;
        for (std::size_t k = 0; k < name_words.size(); ++k) {
            if (strip_plural(fold(tokens[i + k].text)) != name_words[k]) {
                match = false;
                break;
            }
        }
        if (match) return i;
    }
    return std::nullopt;
}

/// Word-subset partial match: every word of the name appears somewhere in
/// the question.
bool partial_name_match(const std::vector<QuestionNode>& tokens, const std::string& name) {
    std::set<std::string> bag;
    for (const auto& t : tokens) bag.insert(strip_plural(fold(t.text)));
    std::istringstream in(name_as_phrase(name));
    std::string w;
    bool any = false;
    while (in >> w) {
        any = true;
        if (!bag.count(strip_plural(w))) return false;
    }
    return any;
}

}  // namespace

SchemaGraph closure_subgraph(const SchemaGraph& schema, std::set<std::string> tables,
                             std::set<std::pair<std::string, std::string>> columns) {
    for (const auto& [t, c] : columns) tables.insert(t);
    // closure: primary keys of retained tables, foreign keys connecting two
    // retained tables
    for (const auto& col : schema.columns()) {
        if (col.primary_key && tables.count(col.table)) columns.insert({col.table, col.name});
    }
    for (const auto& fk : schema.foreign_key_pairs()) {
        if (tables.count(fk.first.first) && tables.count(fk.second.first)) {
            columns.insert(fk.first);
            columns.insert(fk.second);
        }
    }

    SchemaGraph out;
    for (const auto& t : schema.tables()) {
        if (tables.count(t.name)) out.add_table(t);
    }
    for (const auto& c : schema.columns()) {
        if (columns.count({c.table, c.name})) out.add_column(c);
    }
    for (const auto& e : schema.edges()) {
        bool keep = false;
        switch (e.kind) {
            case SchemaEdgeKind::has_column:
                keep = columns.count({e.to_table, e.to_column}) != 0;
                break;
            case SchemaEdgeKind::primary_key_of:
                keep = columns.count({e.from_table, e.from_column}) != 0;
                break;
            case SchemaEdgeKind::foreign_key_to:
                keep = columns.count({e.from_table, e.from_column}) != 0 &&
                       columns.count({e.to_table, e.to_column}) != 0;
                break;
        }
        if (keep) out.add_edge(e);
    }
    return out;
}

QuestionSchemaStructure build_qss(const std::string& question, const SchemaGraph& schema,
                                  const std::optional<SchemaLinkingResult>& sl,
                                  const std::vector<LinkEdge>& value_links) {
    QuestionSchemaStructure qss;
    qss.question = question;
    qss.question_nodes = question_tokens(question);
    // synthetic whole-question node anchors links with no textual span
    std::size_t whole_question_node = qss.question_nodes.size();
    qss.question_nodes.push_back(QuestionNode{question, 0, question.size()});

    auto anchor_for = [&](const std::string& name) {
        auto span = find_name_span(qss.question_nodes, name);
        return span.value_or(whole_question_node);
    };

    if (sl) {
        // resolve every referenced name up front
        std::set<std::string> retained_tables;
        std::set<std::pair<std::string, std::string>> retained_columns;
        for (const auto& t : sl->tables) {
            auto resolved = schema.resolve_table(t);
            if (!resolved) throw UnresolvedLinkTarget(t);
            retained_tables.insert(*resolved);
        }
        for (const auto& [t, c] : sl->columns) {
            auto resolved = schema.resolve_column(t, c);
            if (!resolved) throw UnresolvedLinkTarget(t + "." + c);
            retained_tables.insert(resolved->first);
            retained_columns.insert(*resolved);
        }
        qss.schema = closure_subgraph(schema, std::move(retained_tables),
                                      std::move(retained_columns));

        // link edges from the provided assignments
        if (!sl->spans.empty()) {
            for (const auto& span : sl->spans) {
                std::size_t node = whole_question_node;
                if (auto found = find_name_span(qss.question_nodes, span.span_text)) node = *found;
                for (const auto& t : span.tables) {
                    auto resolved = schema.resolve_table(t);
                    if (!resolved) throw UnresolvedLinkTarget(t);
                    qss.link_edges.push_back(LinkEdge{LinkKind::q_to_table, node, *resolved, "", ""});
                }
                for (const auto& [t, c] : span.columns) {
                    auto resolved = schema.resolve_column(t, c);
                    if (!resolved) throw UnresolvedLinkTarget(t + "." + c);
                    qss.link_edges.push_back(
                        LinkEdge{LinkKind::q_to_column, node, resolved->first, resolved->second, ""});
                }
            }
        } else {
            for (const auto& t : sl->tables) {
                std::string resolved = *schema.resolve_table(t);
                qss.link_edges.push_back(
                    LinkEdge{LinkKind::q_to_table, anchor_for(resolved), resolved, "", ""});
            }
            for (const auto& [t, c] : sl->columns) {
                auto resolved = *schema.resolve_column(t, c);
                qss.link_edges.push_back(LinkEdge{LinkKind::q_to_column, anchor_for(resolved.second),
                                                  resolved.first, resolved.second, ""});
            }
        }
    } else {
        // fallback: deterministic exact/partial name matching on the full schema
        qss.schema = schema;
        for (const auto& t : schema.tables()) {
            if (auto span = find_name_span(qss.question_nodes, t.name)) {
                qss.link_edges.push_back(LinkEdge{LinkKind::q_to_table, *span, t.name, "", ""});
            } else if (partial_name_match(qss.question_nodes, t.name)) {
                qss.link_edges.push_back(
                    LinkEdge{LinkKind::q_to_table, whole_question_node, t.name, "", ""});
            }
        }
        for (const auto& c : schema.columns()) {
            if (auto span = find_name_span(qss.question_nodes, c.name)) {
                qss.link_edges.push_back(
                    LinkEdge{LinkKind::q_to_column, *span, c.table, c.name, ""});
            } else if (partial_name_match(qss.question_nodes, c.name)) {
                qss.link_edges.push_back(
                    LinkEdge{LinkKind::q_to_column, whole_question_node, c.table, c.name, ""});
            }
        }
    }

    for (const auto& vl : value_links) {
        if (!qss.schema.find_column(vl.table, vl.column)) continue;  // pruned away
        qss.link_edges.push_back(vl);
    }
    return qss;
}

std::string serialize_mschema(const QuestionSchemaStructure& qss) {
    std::ostringstream out;
    out << "[db_schema]\n";
    for (const auto& t : qss.schema.tables()) {
        out << "table: " << t.name;
        if (t.description) out << " -- " << *t.description;
        out << "\n";
        for (const auto* col : qss.schema.columns_of(t.name)) {
            out << "  " << col->table << "." << col->name;
            if (!col->declared_type.empty()) out << " " << col->declared_type;
            if (col->primary_key) out << " primary_key";
            if (col->description) out << " -- " << *col->description;
            if (!col->example_values.empty()) {
                out << " examples: ";
                for (std::size_t i = 0; i < col->example_values.size(); ++i) {
                    if (i) out << ", ";
                    out << col->example_values[i];
                }
            }
            out << "\n";
        }
    }
    out << "[foreign_keys]\n";
    for (const auto& fk : qss.schema.foreign_key_pairs()) {
        out << fk.first.first << "." << fk.first.second << " -> " << fk.second.first << "."
            << fk.second.second << "\n";
    }
    out << "[links]\n";
    for (const auto& edge : qss.link_edges) {
        std::string span_text = edge.question_node < qss.question_nodes.size()
                                    ? qss.question_nodes[edge.question_node].text
                                    : "";
        switch (edge.kind) {
            case LinkKind::q_to_table:
                out << "q '" << span_text << "' -> table " << edge.table << "\n";
                break;
            case LinkKind::q_to_column:
                out << "q '" << span_text << "' -> column " << edge.table << "." << edge.column
                    << "\n";
                break;
            case LinkKind::value_match:
                out << "q '" << span_text << "' ~ " << edge.table << "." << edge.column << " = '"
                    << edge.matched_value << "'\n";
                break;
        }
    }
    return out.str();
}

}  // namespace sqlrefine
