#include "sqlrefine/refinement.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "sqlrefine/errors.hpp"
#include "sqlrefine/execution.hpp"

namespace sqlrefine {

namespace {

std::string trim(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string collapse_spaces(const std::string& s) {
    std::string out;
    bool in_space = false;
    for (char c : trim(s)) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out += ' ';
        in_space = false;
        out += c;
    }
    return out;
}

std::string strip_quotes(const std::string& s) {
    std::string t = trim(s);
    if (t.size() >= 2 && ((t.front() == '\'' && t.back() == '\'') ||
                          (t.front() == '"' && t.back() == '"'))) {
        return t.substr(1, t.size() - 2);
    }
    return t;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string current;
    for (char c : s) {
        if (c == sep) {
            if (!trim(current).empty()) out.push_back(trim(current));
            current.clear();
        } else {
            current += c;
        }
    }
    if (!trim(current).empty()) out.push_back(trim(current));
    return out;
}

/// Resolve a text snippet to AST nodes: exact token-span match first, then
/// the smallest node whose rendering contains the snippet.
std::vector<NodeId> resolve_node_snippet(const SqlAst& ast, const std::string& snippet_raw) {
    std::string snippet = collapse_spaces(snippet_raw);
    if (snippet.empty()) return {};
    std::string unquoted = strip_quotes(snippet);

    std::vector<NodeId> exact;
    for (NodeId id : ast.preorder()) {
        std::string span_text = collapse_spaces(ast.token_text(ast.node(id).span));
        std::string rendered = collapse_spaces(flatten_node(ast, id));
        if (span_text == snippet || rendered == snippet || span_text == unquoted ||
            rendered == unquoted || strip_quotes(rendered) == unquoted) {
            exact.push_back(id);
        }
    }
    if (!exact.empty()) {
        // keep innermost matches only
        std::vector<NodeId> out;
        for (NodeId id : exact) {
            bool has_descendant = false;
            for (NodeId other : exact) {
                if (other == id) continue;
                std::optional<NodeId> cur = ast.parent(other);
                while (cur) {
                    if (*cur == id) {
                        has_descendant = true;
                        break;
                    }
                    cur = ast.parent(*cur);
                }
                if (has_descendant) break;
            }
            if (!has_descendant) out.push_back(id);
        }
        return out;
    }

    // unique-substring fallback: smallest rendering that contains the snippet
    NodeId best = 0;
    std::size_t best_size = 0;
    bool found = false;
    for (NodeId id : ast.preorder()) {
        std::string rendered = collapse_spaces(flatten_node(ast, id));
        if (rendered.find(unquoted) == std::string::npos) continue;
        if (!found || rendered.size() < best_size) {
            best = id;
            best_size = rendered.size();
            found = true;
        }
    }
    if (found) return {best};
    return {};
}

struct LocalizationBlock {
    std::string error_name;
    std::map<std::string, std::string> values;
};

std::vector<LocalizationBlock> parse_localization_blocks(const std::string& text) {
    std::vector<LocalizationBlock> blocks;
    std::istringstream in(text);
    std::string line;
    LocalizationBlock current;
    bool open = false;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.rfind("[error:", 0) == 0) {
            if (open) blocks.push_back(std::move(current));
            current = LocalizationBlock{};
            auto close = t.find(']');
            current.error_name = trim(t.substr(7, close == std::string::npos ? std::string::npos
                                                                             : close - 7));
            open = true;
            continue;
        }
        if (t == "[end]") {
            if (open) blocks.push_back(std::move(current));
            current = LocalizationBlock{};
            open = false;
            continue;
        }
        if (!open) continue;
        auto colon = t.find(':');
        if (colon == std::string::npos) continue;
        std::string key = trim(t.substr(0, colon));
        std::string value = trim(t.substr(colon + 1));
        if (!key.empty()) current.values[key] = value;
    }
    if (open) blocks.push_back(std::move(current));
    return blocks;
}

constexpr const char* kLocalizerSystemPrompt =
    "You are a SQL error localizer. For every detected error type, answer with one block of "
    "the form:\n"
    "[error: <error_type_name>]\n"
    "nodes: <SQL text of the offending node(s), ';'-separated>\n"
    "schema: <involved table or table.column names, ','-separated>\n"
    "<slot>: <value>   (one line per guideline slot)\n"
    "[end]\n"
    "Fill every slot of the provided guideline templates. No prose outside the blocks.";

constexpr const char* kRefinerSystemPrompt =
    "You are a SQL refiner. Using the prioritized error contexts, produce the corrected SQL "
    "for the original query. Answer with the SQL statement only.";

}  // namespace

std::string localization_request(const DetectionInput& input, const ErrorLabelSet& labels) {
    const Taxonomy& tax = Taxonomy::instance();
    std::ostringstream out;
    out << input.serialized();
    out << "== detected_errors ==\n";
    for (ErrorType t : priority_sorted(labels.labels)) {
        out << tax.token_for(t).surface << " (" << error_type_name(t) << ")\n";
    }
    out << "== guideline_templates ==\n";
    for (ErrorType t : priority_sorted(labels.labels)) {
        out << tax.guideline(t).render_unfilled() << "\n";
    }
    return out.str();
}

Localization downgraded_localization(ErrorType type, const std::string& warning) {
    Localization loc;
    loc.error_type = type;
    loc.downgraded = true;
    loc.warning = warning;
    loc.guideline.error_type = type;
    for (const std::string& slot : Taxonomy::instance().guideline(type).slot_names()) {
        loc.guideline.values[slot] = "unknown";
    }
    return loc;
}

std::vector<Localization> localize(const DetectionInput& input, const ErrorLabelSet& final_labels,
                                   const SqlAst& ast, const SchemaGraph& full_schema,
                                   ChatBackend& backend, int max_retries) {
    if (final_labels.is_no_error() || final_labels.labels.empty()) {
        throw MalformedLocalization("localize called without detected errors");
    }
    const Taxonomy& tax = Taxonomy::instance();
    const std::string request = localization_request(input, final_labels);

    std::string last_problem;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        std::string raw = backend.complete(kLocalizerSystemPrompt, request);
        auto blocks = parse_localization_blocks(raw);

        std::vector<Localization> out;
        bool ok = true;
        for (ErrorType type : priority_sorted(final_labels.labels)) {
            const LocalizationBlock* block = nullptr;
            for (const auto& b : blocks) {
                if (b.error_name == error_type_name(type)) {
                    block = &b;
                    break;
                }
            }
            if (!block) {
                last_problem = "missing block for " + error_type_name(type);
                ok = false;
                break;
            }

            Localization loc;
            loc.error_type = type;
            loc.guideline.error_type = type;

            const GuidelineTemplate& tmpl = tax.guideline(type);
            bool slots_ok = true;
            for (const std::string& slot : tmpl.slot_names()) {
                auto it = block->values.find(slot);
                if (it == block->values.end()) {
                    last_problem = "unassigned slot '" + slot + "' for " + error_type_name(type);
                    slots_ok = false;
                    break;
                }
                loc.guideline.values[slot] = it->second;
            }
            if (!slots_ok) {
                ok = false;
                break;
            }

            auto nodes_it = block->values.find("nodes");
            std::string nodes_text = nodes_it == block->values.end() ? "" : nodes_it->second;
            for (const std::string& snippet : split_on(nodes_text, ';')) {
                auto resolved = resolve_node_snippet(ast, snippet);
                loc.error_nodes.insert(loc.error_nodes.end(), resolved.begin(), resolved.end());
            }
            if (loc.error_nodes.empty() && !trim(nodes_text).empty() &&
                trim(nodes_text) != "(removed)") {
                loc.downgraded = true;
                loc.warning = "node reference unresolvable; downgraded to whole-clause: " +
                              nodes_text;
            }

            auto schema_it = block->values.find("schema");
            std::string schema_text = schema_it == block->values.end() ? "" : schema_it->second;
            for (const std::string& element : split_on(schema_text, ',')) {
                auto dot = element.find('.');
                if (dot == std::string::npos) {
                    auto table = full_schema.resolve_table(trim(element));
                    if (table) {
                        loc.schema_elements.push_back({*table, ""});
                    } else {
                        loc.downgraded = true;
                        loc.warning += (loc.warning.empty() ? "" : "; ");
                        loc.warning += "unknown schema element: " + element;
                    }
                } else {
                    auto col = full_schema.resolve_column(trim(element.substr(0, dot)),
                                                          trim(element.substr(dot + 1)));
                    if (col) {
                        loc.schema_elements.push_back({col->first, col->second});
                    } else {
                        loc.downgraded = true;
                        loc.warning += (loc.warning.empty() ? "" : "; ");
                        loc.warning += "unknown schema element: " + element;
                    }
                }
            }
            out.push_back(std::move(loc));
        }
        if (ok) return out;
    }
    throw MalformedLocalization("localization response unusable after retries: " + last_problem);
}

void ExampleStore::add(ErrorType type, RefinementExample example) {
    store_[type].push_back(std::move(example));
}

std::vector<RefinementExample> ExampleStore::retrieve(ErrorType type, std::size_t k) const {
    std::vector<RefinementExample> out;
    auto it = store_.find(type);
    if (it == store_.end()) return out;
    for (std::size_t i = 0; i < it->second.size() && i < k; ++i) out.push_back(it->second[i]);
    return out;
}

RefinementEntry extract_context(const SqlAst& ast, const QuestionSchemaStructure& qss,
                                const Localization& loc, const ExampleStore& store,
                                std::size_t examples_k) {
    RefinementEntry entry;
    entry.error_type = loc.error_type;
    entry.guideline = loc.guideline;
    entry.examples = store.retrieve(loc.error_type, examples_k);

    if (loc.error_nodes.empty()) {
        // degenerate fallback: the whole statement
        entry.subtree.root = ast.root();
        entry.subtree.nodes = ast.preorder();
    } else {
        std::set<NodeId> ids(loc.error_nodes.begin(), loc.error_nodes.end());
        entry.subtree = minimal_enclosing_subtree(ast, ids);
    }
    entry.subtree_sql = flatten_fragment(ast, entry.subtree);

    std::set<std::string> tables;
    std::set<std::pair<std::string, std::string>> columns;
    for (const auto& element : loc.schema_elements) {
        if (element.column.empty()) {
            tables.insert(element.table);
        } else {
            columns.insert({element.table, element.column});
        }
    }
    entry.subgraph = closure_subgraph(qss.schema, tables, columns);
    for (const auto& edge : qss.link_edges) {
        if (edge.column.empty() ? entry.subgraph.resolve_table(edge.table).has_value()
                                : entry.subgraph.find_column(edge.table, edge.column) != nullptr) {
            entry.link_edges.push_back(edge);
        }
    }
    return entry;
}

RefineResult refine(const std::string& original_sql, std::vector<RefinementEntry> entries,
                    ChatBackend& backend, int max_retries, const std::string& question) {
    const Taxonomy& tax = Taxonomy::instance();
    // enforce priority order, ties by id
    std::sort(entries.begin(), entries.end(), [&](const RefinementEntry& a,
                                                  const RefinementEntry& b) {
        int pa = tax.priority(a.error_type);
        int pb = tax.priority(b.error_type);
        if (pa != pb) return pa < pb;
        return static_cast<int>(a.error_type) < static_cast<int>(b.error_type);
    });

    std::ostringstream user;
    if (!question.empty()) user << "== question ==\n" << question << "\n";
    user << "== original_sql ==\n" << original_sql << "\n";
    user << "== error_contexts (priority order) ==\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const RefinementEntry& e = entries[i];
        user << "[" << i + 1 << "] " << error_type_name(e.error_type) << "\n";
        user << "guideline:\n" << e.guideline.render(tax.guideline(e.error_type));
        user << "ast_subtree: " << e.subtree_sql << "\n";
        QuestionSchemaStructure wrapper;
        wrapper.schema = e.subgraph;
        wrapper.link_edges = e.link_edges;
        user << "schema_subgraph:\n" << serialize_mschema(wrapper);
        if (!e.examples.empty()) {
            user << "examples:\n";
            for (const auto& ex : e.examples) {
                user << "- wrong: " << ex.erroneous_sql << "\n  fixed: " << ex.corrected_sql
                     << "\n  note: " << ex.rationale << "\n";
            }
        }
    }
    user << "== instruction ==\nReturn the corrected SQL statement only.\n";
    const std::string request = user.str();

    RefineResult result;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        std::string raw = backend.complete(kRefinerSystemPrompt, request);
        ++result.backend_calls;

        std::string candidate = trim(raw);
        auto fence = candidate.find("```");
        if (fence != std::string::npos) {
            auto line_end = candidate.find('\n', fence);
            auto closing = candidate.rfind("```");
            if (line_end != std::string::npos && closing > line_end) {
                candidate = trim(candidate.substr(line_end + 1, closing - line_end - 1));
            }
        }
        try {
            parse_sql(candidate);
        } catch (const ParseError&) {
            continue;
        }
        result.sql = candidate;
        return result;
    }
    // never emit unparseable output: fall back to the input SQL
    result.sql = original_sql;
    result.failed = true;
    return result;
}

PipelineRecord run_pipeline(const PipelineSample& sample, const Db* db, const SchemaGraph& schema,
                            const PipelineBackends& backends, std::int64_t exec_timeout_ms) {
    PipelineRecord rec;
    rec.question_id = sample.question_id;
    rec.original_sql = sample.predicted_sql;
    rec.refined_sql = sample.predicted_sql;

    SqlAst ast;
    bool parsed = false;
    try {
        ast = parse_sql(sample.predicted_sql);
        parsed = true;
    } catch (const ParseError&) {
    }

    std::vector<LinkEdge> value_links;
    if (db && db->valid()) {
        try {
            value_links = link_values(sample.question, schema, *db);
        } catch (const std::exception&) {
        }
    }
    QuestionSchemaStructure qss;
    try {
        qss = build_qss(sample.question, schema, sample.schema_linking, value_links);
    } catch (const UnresolvedLinkTarget&) {
        qss = build_qss(sample.question, schema, std::nullopt, value_links);
    }

    DetectionSample det_sample{sample.question_id, sample.question, sample.predicted_sql};
    try {
        rec.detection = detect(det_sample, qss, parsed ? &ast : nullptr, db, *backends.detector,
                               exec_timeout_ms);
    } catch (const BackendError& e) {
        rec.status = std::string("detector_error: ") + e.what();
        return rec;
    } catch (const InvalidOutput& e) {
        rec.status = std::string("detector_invalid_output: ") + e.what();
        return rec;
    }

    if (rec.detection.final.is_no_error()) {
        rec.status = "no_error";
        return rec;  // refined stays byte-identical to the input
    }

    // error localization and analysis
    std::vector<Localization> locs;
    if (parsed) {
        try {
            locs = localize(rec.detection.input, rec.detection.final, ast, schema,
                            *backends.localizer);
        } catch (const BackendError& e) {
            rec.status = std::string("localizer_error: ") + e.what();
        } catch (const MalformedLocalization& e) {
            rec.status = std::string("localization_downgraded: ") + e.what();
        }
    }
    if (locs.empty()) {
        for (ErrorType t : priority_sorted(rec.detection.final.labels)) {
            locs.push_back(downgraded_localization(
                t, parsed ? "localization unavailable" : "predicted SQL did not parse"));
        }
    }
    rec.localizations = locs;

    std::vector<RefinementEntry> entries;
    for (const auto& loc : locs) {
        if (parsed) {
            entries.push_back(extract_context(ast, qss, loc, ExampleStore::builtin()));
        } else {
            RefinementEntry entry;
            entry.error_type = loc.error_type;
            entry.guideline = loc.guideline;
            entry.subtree_sql = sample.predicted_sql;
            entry.subgraph = qss.schema;
            entry.examples = ExampleStore::builtin().retrieve(loc.error_type);
            entries.push_back(std::move(entry));
        }
    }

    try {
        RefineResult refined = refine(sample.predicted_sql, std::move(entries),
                                      *backends.refiner, 2, sample.question);
        rec.refiner_calls = refined.backend_calls;
        rec.refined_sql = refined.sql;
        if (refined.failed) {
            rec.status = rec.status.empty() ? "refinement_failed" : rec.status +
                                                                         "; refinement_failed";
        } else if (rec.status.empty()) {
            rec.status = "ok";
        }
    } catch (const BackendError& e) {
        rec.refined_sql = sample.predicted_sql;
        rec.status = std::string("refiner_error: ") + e.what();
    }
    return rec;
}

}  // namespace sqlrefine
