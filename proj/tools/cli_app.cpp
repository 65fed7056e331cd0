#include "cli_app.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sqlrefine/detection.hpp"
#include "sqlrefine/errors.hpp"
#include "sqlrefine/execution.hpp"
#include "sqlrefine/parser.hpp"
#include "sqlrefine/refinement.hpp"

namespace sqlrefine::cli {

namespace fs = std::filesystem;

namespace {

nlohmann::ordered_json labels_to_json(const ErrorLabelSet& labels) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    if (labels.is_no_error()) {
        out.push_back("no_error");
        return out;
    }
    for (ErrorType t : priority_sorted(labels.labels)) out.push_back(error_type_name(t));
    return out;
}

ErrorLabelSet labels_from_json(const nlohmann::json& j) {
    ErrorLabelSet out;
    const Taxonomy& tax = Taxonomy::instance();
    for (const auto& entry : j) {
        std::string name = entry.get<std::string>();
        if (name == "no_error") {
            out.no_error = true;
            continue;
        }
        if (auto type = tax.by_name(name)) out.labels.insert(*type);
    }
    if (!out.labels.empty()) out.no_error = false;
    return out;
}

BackendSection backend_section_from_json(const nlohmann::json& j) {
    BackendSection section;
    if (j.is_null()) return section;
    section.type = j.value("type", "none");
    if (section.type == "http") {
        section.http.base_url = j.value("base_url", "");
        section.http.model_name = j.value("model", j.value("model_name", ""));
        section.http.api_key_env = j.value("api_key_env", "");
        section.http.timeout_seconds = j.value("timeout_seconds", 30.0);
        section.http.max_retries = j.value("max_retries", 2);
        section.http.retry_backoff_ms = j.value("retry_backoff_ms", 250);
        section.http.constrained_decoding = j.value("constrained_decoding", false);
        section.http.sampling.temperature = j.value("temperature", 0.0);
        section.http.sampling.max_output_tokens = j.value("max_output_tokens", 1024);
    } else if (section.type == "fixed") {
        section.fixed_response = j.value("response", "");
        for (const auto& rule : j.value("rules", nlohmann::json::array())) {
            section.fixed_rules.emplace_back(rule.value("needle", ""), rule.value("response", ""));
        }
    }
    return section;
}

nlohmann::ordered_json backend_section_to_json(const BackendSection& s) {
    nlohmann::ordered_json j;
    j["type"] = s.type;
    if (s.type == "http") {
        j["base_url"] = s.http.base_url;
        j["model"] = s.http.model_name;
        j["api_key_env"] = s.http.api_key_env;
        j["timeout_seconds"] = s.http.timeout_seconds;
        j["max_retries"] = s.http.max_retries;
        j["retry_backoff_ms"] = s.http.retry_backoff_ms;
        j["constrained_decoding"] = s.http.constrained_decoding;
        j["temperature"] = s.http.sampling.temperature;
        j["max_output_tokens"] = s.http.sampling.max_output_tokens;
    } else if (s.type == "fixed") {
        j["response"] = s.fixed_response;
        nlohmann::ordered_json rules = nlohmann::ordered_json::array();
        for (const auto& [needle, response] : s.fixed_rules) {
            rules.push_back({{"needle", needle}, {"response", response}});
        }
        j["rules"] = std::move(rules);
    }
    return j;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << content;
}

}  // namespace

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError("bad config JSON in " + path + ": " + e.what());
    }
    RunConfig config;
    config.corpus = j.value("corpus", "");
    config.db_root = j.value("db_root", "");
    config.out_dir = j.value("out_dir", "out");
    config.seed = j.value("seed", 0ULL);
    config.jobs = j.value("jobs", 1);
    config.order_sensitive = j.value("order_sensitive", false);
    config.exec_timeout_ms = j.value("exec_timeout_ms", 30000);
    if (j.contains("backends")) {
        const auto& b = j["backends"];
        if (b.contains("detector")) config.detector = backend_section_from_json(b["detector"]);
        if (b.contains("localizer")) config.localizer = backend_section_from_json(b["localizer"]);
        if (b.contains("refiner")) config.refiner = backend_section_from_json(b["refiner"]);
        if (b.contains("assistant")) config.assistant = backend_section_from_json(b["assistant"]);
    }
    if (j.contains("synthesis")) {
        const auto& s = j["synthesis"];
        config.synthesis.target_correct_ratio = s.value("target_correct_ratio", 0.49);
        config.synthesis.ratio_tolerance = s.value("ratio_tolerance", 0.02);
        config.synthesis.per_label_minimum = s.value("per_label_minimum", 1);
        config.synthesis.compound_fraction = s.value("compound_fraction", 0.53);
        if (s.contains("targets")) {
            const auto& t = s["targets"];
            config.synthesis.targets.no_error = t.value("no_error", 0.490);
            config.synthesis.targets.rule_single = t.value("rule_single", 0.116);
            config.synthesis.targets.rule_compound = t.value("rule_compound", 0.129);
            config.synthesis.targets.llm = t.value("llm", 0.265);
        }
    }
    config.synthesis.seed = config.seed;
    config.synthesis.exec_timeout_ms = config.exec_timeout_ms;
    return config;
}

std::string RunConfig::to_json() const {
    nlohmann::ordered_json j;
    j["corpus"] = corpus;
    j["db_root"] = db_root;
    j["out_dir"] = out_dir;
    j["seed"] = seed;
    j["jobs"] = jobs;
    j["order_sensitive"] = order_sensitive;
    j["exec_timeout_ms"] = exec_timeout_ms;
    j["backends"] = {
        {"detector", backend_section_to_json(detector)},
        {"localizer", backend_section_to_json(localizer)},
        {"refiner", backend_section_to_json(refiner)},
        {"assistant", backend_section_to_json(assistant)},
    };
    j["synthesis"] = {
        {"target_correct_ratio", synthesis.target_correct_ratio},
        {"ratio_tolerance", synthesis.ratio_tolerance},
        {"per_label_minimum", synthesis.per_label_minimum},
        {"compound_fraction", synthesis.compound_fraction},
        {"targets",
         {{"no_error", synthesis.targets.no_error},
          {"rule_single", synthesis.targets.rule_single},
          {"rule_compound", synthesis.targets.rule_compound},
          {"llm", synthesis.targets.llm}}},
    };
    return j.dump(2) + "\n";
}

std::vector<RunRow> load_run_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path);
    std::vector<RunRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw IoError(path + ":" + std::to_string(line_no) + ": bad JSON: " + e.what());
        }
        RunRow row;
        row.question_id = j.value("question_id", "");
        row.db_id = j.value("db_id", "");
        row.question = j.value("question", "");
        row.gold_sql = j.value("gold_sql", "");
        row.predicted_sql = j.value("predicted_sql", j.value("sql", ""));
        if (j.contains("labels")) row.labels = labels_from_json(j["labels"]);
        if (j.contains("gold_labels")) row.gold_labels = labels_from_json(j["gold_labels"]);
        for (const auto& m : j.value("mutation_log", nlohmann::json::array())) {
            MutationRecord rec;
            rec.before = m.value("before", "");
            rec.after = m.value("after", "");
            rec.table = m.value("table", "");
            rec.column = m.value("column", "");
            rec.clause = m.value("clause", "");
            row.mutation_log.push_back(std::move(rec));
        }
        if (j.contains("schema_linking") && !j["schema_linking"].is_null()) {
            row.schema_linking = SchemaLinkingResult::from_json(j["schema_linking"].dump());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string run_corpus_to_jsonl(const std::vector<RunRow>& rows) {
    std::ostringstream out;
    for (const auto& row : rows) {
        nlohmann::ordered_json j;
        j["question_id"] = row.question_id;
        j["db_id"] = row.db_id;
        j["question"] = row.question;
        j["gold_sql"] = row.gold_sql;
        j["predicted_sql"] = row.predicted_sql;
        if (row.labels) j["labels"] = labels_to_json(*row.labels);
        if (row.gold_labels) j["gold_labels"] = labels_to_json(*row.gold_labels);
        if (!row.mutation_log.empty()) {
            nlohmann::ordered_json log = nlohmann::ordered_json::array();
            for (const auto& m : row.mutation_log) {
                log.push_back({{"before", m.before},
                               {"after", m.after},
                               {"table", m.table},
                               {"column", m.column},
                               {"clause", m.clause}});
            }
            j["mutation_log"] = std::move(log);
        }
        if (row.schema_linking) {
            j["schema_linking"] = nlohmann::ordered_json::parse(row.schema_linking->to_json());
        }
        out << j.dump() << "\n";
    }
    return out.str();
}

int cmd_introspect(const std::string& db_path, bool as_json, std::ostream& out,
                   std::ostream& err) {
    SchemaGraph graph;
    try {
        graph = introspect_schema(db_path);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CorruptDatabase& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    if (as_json) {
        nlohmann::ordered_json j;
        nlohmann::ordered_json tables = nlohmann::ordered_json::array();
        for (const auto& t : graph.tables()) tables.push_back(t.name);
        j["tables"] = std::move(tables);
        nlohmann::ordered_json columns = nlohmann::ordered_json::array();
        for (const auto& c : graph.columns()) {
            columns.push_back({{"table", c.table},
                               {"name", c.name},
                               {"type", c.declared_type},
                               {"primary_key", c.primary_key},
                               {"examples", c.example_values}});
        }
        j["columns"] = std::move(columns);
        nlohmann::ordered_json fks = nlohmann::ordered_json::array();
        for (const auto& fk : graph.foreign_key_pairs()) {
            fks.push_back({{"from", fk.first.first + "." + fk.first.second},
                           {"to", fk.second.first + "." + fk.second.second}});
        }
        j["foreign_keys"] = std::move(fks);
        out << j.dump(2) << "\n";
    } else {
        QuestionSchemaStructure wrapper;
        wrapper.schema = graph;
        out << serialize_mschema(wrapper);
    }
    return kExitOk;
}

int cmd_taxonomy_export(const std::optional<std::string>& out_file, std::ostream& out,
                        std::ostream& err) {
    std::string exported = Taxonomy::instance().export_json();
    if (out_file) {
        try {
            write_file(*out_file, exported);
        } catch (const IoError& e) {
            err << "error: " << e.what() << "\n";
            return kExitConfig;
        }
    } else {
        out << exported;
    }
    return kExitOk;
}

namespace {

BackendPtr build_backend(const BackendSection& section, const OracleBackends* oracle,
                         const std::string& role) {
    if (section.type == "none") return nullptr;
    if (section.type == "http") return std::make_shared<HttpChatBackend>(section.http);
    if (section.type == "failing") return std::make_shared<FailingBackend>();
    if (section.type == "fixed") {
        auto mock = std::make_shared<FixedResponder>(section.fixed_response);
        for (const auto& [needle, response] : section.fixed_rules) {
            mock->add_rule(needle, response);
        }
        return mock;
    }
    if (section.type == "oracle") {
        if (!oracle) throw IoError("oracle backend requested but the corpus carries no labels");
        if (role == "detector") return oracle->detector;
        if (role == "localizer") return oracle->localizer;
        if (role == "refiner") return oracle->refiner;
        throw IoError("oracle backend unsupported for role " + role);
    }
    throw IoError("unknown backend type: " + section.type);
}

bool gold_has_order_by(const std::string& sql) {
    try {
        SqlAst ast = parse_sql(sql);
        for (NodeId kid : ast.children(ast.root())) {
            if (ast.node(kid).kind == NodeKind::order_by) return true;
        }
    } catch (const ParseError&) {
    }
    return false;
}

struct BatchOutput {
    std::vector<PipelineRecord> pipeline;
    std::vector<SampleRecord> records;
};

/// Per-sample pipelines on a bounded worker pool; one database handle per
/// worker, outputs kept in input order.
BatchOutput run_batch(const RunConfig& config, const std::vector<RunRow>& corpus,
                      std::ostream& err) {
    // shared, read-only schema graphs and db paths
    std::map<std::string, SchemaGraph> schemas;
    std::map<std::string, std::string> db_paths;
    for (const auto& row : corpus) {
        if (schemas.count(row.db_id)) continue;
        try {
            std::string path = resolve_db_path(config.db_root, row.db_id);
            schemas[row.db_id] = introspect_schema(path);
            db_paths[row.db_id] = path;
        } catch (const std::exception& e) {
            err << "warning: cannot load database " << row.db_id << ": " << e.what() << "\n";
        }
    }

    bool any_oracle = config.detector.type == "oracle" || config.localizer.type == "oracle" ||
                      config.refiner.type == "oracle";
    std::optional<OracleBackends> oracle;
    if (any_oracle) {
        std::vector<OracleFixture> fixtures;
        for (const auto& row : corpus) {
            OracleFixture f;
            f.question_id = row.question_id;
            f.question = row.question;
            f.gold_sql = row.gold_sql;
            f.erroneous_sql = row.predicted_sql;
            f.labels = row.labels.value_or(ErrorLabelSet::none());
            for (const auto& m : row.mutation_log) {
                f.mutation_log.push_back({m.before, m.after, m.table, m.column, m.clause});
            }
            fixtures.push_back(std::move(f));
        }
        oracle = make_oracle(fixtures);
    }

    PipelineBackends backends;
    backends.detector = build_backend(config.detector, oracle ? &*oracle : nullptr, "detector");
    backends.localizer = build_backend(config.localizer, oracle ? &*oracle : nullptr, "localizer");
    backends.refiner = build_backend(config.refiner, oracle ? &*oracle : nullptr, "refiner");
    if (!backends.detector) throw IoError("a detector backend is required");
    if (!backends.localizer) backends.localizer = backends.detector;
    if (!backends.refiner) backends.refiner = backends.localizer;

    BatchOutput output;
    output.pipeline.resize(corpus.size());
    output.records.resize(corpus.size());

    std::atomic<std::size_t> cursor{0};
    int jobs = std::max(1, config.jobs);

    auto worker = [&]() {
        std::map<std::string, Db> handles;  // one handle per worker per database
        while (true) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= corpus.size()) break;
            const RunRow& row = corpus[i];

            Db* db = nullptr;
            auto path_it = db_paths.find(row.db_id);
            if (path_it != db_paths.end()) {
                auto handle_it = handles.find(row.db_id);
                if (handle_it == handles.end()) {
                    try {
                        handle_it =
                            handles.emplace(row.db_id, Db::open_readonly(path_it->second)).first;
                    } catch (const std::exception&) {
                        handle_it = handles.end();
                    }
                }
                if (handle_it != handles.end()) db = &handle_it->second;
            }
            const SchemaGraph empty_schema;
            auto schema_it = schemas.find(row.db_id);
            const SchemaGraph& schema =
                schema_it != schemas.end() ? schema_it->second : empty_schema;

            PipelineSample sample;
            sample.question_id = row.question_id;
            sample.db_id = row.db_id;
            sample.question = row.question;
            sample.predicted_sql = row.predicted_sql;
            sample.gold_sql = row.gold_sql;
            sample.schema_linking = row.schema_linking;

            PipelineRecord rec =
                run_pipeline(sample, db, schema, backends, config.exec_timeout_ms);

            SampleRecord sr;
            sr.question_id = row.question_id;
            sr.flagged = !rec.detection.final.is_no_error();
            sr.final_labels = rec.detection.final;
            if (row.gold_labels) {
                sr.gold_labels = row.gold_labels;
            } else if (row.labels) {
                sr.gold_labels = row.labels;
            }
            if (db) {
                bool os = config.order_sensitive || gold_has_order_by(row.gold_sql);
                ExecOutcome gold = execute(row.gold_sql, *db, config.exec_timeout_ms);
                ExecOutcome pred = execute(row.predicted_sql, *db, config.exec_timeout_ms);
                sr.gold_correct_before = exec_equivalent(pred, gold, os);
                if (rec.refined_sql == rec.original_sql) {
                    sr.gold_correct_after = sr.gold_correct_before;
                    sr.changed = false;
                } else {
                    ExecOutcome refined = execute(rec.refined_sql, *db, config.exec_timeout_ms);
                    sr.gold_correct_after = exec_equivalent(refined, gold, os);
                    sr.changed = !exec_equivalent(refined, pred, os);
                }
            }
            output.pipeline[i] = std::move(rec);
            output.records[i] = std::move(sr);
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    return output;
}

std::string detection_report_jsonl(const BatchOutput& batch) {
    std::ostringstream out;
    for (const auto& rec : batch.pipeline) {
        nlohmann::ordered_json j;
        j["question_id"] = rec.question_id;
        j["rule_errors"] = labels_to_json(rec.detection.rule_set);
        j["llm_errors"] = labels_to_json(rec.detection.llm_set);
        j["final"] = labels_to_json(rec.detection.final);
        j["flagged"] = !rec.detection.final.is_no_error();
        j["raw_tokens"] = rec.detection.raw_token_sequence;
        out << j.dump() << "\n";
    }
    return out.str();
}

std::string refinement_report_jsonl(const BatchOutput& batch) {
    std::ostringstream out;
    for (const auto& rec : batch.pipeline) {
        nlohmann::ordered_json j;
        j["question_id"] = rec.question_id;
        j["original_sql"] = rec.original_sql;
        j["final_labels"] = labels_to_json(rec.detection.final);
        nlohmann::ordered_json locs = nlohmann::ordered_json::array();
        for (const auto& loc : rec.localizations) {
            nlohmann::ordered_json l;
            l["error_type"] = error_type_name(loc.error_type);
            l["error_nodes"] = loc.error_nodes;
            nlohmann::ordered_json elements = nlohmann::ordered_json::array();
            for (const auto& e : loc.schema_elements) elements.push_back(e.qualified());
            l["schema_elements"] = std::move(elements);
            l["guideline"] = loc.guideline.values;
            l["downgraded"] = loc.downgraded;
            if (!loc.warning.empty()) l["warning"] = loc.warning;
            locs.push_back(std::move(l));
        }
        j["localizations"] = std::move(locs);
        j["refined_sql"] = rec.refined_sql;
        j["status"] = rec.status;
        out << j.dump() << "\n";
    }
    return out.str();
}

std::string records_report_jsonl(const BatchOutput& batch) {
    std::ostringstream out;
    for (const auto& rec : batch.records) {
        nlohmann::ordered_json j;
        j["question_id"] = rec.question_id;
        j["gold_correct_before"] = rec.gold_correct_before;
        j["flagged"] = rec.flagged;
        j["gold_correct_after"] = rec.gold_correct_after;
        j["changed"] = rec.changed;
        j["final_labels"] = labels_to_json(rec.final_labels);
        if (rec.gold_labels) j["gold_labels"] = labels_to_json(*rec.gold_labels);
        out << j.dump() << "\n";
    }
    return out.str();
}

std::vector<SampleRecord> load_records_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open records file: " + path);
    std::vector<SampleRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        SampleRecord rec;
        rec.question_id = j.value("question_id", "");
        rec.gold_correct_before = j.value("gold_correct_before", false);
        rec.flagged = j.value("flagged", false);
        rec.gold_correct_after = j.value("gold_correct_after", false);
        rec.changed = j.value("changed", false);
        if (j.contains("final_labels")) rec.final_labels = labels_from_json(j["final_labels"]);
        if (j.contains("gold_labels")) rec.gold_labels = labels_from_json(j["gold_labels"]);
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace

int cmd_synth(const RunConfig& config, std::ostream& out, std::ostream& err) {
    std::vector<CorpusRow> corpus;
    try {
        corpus = load_corpus_jsonl(config.corpus);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    BackendPtr assistant;
    try {
        assistant = build_backend(config.assistant, nullptr, "assistant");
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    SynthResult result;
    try {
        result = synthesize_dataset(corpus, config.db_root, config.synthesis, assistant.get());
    } catch (const InsufficientCorpus& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }

    try {
        fs::create_directories(config.out_dir);
        write_file(config.out_dir + "/dataset.jsonl", synth_samples_to_jsonl(result.samples));
        write_file(config.out_dir + "/composition.json", result.report.to_json(config.synthesis));
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    out << result.report.to_json(config.synthesis);
    return kExitOk;
}

namespace {

int run_reports(const RunConfig& config, bool with_refinement, bool with_eval, std::ostream& out,
                std::ostream& err) {
    std::vector<RunRow> corpus;
    try {
        corpus = load_run_corpus(config.corpus);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    BatchOutput batch;
    try {
        batch = run_batch(config, corpus, err);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        fs::create_directories(config.out_dir);
        write_file(config.out_dir + "/detection.jsonl", detection_report_jsonl(batch));
        if (with_refinement) {
            write_file(config.out_dir + "/refinement.jsonl", refinement_report_jsonl(batch));
        }
        if (with_eval) {
            write_file(config.out_dir + "/records.jsonl", records_report_jsonl(batch));
            EvalReport report =
                compute_metrics(batch.records, static_cast<std::int64_t>(batch.records.size()));
            write_file(config.out_dir + "/eval.json", report.to_json());
            write_file(config.out_dir + "/summary.txt", report.to_table());
            out << report.to_table();
        }
    } catch (const InconsistentRecords& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}

}  // namespace

int cmd_detect(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return run_reports(config, /*with_refinement=*/false, /*with_eval=*/false, out, err);
}

int cmd_refine(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return run_reports(config, /*with_refinement=*/true, /*with_eval=*/false, out, err);
}

int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return run_reports(config, /*with_refinement=*/true, /*with_eval=*/true, out, err);
}

int cmd_eval(const std::string& records_path, const std::optional<std::string>& out_dir,
             std::optional<std::int64_t> total, std::ostream& out, std::ostream& err) {
    std::vector<SampleRecord> records;
    try {
        records = load_records_jsonl(records_path);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    EvalReport report;
    try {
        report = compute_metrics(records,
                                 total.value_or(static_cast<std::int64_t>(records.size())));
    } catch (const InconsistentRecords& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    if (out_dir) {
        try {
            fs::create_directories(*out_dir);
            write_file(*out_dir + "/eval.json", report.to_json());
            write_file(*out_dir + "/summary.txt", report.to_table());
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
            return kExitConfig;
        }
    }
    out << report.to_table();
    return kExitOk;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"SQL error detection and error-guided refinement toolkit"};
    app.require_subcommand(1);

    std::string db_path;
    bool as_json = false;
    auto* introspect =
        app.add_subcommand("introspect", "Print the schema graph of a SQLite database");
    introspect->add_option("db", db_path, "Path to the SQLite database")->required();
    introspect->add_flag("--json", as_json, "Emit structured JSON instead of the text block");

    auto* taxonomy = app.add_subcommand("taxonomy", "Error taxonomy resources");
    std::string taxonomy_out;
    auto* taxonomy_export =
        taxonomy->add_subcommand("export", "Export the taxonomy, templates and external mapping");
    taxonomy_export->add_option("--out", taxonomy_out, "Write to a file instead of stdout");
    taxonomy->require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::string db_root_override;
    std::string out_override;
    std::optional<int> jobs_override;
    bool order_sensitive_override = false;

    auto add_config_options = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Run configuration JSON")->required();
        cmd->add_option("--seed", seed_override, "Override the configured seed");
        cmd->add_option("--db-root", db_root_override, "Override the database root directory");
        cmd->add_option("--out", out_override, "Override the output directory");
        cmd->add_option("--jobs", jobs_override, "Worker pool size");
        cmd->add_flag("--order-sensitive", order_sensitive_override,
                      "Force order-sensitive result comparison");
    };

    auto* synth = app.add_subcommand("synth", "Synthesize a labeled error dataset");
    add_config_options(synth);
    auto* detect_cmd = app.add_subcommand("detect", "Run error detection over a corpus");
    add_config_options(detect_cmd);
    auto* refine_cmd =
        app.add_subcommand("refine", "Run detection plus error-guided refinement");
    add_config_options(refine_cmd);
    auto* run_cmd =
        app.add_subcommand("run", "Full pipeline: detection, refinement and evaluation");
    add_config_options(run_cmd);

    std::string records_path;
    std::string eval_out;
    std::optional<std::int64_t> eval_total;
    auto* eval_cmd = app.add_subcommand("eval", "Recompute metrics from a records report");
    eval_cmd->add_option("--records", records_path, "records.jsonl produced by `run`")->required();
    eval_cmd->add_option("--out", eval_out, "Directory for eval.json and summary.txt");
    eval_cmd->add_option("--total", eval_total, "Total batch size A (defaults to record count)");

    std::vector<std::string> argv_storage = args;
    argv_storage.insert(argv_storage.begin(), "sqlrefine");
    std::vector<char*> argv;
    argv.reserve(argv_storage.size());
    for (auto& s : argv_storage) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        std::ostringstream helper;
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    auto load_config = [&](RunConfig& config) -> bool {
        try {
            config = RunConfig::load(config_path);
        } catch (const IoError& e) {
            err << "error: " << e.what() << "\n";
            return false;
        }
        if (seed_override) {
            config.seed = *seed_override;
            config.synthesis.seed = *seed_override;
        }
        if (!db_root_override.empty()) config.db_root = db_root_override;
        if (!out_override.empty()) config.out_dir = out_override;
        if (jobs_override) config.jobs = *jobs_override;
        if (order_sensitive_override) config.order_sensitive = true;
        return true;
    };

    try {
        if (introspect->parsed()) return cmd_introspect(db_path, as_json, out, err);
        if (taxonomy_export->parsed()) {
            return cmd_taxonomy_export(
                taxonomy_out.empty() ? std::nullopt : std::optional<std::string>(taxonomy_out),
                out, err);
        }
        RunConfig config;
        if (synth->parsed()) {
            if (!load_config(config)) return kExitConfig;
            return cmd_synth(config, out, err);
        }
        if (detect_cmd->parsed()) {
            if (!load_config(config)) return kExitConfig;
            return cmd_detect(config, out, err);
        }
        if (refine_cmd->parsed()) {
            if (!load_config(config)) return kExitConfig;
            return cmd_refine(config, out, err);
        }
        if (run_cmd->parsed()) {
            if (!load_config(config)) return kExitConfig;
            return cmd_run(config, out, err);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(records_path,
                            eval_out.empty() ? std::nullopt : std::optional<std::string>(eval_out),
                            eval_total, out, err);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    err << "error: no subcommand selected\n";
    return kExitConfig;
}

}  // namespace sqlrefine::cli
