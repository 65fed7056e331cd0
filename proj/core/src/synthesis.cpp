#include "sqlrefine/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sqlrefine/errors.hpp"
#include "sqlrefine/execution.hpp"
#include "sqlrefine/parser.hpp"

namespace sqlrefine {

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

nlohmann::ordered_json mutation_to_json(const MutationRecord& m) {
    nlohmann::ordered_json j;
    j["before"] = m.before;
    j["after"] = m.after;
    j["table"] = m.table;
    j["column"] = m.column;
    j["clause"] = m.clause;
    return j;
}

MutationRecord mutation_from_json(const nlohmann::json& j) {
    MutationRecord m;
    m.before = j.value("before", "");
    m.after = j.value("after", "");
    m.table = j.value("table", "");
    m.column = j.value("column", "");
    m.clause = j.value("clause", "");
    return m;
}

}  // namespace

const char* sample_source_name(SampleSource source) {
    switch (source) {
        case SampleSource::rule_single: return "rule_single";
        case SampleSource::rule_compound: return "rule_compound";
        case SampleSource::llm_injected: return "llm_injected";
        case SampleSource::gold_correct: return "gold_correct";
        case SampleSource::pred_correct: return "pred_correct";
    }
    return "gold_correct";
}

std::optional<SampleSource> sample_source_by_name(const std::string& name) {
    for (SampleSource s : {SampleSource::rule_single, SampleSource::rule_compound,
                           SampleSource::llm_injected, SampleSource::gold_correct,
                           SampleSource::pred_correct}) {
        if (name == sample_source_name(s)) return s;
    }
    return std::nullopt;
}

std::vector<CorpusRow> load_corpus_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path);
    std::vector<CorpusRow> rows;
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
        CorpusRow row;
        row.question_id = j.value("question_id", "");
        row.db_id = j.value("db_id", "");
        row.question = j.value("question", "");
        row.gold_sql = j.value("gold_sql", "");
        if (j.contains("predicted_sql") && !j["predicted_sql"].is_null()) {
            row.predicted_sql = j["predicted_sql"].get<std::string>();
        }
        if (j.contains("pred_correct") && !j["pred_correct"].is_null()) {
            row.pred_correct = j["pred_correct"].get<bool>();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string corpus_to_jsonl(const std::vector<CorpusRow>& rows) {
    std::ostringstream out;
    for (const auto& row : rows) {
        nlohmann::ordered_json j;
        j["question_id"] = row.question_id;
        j["db_id"] = row.db_id;
        j["question"] = row.question;
        j["gold_sql"] = row.gold_sql;
        if (row.predicted_sql) j["predicted_sql"] = *row.predicted_sql;
        if (row.pred_correct) j["pred_correct"] = *row.pred_correct;
        out << j.dump() << "\n";
    }
    return out.str();
}

std::string synth_samples_to_jsonl(const std::vector<SynthSample>& samples) {
    const Taxonomy& tax = Taxonomy::instance();
    std::ostringstream out;
    for (const auto& s : samples) {
        nlohmann::ordered_json j;
        j["question_id"] = s.question_id;
        j["db_id"] = s.db_id;
        j["question"] = s.question;
        j["sql"] = s.sql;
        nlohmann::ordered_json labels = nlohmann::ordered_json::array();
        for (ErrorType t : priority_sorted(s.labels.labels)) labels.push_back(error_type_name(t));
        j["labels"] = std::move(labels);
        nlohmann::ordered_json tokens = nlohmann::ordered_json::array();
        if (s.labels.is_no_error() || s.labels.labels.empty()) {
            tokens.push_back(tax.token_for(std::nullopt).surface);
        } else {
            for (ErrorType t : priority_sorted(s.labels.labels)) {
                tokens.push_back(tax.token_for(t).surface);
            }
        }
        j["tokens"] = std::move(tokens);
        j["source"] = sample_source_name(s.source);
        j["gold_sql"] = s.gold_sql;
        nlohmann::ordered_json log = nlohmann::ordered_json::array();
        for (const auto& m : s.mutation_log) log.push_back(mutation_to_json(m));
        j["mutation_log"] = std::move(log);
        out << j.dump() << "\n";
    }
    return out.str();
}

std::vector<SynthSample> load_synth_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path);
    const Taxonomy& tax = Taxonomy::instance();
    std::vector<SynthSample> samples;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        SynthSample s;
        s.question_id = j.value("question_id", "");
        s.db_id = j.value("db_id", "");
        s.question = j.value("question", "");
        s.sql = j.value("sql", "");
        s.gold_sql = j.value("gold_sql", "");
        for (const auto& name : j.value("labels", nlohmann::json::array())) {
            auto type = tax.by_name(name.get<std::string>());
            if (type) s.labels.labels.insert(*type);
        }
        if (s.labels.labels.empty()) s.labels.no_error = true;
        for (const auto& t : j.value("tokens", nlohmann::json::array())) {
            s.tokens.push_back(t.get<std::string>());
        }
        if (auto source = sample_source_by_name(j.value("source", ""))) s.source = *source;
        for (const auto& m : j.value("mutation_log", nlohmann::json::array())) {
            s.mutation_log.push_back(mutation_from_json(m));
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

std::string resolve_db_path(const std::string& db_root, const std::string& db_id) {
    namespace fs = std::filesystem;
    std::vector<std::string> candidates = {
        db_root + "/" + db_id + ".sqlite",
        db_root + "/" + db_id + "/" + db_id + ".sqlite",
        db_id,
    };
    for (const auto& candidate : candidates) {
        if (fs::exists(candidate)) return candidate;
    }
    throw IoError("cannot locate database '" + db_id + "' under " + db_root);
}

namespace {

constexpr const char* kInjectSystemPrompt =
    "You are a SQL error annotator. Compare the predicted SQL against the gold SQL for the "
    "given question and schema. Answer with a JSON object of the form "
    "{\"labels\": [\"<error_type_name>\", ...], \"refined_sql\": \"<corrected SQL>\"} and "
    "nothing else. Valid error type names: attribute_mismatch, attribute_redundancy, "
    "attribute_missing, table_mismatch, table_redundancy, table_missing, value_error, "
    "condition_missing, condition_error, function_error, clause_error, modifier_error.";

std::string strip_code_fences(const std::string& text) {
    std::string out = text;
    auto first = out.find("```");
    if (first != std::string::npos) {
        auto line_end = out.find('\n', first);
        auto last = out.rfind("```");
        if (line_end != std::string::npos && last > line_end) {
            out = out.substr(line_end + 1, last - line_end - 1);
        }
    }
    return out;
}

bool gold_has_order_by(const std::string& gold_sql) {
    try {
        SqlAst ast = parse_sql(gold_sql);
        for (NodeId kid : ast.children(ast.root())) {
            if (ast.node(kid).kind == NodeKind::order_by) return true;
        }
    } catch (const ParseError&) {
    }
    return false;
}

}  // namespace

InjectionResult llm_inject(const std::string& question, const QuestionSchemaStructure& qss,
                           const std::string& predicted_sql, const std::string& gold_sql,
                           const Db& db, ChatBackend& backend, std::int64_t exec_timeout_ms) {
    InjectionResult result;

    std::ostringstream user;
    user << "== question ==\n" << question << "\n";
    user << "== question_schema_structure ==\n" << serialize_mschema(qss);
    user << "== predicted_sql ==\n" << predicted_sql << "\n";
    user << "== gold_sql ==\n" << gold_sql << "\n";

    std::string raw = backend.complete(kInjectSystemPrompt, user.str());

    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(strip_code_fences(raw));
    } catch (const std::exception&) {
        result.reject_reason = "unparseable_labels";
        return result;
    }
    if (!parsed.is_object() || !parsed.contains("labels") || !parsed["labels"].is_array() ||
        parsed["labels"].empty() || !parsed.contains("refined_sql")) {
        result.reject_reason = "unparseable_labels";
        return result;
    }
    const Taxonomy& tax = Taxonomy::instance();
    ErrorLabelSet labels;
    for (const auto& name : parsed["labels"]) {
        if (!name.is_string()) {
            result.reject_reason = "unparseable_labels";
            return result;
        }
        auto type = tax.by_name(name.get<std::string>());
        if (!type) {
            result.reject_reason = "unparseable_labels";
            return result;
        }
        labels.labels.insert(*type);
    }
    std::string refined = parsed["refined_sql"].get<std::string>();

    ExecOutcome gold_outcome = execute(gold_sql, db, exec_timeout_ms);
    ExecOutcome refined_outcome = execute(refined, db, exec_timeout_ms);
    if (!exec_equivalent(refined_outcome, gold_outcome, gold_has_order_by(gold_sql))) {
        result.reject_reason = "not_equivalent";
        return result;
    }

    result.accepted = true;
    result.labels = std::move(labels);
    result.refined_sql = std::move(refined);
    return result;
}

std::string SynthReport::to_json(const SynthConfig& config) const {
    nlohmann::ordered_json j;
    int n = total();
    auto proportion = [&](int count) { return n == 0 ? 0.0 : static_cast<double>(count) / n; };
    j["total"] = n;
    j["partitions"] = {
        {"no_error", {{"count", no_error_count}, {"proportion", proportion(no_error_count)}}},
        {"rule_single",
         {{"count", rule_single_count}, {"proportion", proportion(rule_single_count)}}},
        {"rule_compound",
         {{"count", rule_compound_count}, {"proportion", proportion(rule_compound_count)}}},
        {"llm_injected", {{"count", llm_count}, {"proportion", proportion(llm_count)}}},
    };
    j["llm_rejected"] = llm_rejected;
    j["incorrect_pool"] = incorrect_pool;
    j["correct_ratio"] = correct_ratio;
    j["target_correct_ratio"] = config.target_correct_ratio;
    j["ratio_tolerance"] = config.ratio_tolerance;
    j["ratio_within_tolerance"] = ratio_within_tolerance;
    j["per_label"] = per_label_counts;
    j["warnings"] = warnings;
    return j.dump(2) + "\n";
}

namespace {

struct DbBundle {
    Db db;
    SchemaGraph schema;
};

class DbCache {
public:
    explicit DbCache(std::string db_root) : db_root_(std::move(db_root)) {}

    DbBundle* get(const std::string& db_id) {
        auto it = cache_.find(db_id);
        if (it != cache_.end()) return it->second.get();
        try {
            std::string path = resolve_db_path(db_root_, db_id);
            auto bundle = std::make_unique<DbBundle>();
            bundle->schema = introspect_schema(path);
            bundle->db = Db::open_readonly(path);
            auto* raw = bundle.get();
            cache_[db_id] = std::move(bundle);
            return raw;
        } catch (const std::exception&) {
            cache_[db_id] = nullptr;
            return nullptr;
        }
    }

private:
    std::string db_root_;
    std::map<std::string, std::unique_ptr<DbBundle>> cache_;
};

std::vector<std::string> token_surfaces_for(const ErrorLabelSet& labels) {
    const Taxonomy& tax = Taxonomy::instance();
    std::vector<std::string> out;
    if (labels.is_no_error() || labels.labels.empty()) {
        out.push_back(tax.token_for(std::nullopt).surface);
        return out;
    }
    for (ErrorType t : priority_sorted(labels.labels)) out.push_back(tax.token_for(t).surface);
    return out;
}

}  // namespace

SynthResult synthesize_dataset(const std::vector<CorpusRow>& corpus, const std::string& db_root,
                               const SynthConfig& config, ChatBackend* assistant) {
    SynthResult result;
    SynthReport& report = result.report;
    DbCache dbs(db_root);

    // classify predictions, executing when no correctness flag is given
    struct Classified {
        const CorpusRow* row;
        bool pred_correct = false;
    };
    std::vector<Classified> with_predictions;
    for (const auto& row : corpus) {
        if (!row.predicted_sql) continue;
        Classified c{&row, false};
        if (row.pred_correct) {
            c.pred_correct = *row.pred_correct;
        } else {
            DbBundle* bundle = dbs.get(row.db_id);
            if (!bundle) continue;
            ExecOutcome gold = execute(row.gold_sql, bundle->db, config.exec_timeout_ms);
            ExecOutcome pred = execute(*row.predicted_sql, bundle->db, config.exec_timeout_ms);
            c.pred_correct = exec_equivalent(pred, gold, gold_has_order_by(row.gold_sql));
        }
        with_predictions.push_back(c);
    }

    // stage 1: LLM-assisted injection over the incorrect-prediction pool
    std::vector<const CorpusRow*> incorrect_pool;
    for (const auto& c : with_predictions) {
        if (!c.pred_correct) incorrect_pool.push_back(c.row);
    }
    report.incorrect_pool = static_cast<int>(incorrect_pool.size());

    if (assistant) {
        for (const CorpusRow* row : incorrect_pool) {
            DbBundle* bundle = dbs.get(row->db_id);
            if (!bundle) continue;
            // re-verify the inequality before emitting an erroneous sample
            ExecOutcome gold = execute(row->gold_sql, bundle->db, config.exec_timeout_ms);
            ExecOutcome pred = execute(*row->predicted_sql, bundle->db, config.exec_timeout_ms);
            if (exec_equivalent(pred, gold, gold_has_order_by(row->gold_sql))) continue;

            QuestionSchemaStructure qss =
                build_qss(row->question, bundle->schema, std::nullopt, {});
            InjectionResult injection;
            try {
                injection = llm_inject(row->question, qss, *row->predicted_sql, row->gold_sql,
                                       bundle->db, *assistant, config.exec_timeout_ms);
            } catch (const BackendError& e) {
                ++report.llm_rejected;
                report.warnings.push_back("llm_inject backend_error on " + row->question_id + ": " +
                                          e.what());
                continue;
            }
            if (!injection.accepted) {
                ++report.llm_rejected;
                continue;
            }
            SynthSample sample;
            sample.question_id = row->question_id;
            sample.db_id = row->db_id;
            sample.question = row->question;
            sample.sql = *row->predicted_sql;
            sample.labels = injection.labels;
            sample.tokens = token_surfaces_for(sample.labels);
            sample.source = SampleSource::llm_injected;
            sample.gold_sql = row->gold_sql;
            result.samples.push_back(std::move(sample));
            ++report.llm_count;
        }
    } else {
        report.warnings.push_back("no assistant backend configured; llm partition empty");
    }

    // stage 2: rule-based perturbation calibrated to complement the llm share
    const PartitionTargets& t = config.targets;
    int rule_total;
    if (report.llm_count > 0) {
        rule_total = static_cast<int>(
            std::lround(report.llm_count * (t.rule_single + t.rule_compound) / t.llm));
    } else {
        rule_total = static_cast<int>(
            std::lround(static_cast<double>(corpus.size()) * (t.rule_single + t.rule_compound)));
    }
    rule_total = std::max(rule_total, kErrorTypeCount * config.per_label_minimum);
    int compound_target = static_cast<int>(std::lround(rule_total * config.compound_fraction));
    int single_target = rule_total - compound_target;
    single_target =
        std::max(single_target, kErrorTypeCount * config.per_label_minimum);

    // perturbation pool: gold SQLs plus correctly predicted SQLs
    struct PoolEntry {
        const CorpusRow* row;
        const std::string* sql;
    };
    std::vector<PoolEntry> pool;
    for (const auto& row : corpus) pool.push_back({&row, &row.gold_sql});
    for (const auto& c : with_predictions) {
        if (c.pred_correct) pool.push_back({c.row, &*c.row->predicted_sql});
    }

    const auto all_types = Taxonomy::instance().all();
    std::map<std::string, int> singles_per_label;
    for (const auto& info : all_types) singles_per_label[info.name] = 0;

    // round-robin across labels, walking the pool from a seeded offset
    for (int round = 0; report.rule_single_count < single_target; ++round) {
        bool progress = false;
        for (const auto& info : all_types) {
            if (report.rule_single_count >= single_target) break;
            ErrorType label = static_cast<ErrorType>(info.id);
            bool emitted = false;
            for (std::size_t step = 0; step < pool.size(); ++step) {
                std::uint64_t mix =
                    splitmix64(config.seed ^ fnv1a(info.name) ^ static_cast<std::uint64_t>(round));
                std::size_t idx = (mix + step) % pool.size();
                const PoolEntry& entry = pool[idx];
                // one sample per (row, label, round) identity; avoid duplicates by sql text
                DbBundle* bundle = dbs.get(entry.row->db_id);
                if (!bundle) continue;
                SqlAst ast;
                try {
                    ast = parse_sql(*entry.sql);
                } catch (const ParseError&) {
                    continue;
                }
                PerturbationOutcome out;
                try {
                    out = perturb(ast, bundle->schema, bundle->db, label,
                                  splitmix64(mix ^ fnv1a(entry.row->question_id)));
                } catch (const ExecutionError&) {
                    continue;
                }
                if (!out.applied()) continue;
                bool duplicate = false;
                for (const auto& s : result.samples) {
                    if (s.question_id == entry.row->question_id && s.sql == out.perturbed_sql) {
                        duplicate = true;
                        break;
                    }
                }
                if (duplicate) continue;

                SynthSample sample;
                sample.question_id = entry.row->question_id;
                sample.db_id = entry.row->db_id;
                sample.question = entry.row->question;
                sample.sql = out.perturbed_sql;
                sample.labels = out.injected_labels;
                sample.tokens = token_surfaces_for(sample.labels);
                sample.source = SampleSource::rule_single;
                sample.gold_sql = *entry.sql;
                sample.mutation_log = out.mutation_log;
                result.samples.push_back(std::move(sample));
                ++report.rule_single_count;
                singles_per_label[info.name] += 1;
                emitted = true;
                progress = true;
                break;
            }
            (void)emitted;
        }
        if (!progress) break;  // pool exhausted
    }

    for (const auto& [label, count] : singles_per_label) {
        report.per_label_counts[label] = count;
        if (count < config.per_label_minimum) {
            throw InsufficientCorpus("cannot meet per-label minimum for " + label + ": got " +
                                     std::to_string(count) + ", need " +
                                     std::to_string(config.per_label_minimum));
        }
    }

    // compound pairs in deterministic order
    std::vector<std::pair<ErrorType, ErrorType>> pairs;
    for (int i = 1; i <= kErrorTypeCount; ++i) {
        for (int j = i + 1; j <= kErrorTypeCount; ++j) {
            ErrorType a = static_cast<ErrorType>(i);
            ErrorType b = static_cast<ErrorType>(j);
            if (compatible_pair(a, b)) pairs.emplace_back(a, b);
        }
    }
    std::size_t pair_cursor = splitmix64(config.seed ^ 0x9ddf'ea08'eb38'2d69ULL);
    for (int round = 0; report.rule_compound_count < compound_target; ++round) {
        bool progress = false;
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            if (report.rule_compound_count >= compound_target) break;
            auto pair = pairs[(pair_cursor + p) % pairs.size()];
            for (std::size_t step = 0; step < pool.size(); ++step) {
                std::uint64_t mix = splitmix64(config.seed ^ (static_cast<std::uint64_t>(p) << 32) ^
                                               static_cast<std::uint64_t>(round));
                std::size_t idx = (mix + step) % pool.size();
                const PoolEntry& entry = pool[idx];
                DbBundle* bundle = dbs.get(entry.row->db_id);
                if (!bundle) continue;
                SqlAst ast;
                try {
                    ast = parse_sql(*entry.sql);
                } catch (const ParseError&) {
                    continue;
                }
                PerturbationOutcome out;
                try {
                    out = compose(ast, bundle->schema, bundle->db, pair,
                                  splitmix64(mix ^ fnv1a(entry.row->question_id)));
                } catch (const ExecutionError&) {
                    continue;
                } catch (const IncompatiblePair&) {
                    break;
                }
                if (!out.applied()) continue;
                bool duplicate = false;
                for (const auto& s : result.samples) {
                    if (s.question_id == entry.row->question_id && s.sql == out.perturbed_sql) {
                        duplicate = true;
                        break;
                    }
                }
                if (duplicate) continue;

                SynthSample sample;
                sample.question_id = entry.row->question_id;
                sample.db_id = entry.row->db_id;
                sample.question = entry.row->question;
                sample.sql = out.perturbed_sql;
                sample.labels = out.injected_labels;
                sample.tokens = token_surfaces_for(sample.labels);
                sample.source = SampleSource::rule_compound;
                sample.gold_sql = *entry.sql;
                sample.mutation_log = out.mutation_log;
                result.samples.push_back(std::move(sample));
                ++report.rule_compound_count;
                progress = true;
                break;
            }
        }
        if (!progress) break;
    }
    if (report.rule_compound_count < compound_target) {
        report.warnings.push_back("compound partition shortfall: " +
                                  std::to_string(report.rule_compound_count) + "/" +
                                  std::to_string(compound_target));
    }

    // stage 3: no-error sampling to the configured correct:incorrect ratio
    int incorrect_total =
        report.llm_count + report.rule_single_count + report.rule_compound_count;
    double p = config.target_correct_ratio;
    int no_error_target = static_cast<int>(std::lround(incorrect_total * p / (1.0 - p)));

    struct NoErrorCandidate {
        const CorpusRow* row;
        const std::string* sql;
        SampleSource source;
    };
    std::vector<NoErrorCandidate> candidates;
    std::set<std::string> seen_qids;
    for (const auto& c : with_predictions) {
        if (c.pred_correct && seen_qids.insert(c.row->question_id).second) {
            candidates.push_back({c.row, &*c.row->predicted_sql, SampleSource::pred_correct});
        }
    }
    for (const auto& row : corpus) {
        if (seen_qids.insert(row.question_id).second) {
            candidates.push_back({&row, &row.gold_sql, SampleSource::gold_correct});
        }
    }
    // seeded deterministic shuffle
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return splitmix64(config.seed ^ fnv1a(candidates[a].row->question_id) ^ 0xabcdULL) <
               splitmix64(config.seed ^ fnv1a(candidates[b].row->question_id) ^ 0xabcdULL);
    });
    for (std::size_t i = 0; i < order.size() && report.no_error_count < no_error_target; ++i) {
        const NoErrorCandidate& c = candidates[order[i]];
        SynthSample sample;
        sample.question_id = c.row->question_id;
        sample.db_id = c.row->db_id;
        sample.question = c.row->question;
        sample.sql = *c.sql;
        sample.labels = ErrorLabelSet::none();
        sample.tokens = token_surfaces_for(sample.labels);
        sample.source = c.source;
        sample.gold_sql = c.row->gold_sql;
        result.samples.push_back(std::move(sample));
        ++report.no_error_count;
    }
    if (report.no_error_count < no_error_target) {
        report.warnings.push_back("no-error partition shortfall: " +
                                  std::to_string(report.no_error_count) + "/" +
                                  std::to_string(no_error_target));
    }

    int total = report.total();
    report.correct_ratio = total == 0 ? 0.0 : static_cast<double>(report.no_error_count) / total;
    report.ratio_within_tolerance =
        std::fabs(report.correct_ratio - config.target_correct_ratio) <= config.ratio_tolerance;
    return result;
}

}  // namespace sqlrefine
