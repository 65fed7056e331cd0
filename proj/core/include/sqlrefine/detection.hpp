#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sqlrefine/ast.hpp"
#include "sqlrefine/backend.hpp"
#include "sqlrefine/execution.hpp"
#include "sqlrefine/parser.hpp"
#include "sqlrefine/schema_graph.hpp"
#include "sqlrefine/taxonomy.hpp"

namespace sqlrefine {

struct DetectionSample {
    std::string question_id;
    std::string question;
    std::string predicted_sql;
};

/// Linearized detector input. Section order is fixed: error-type
/// definitions, question, QSS, SQL, AST, execution feedback, then the
/// static rule results appended last.
struct DetectionInput {
    std::string instructions;
    std::string question;
    std::string qss_serialized;
    std::string sql_text;
    std::string ast_rendered;
    std::string exec_rendered;
    std::string rule_rendered;

    std::string serialized() const;
};

struct DetectionResult {
    ErrorLabelSet rule_set;
    ErrorLabelSet llm_set;
    ErrorLabelSet final;  // rule ∪ llm, or the no-error marker when both empty
    std::vector<std::string> raw_token_sequence;
    DetectionInput input;  // the structural input, reused by refinement
};

/// The error-type definition block shared by every detector prompt.
std::string error_type_instructions();

/// Bounded rendering of an execution outcome (result sample capped at
/// `max_rows`, error messages verbatim).
std::string render_exec_feedback(const ExecOutcome& outcome, std::size_t max_rows = 5);

/// Static superficial detection: deterministic rules over the AST, the
/// (possibly pruned) QSS schema and the execution feedback. Never fails;
/// an unreadable database degrades value-domain checks to non-assertable.
/// `ast` may be null when the SQL did not parse; the execution-failure
/// mapping then provides the label.
ErrorLabelSet static_detect(const SqlAst* ast, const QuestionSchemaStructure& qss, const Db* db,
                            const ExecOutcome& exec_feedback);

DetectionInput build_detection_input(const DetectionSample& sample,
                                     const QuestionSchemaStructure& qss, const SqlAst* ast,
                                     const ExecOutcome& exec_feedback,
                                     const ErrorLabelSet& rule_set);

/// LLM-based semantic detection under the constrained-output contract.
/// Backends with the constrained-decoding capability get the allowed-token
/// list; others are validated against the token grammar with up to
/// `max_retries` retries. A null token anywhere forces the empty set.
/// Throws InvalidOutput after retries, and propagates BackendError.
std::pair<ErrorLabelSet, std::vector<std::string>> semantic_detect(const DetectionInput& input,
                                                                   ChatBackend& backend,
                                                                   int max_retries = 2);

/// Result aggregation: union of both stages, replaced by the no-error
/// marker iff the union is empty.
ErrorLabelSet aggregate_detection(const ErrorLabelSet& rule_set, const ErrorLabelSet& llm_set);

/// Full detection pass: static stage, input augmentation, semantic stage,
/// aggregation. The static stage never blocks the pipeline.
DetectionResult detect(const DetectionSample& sample, const QuestionSchemaStructure& qss,
                       const SqlAst* ast, const Db* db, ChatBackend& backend,
                       std::int64_t exec_timeout_ms = 30000);

}  // namespace sqlrefine
