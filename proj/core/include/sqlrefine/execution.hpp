#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sqlrefine/db.hpp"
#include "sqlrefine/taxonomy.hpp"

namespace sqlrefine {

struct ExecOutcome {
    enum class Status { rows, error, timeout };

    Status status = Status::error;
    std::vector<Row> rows;      // multiset of tuples when status == rows
    std::string error_message;  // when status == error
    std::int64_t elapsed_ms = 0;

    bool ok() const { return status == Status::rows; }
};

/// Read-only execution with a per-query deadline. Errors and timeouts are
/// encoded in the outcome, never thrown.
ExecOutcome execute(const std::string& sql, const Db& db, std::int64_t timeout_ms = 30000);

/// Result equivalence: both outcomes produced rows and the row multisets
/// match (sequences when order_sensitive). Errors and timeouts are never
/// equivalent to anything, including each other. NULLs compare equal to
/// each other; floats compare with 1e-6 relative tolerance.
bool exec_equivalent(const ExecOutcome& a, const ExecOutcome& b, bool order_sensitive = false);

/// Per-sample evaluation facts, derived from execution comparisons plus the
/// detection flag.
struct SampleRecord {
    std::string question_id;
    bool gold_correct_before = false;  // Exec(predicted) == Exec(gold)
    bool flagged = false;              // detection reported any error
    bool gold_correct_after = false;   // Exec(refined) == Exec(gold)
    bool changed = false;              // Exec(refined) != Exec(predicted)
    ErrorLabelSet final_labels;
    std::optional<ErrorLabelSet> gold_labels;
};

struct EvalReport {
    std::int64_t total = 0;  // A
    double ex_before = 0.0;
    double ex_after = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double d_accuracy = 0.0;
    double d_f1 = 0.0;
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;
    std::int64_t fixed_count = 0;      // TPs whose refined SQL matches gold
    std::int64_t corrupted_count = 0;  // FPs whose execution changed
    double fixed_rate = 0.0;           // FR
    double corruption_rate = 0.0;      // CR
    bool cr_undefined = false;         // |FP| == 0
    bool fr_undefined = false;         // |TP| == 0
    double delta_ex_observed = 0.0;       // EX_after - EX_before
    double delta_ex_reconstructed = 0.0;  // (fixed - corrupted) / A
    /// Per external category recall over samples whose gold labels map there.
    std::map<std::string, double> tsa;
    std::map<std::string, std::int64_t> tsa_support;

    std::string to_json() const;
    std::string to_table() const;
};

/// Fold sample records into the full metric suite. `total` is the batch
/// size A and must be at least records.size(). Throws InconsistentRecords
/// when a record's fields contradict each other (e.g. execution changed on
/// an unflagged sample).
EvalReport compute_metrics(const std::vector<SampleRecord>& records, std::int64_t total);

/// Overall accuracy gain from detection + refinement quality.
double delta_ex(std::int64_t tp, std::int64_t fp, double fr, double cr, std::int64_t total);

}  // namespace sqlrefine
