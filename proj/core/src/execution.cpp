#include "sqlrefine/execution.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sqlrefine/errors.hpp"

namespace sqlrefine {

namespace {

struct Deadline {
    std::chrono::steady_clock::time_point end;
    bool expired = false;
};

int progress_callback(void* ctx) {
    auto* deadline = static_cast<Deadline*>(ctx);
    if (std::chrono::steady_clock::now() >= deadline->end) {
        deadline->expired = true;
        return 1;  // abort
    }
    return 0;
}

int value_rank(const SqlValue& v) {
    switch (v.kind) {
        case SqlValue::Kind::null: return 0;
        case SqlValue::Kind::integer:
        case SqlValue::Kind::real: return 1;
        case SqlValue::Kind::text: return 2;
        case SqlValue::Kind::blob: return 3;
    }
    return 0;
}

// total order for canonical multiset sorting; numerics ordered jointly
bool value_less(const SqlValue& a, const SqlValue& b) {
    int ra = value_rank(a);
    int rb = value_rank(b);
    if (ra != rb) return ra < rb;
    switch (ra) {
        case 0: return false;
        case 1: {
            double da = a.as_double();
            double db = b.as_double();
            if (da != db) return da < db;
            return static_cast<int>(a.kind) < static_cast<int>(b.kind);
        }
        default: return a.text_value < b.text_value;
    }
}

bool row_less(const Row& a, const Row& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), value_less);
}

constexpr double kFloatRelTolerance = 1e-6;

bool value_equal(const SqlValue& a, const SqlValue& b) {
    if (a.kind == SqlValue::Kind::null || b.kind == SqlValue::Kind::null) {
        return a.kind == b.kind;  // NULLs equal each other
    }
    if (a.is_numeric() && b.is_numeric()) {
        if (a.kind == SqlValue::Kind::integer && b.kind == SqlValue::Kind::integer) {
            return a.int_value == b.int_value;
        }
        double da = a.as_double();
        double db = b.as_double();
        double scale = std::max({1.0, std::fabs(da), std::fabs(db)});
        return std::fabs(da - db) <= kFloatRelTolerance * scale;
    }
    if (a.kind != b.kind) return false;
    return a.text_value == b.text_value;
}

bool row_equal(const Row& a, const Row& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!value_equal(a[i], b[i])) return false;
    }
    return true;
}

double safe_ratio(std::int64_t numerator, std::int64_t denominator) {
    return denominator == 0 ? 0.0 : static_cast<double>(numerator) / static_cast<double>(denominator);
}

}  // namespace

ExecOutcome execute(const std::string& sql, const Db& db, std::int64_t timeout_ms) {
    ExecOutcome outcome;
    auto start = std::chrono::steady_clock::now();
    if (!db.valid()) {
        outcome.status = ExecOutcome::Status::error;
        outcome.error_message = "database handle not open";
        return outcome;
    }

    Deadline deadline{start + std::chrono::milliseconds(timeout_ms)};
    sqlite3_progress_handler(db.raw(), 1000, progress_callback, &deadline);

    try {
        outcome.rows = db.query(sql);
        outcome.status = ExecOutcome::Status::rows;
    } catch (const ExecutionError& e) {
        if (deadline.expired) {
            outcome.status = ExecOutcome::Status::timeout;
            outcome.error_message = "query timed out";
        } else {
            outcome.status = ExecOutcome::Status::error;
            outcome.error_message = e.what();
        }
        outcome.rows.clear();
    }
    sqlite3_progress_handler(db.raw(), 0, nullptr, nullptr);

    outcome.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    return outcome;
}

bool exec_equivalent(const ExecOutcome& a, const ExecOutcome& b, bool order_sensitive) {
    if (a.status != ExecOutcome::Status::rows || b.status != ExecOutcome::Status::rows) {
        return false;  // errors/timeouts never equivalent, even to each other
    }
    if (a.rows.size() != b.rows.size()) return false;
    if (order_sensitive) {
        for (std::size_t i = 0; i < a.rows.size(); ++i) {
            if (!row_equal(a.rows[i], b.rows[i])) return false;
        }
        return true;
    }
    std::vector<Row> sa = a.rows;
    std::vector<Row> sb = b.rows;
    std::sort(sa.begin(), sa.end(), row_less);
    std::sort(sb.begin(), sb.end(), row_less);
    for (std::size_t i = 0; i < sa.size(); ++i) {
        if (!row_equal(sa[i], sb[i])) return false;
    }
    return true;
}

EvalReport compute_metrics(const std::vector<SampleRecord>& records, std::int64_t total) {
    if (total < static_cast<std::int64_t>(records.size())) {
        throw InconsistentRecords("total batch size smaller than the record count");
    }
    EvalReport r;
    r.total = total;

    std::int64_t correct_before = 0;
    std::int64_t correct_after = 0;

    for (const auto& rec : records) {
        if (!rec.flagged && rec.changed) {
            throw InconsistentRecords("sample " + rec.question_id +
                                      ": execution changed on an unflagged sample");
        }
        if (!rec.changed && rec.gold_correct_after != rec.gold_correct_before) {
            throw InconsistentRecords("sample " + rec.question_id +
                                      ": correctness flipped without an execution change");
        }
        correct_before += rec.gold_correct_before ? 1 : 0;
        correct_after += rec.gold_correct_after ? 1 : 0;
        bool actually_incorrect = !rec.gold_correct_before;
        if (rec.flagged && actually_incorrect) {
            ++r.tp;
            if (rec.gold_correct_after) ++r.fixed_count;
        } else if (rec.flagged && !actually_incorrect) {
            ++r.fp;
            if (rec.changed) ++r.corrupted_count;
        } else if (!rec.flagged && actually_incorrect) {
            ++r.fn;
        } else {
            ++r.tn;
        }
    }

    r.ex_before = safe_ratio(correct_before, total);
    r.ex_after = safe_ratio(correct_after, total);
    r.precision = safe_ratio(r.tp, r.tp + r.fp);
    r.recall = safe_ratio(r.tp, r.tp + r.fn);
    r.d_accuracy = safe_ratio(r.tp + r.tn, total);
    r.d_f1 = (r.precision + r.recall) == 0.0
                 ? 0.0
                 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    r.fr_undefined = r.tp == 0;
    r.cr_undefined = r.fp == 0;
    r.fixed_rate = safe_ratio(r.fixed_count, r.tp);
    r.corruption_rate = safe_ratio(r.corrupted_count, r.fp);
    // both deltas from integer counts so the identity holds bit-exactly
    r.delta_ex_observed =
        total == 0 ? 0.0
                   : static_cast<double>(correct_after - correct_before) /
                         static_cast<double>(total);
    // integer-count form of the |TP|*FR - |FP|*CR decomposition
    r.delta_ex_reconstructed =
        total == 0 ? 0.0
                   : static_cast<double>(r.fixed_count - r.corrupted_count) /
                         static_cast<double>(total);

    // type-specific accuracy over external categories, gold labels permitting
    const Taxonomy& tax = Taxonomy::instance();
    std::map<std::string, std::int64_t> hits;
    for (const auto& rec : records) {
        if (!rec.gold_labels || rec.gold_labels->is_no_error()) continue;
        std::set<std::string> gold_cats;
        for (ErrorType t : rec.gold_labels->labels) {
            for (const auto& [cat, sub] : tax.map_external(t)) gold_cats.insert(cat);
        }
        std::set<std::string> pred_cats;
        for (ErrorType t : rec.final_labels.labels) {
            for (const auto& [cat, sub] : tax.map_external(t)) pred_cats.insert(cat);
        }
        for (const auto& cat : gold_cats) {
            r.tsa_support[cat] += 1;
            if (pred_cats.count(cat)) hits[cat] += 1;
        }
    }
    for (const auto& [cat, support] : r.tsa_support) {
        r.tsa[cat] = safe_ratio(hits[cat], support);
    }
    return r;
}

double delta_ex(std::int64_t tp, std::int64_t fp, double fr, double cr, std::int64_t total) {
    return (static_cast<double>(tp) * fr - static_cast<double>(fp) * cr) /
           static_cast<double>(total);
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["total"] = total;
    j["ex_before"] = ex_before;
    j["ex_after"] = ex_after;
    j["precision"] = precision;
    j["recall"] = recall;
    j["d_accuracy"] = d_accuracy;
    j["d_f1"] = d_f1;
    j["tp"] = tp;
    j["fp"] = fp;
    j["fn"] = fn;
    j["tn"] = tn;
    j["fixed_count"] = fixed_count;
    j["corrupted_count"] = corrupted_count;
    j["fixed_rate"] = fixed_rate;
    j["fr_undefined"] = fr_undefined;
    j["corruption_rate"] = corruption_rate;
    j["cr_undefined"] = cr_undefined;
    j["delta_ex_observed"] = delta_ex_observed;
    j["delta_ex_reconstructed"] = delta_ex_reconstructed;
    nlohmann::ordered_json tsa_json = nlohmann::ordered_json::object();
    for (const auto& [cat, value] : tsa) {
        tsa_json[cat] = {{"tsa", value}, {"support", tsa_support.at(cat)}};
    }
    j["tsa"] = std::move(tsa_json);
    return j.dump(2) + "\n";
}

std::string EvalReport::to_table() const {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    auto line = [&](const std::string& name, const std::string& value) {
        out << std::left << std::setw(24) << name << value << "\n";
    };
    auto num = [&](double v) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(4) << v;
        return s.str();
    };
    line("metric", "value");
    line("------", "-----");
    line("total (A)", std::to_string(total));
    line("EX before", num(ex_before));
    line("EX after", num(ex_after));
    line("Precision", num(precision));
    line("Recall", num(recall));
    line("D-Accuracy", num(d_accuracy));
    line("D-F1", num(d_f1));
    line("|TP| / |FP|", std::to_string(tp) + " / " + std::to_string(fp));
    line("|FN| / |TN|", std::to_string(fn) + " / " + std::to_string(tn));
    line("FR", num(fixed_rate) + (fr_undefined ? "  (|TP|=0)" : ""));
    line("CR", num(corruption_rate) + (cr_undefined ? "  (|FP|=0)" : ""));
    line("dEX observed", num(delta_ex_observed));
    line("dEX reconstructed", num(delta_ex_reconstructed));
    for (const auto& [cat, value] : tsa) {
        line("TSA " + cat, num(value) + "  (n=" + std::to_string(tsa_support.at(cat)) + ")");
    }
    return out.str();
}

}  // namespace sqlrefine
