#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "sqlrefine/db.hpp"
#include "sqlrefine/errors.hpp"
#include "sqlrefine/execution.hpp"

using namespace sqlrefine;

namespace {

struct Env {
    testutil::Fixtures fixtures;
    Db campus;
    Env()
        : fixtures(testutil::make_fixtures(testutil::fresh_temp_dir("exec"))),
          campus(Db::open_readonly(fixtures.db_path("campus"))) {}
};

Env& env() {
    static Env instance;
    return instance;
}

ExecOutcome rows_outcome(std::vector<Row> rows) {
    ExecOutcome out;
    out.status = ExecOutcome::Status::rows;
    out.rows = std::move(rows);
    return out;
}

const char* kGoldSql =
    "SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id WHERE "
    "e.status = 'Completed'";
const char* kPerturbedSql =
    "SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id WHERE "
    "e.status = 'Complete'";

}  // namespace

TEST_CASE("executing the running example: gold returns rows, the variant returns none") {
    auto& e = env();
    ExecOutcome gold = execute(kGoldSql, e.campus);
    REQUIRE(gold.status == ExecOutcome::Status::rows);
    CHECK(gold.rows.size() == 5);  // Alice, Bob, Carol, Eve, Eve

    ExecOutcome variant = execute(kPerturbedSql, e.campus);
    REQUIRE(variant.status == ExecOutcome::Status::rows);
    CHECK(variant.rows.empty());

    CHECK_FALSE(exec_equivalent(gold, variant));
    CHECK(exec_equivalent(gold, execute(kGoldSql, e.campus)));
}

TEST_CASE("syntax errors surface as error outcomes with the engine message") {
    auto& e = env();
    ExecOutcome bad = execute("SELECT FROM", e.campus);
    CHECK(bad.status == ExecOutcome::Status::error);
    CHECK(!bad.error_message.empty());
}

TEST_CASE("timeouts are encoded, not thrown") {
    auto& e = env();
    // cross-join explosion with a 1ms deadline
    ExecOutcome slow = execute(
        "SELECT COUNT(*) FROM enrollment a, enrollment b, enrollment c, enrollment d, "
        "enrollment e2, enrollment f, enrollment g, enrollment h, enrollment i",
        e.campus, 1);
    CHECK(slow.status == ExecOutcome::Status::timeout);
}

TEST_CASE("execution equivalence semantics") {
    ExecOutcome a = rows_outcome({{SqlValue::integer(1)}, {SqlValue::integer(2)}});
    ExecOutcome b = rows_outcome({{SqlValue::integer(2)}, {SqlValue::integer(1)}});
    ExecOutcome err;
    err.status = ExecOutcome::Status::error;
    err.error_message = "boom";

    SUBCASE("multiset semantics ignore row order by default") {
        CHECK(exec_equivalent(a, b, /*order_sensitive=*/false));
        CHECK_FALSE(exec_equivalent(a, b, /*order_sensitive=*/true));
    }
    SUBCASE("cardinality matters") {
        ExecOutcome c = rows_outcome({{SqlValue::integer(1)}});
        CHECK_FALSE(exec_equivalent(a, c));
        ExecOutcome dup = rows_outcome(
            {{SqlValue::integer(1)}, {SqlValue::integer(1)}, {SqlValue::integer(2)}});
        CHECK_FALSE(exec_equivalent(a, dup));
    }
    SUBCASE("errors and timeouts are never equivalent, even to each other") {
        CHECK_FALSE(exec_equivalent(err, err));
        CHECK_FALSE(exec_equivalent(err, a));
        ExecOutcome timeout;
        timeout.status = ExecOutcome::Status::timeout;
        CHECK_FALSE(exec_equivalent(timeout, err));
        CHECK_FALSE(exec_equivalent(timeout, timeout));
    }
    SUBCASE("NULLs compare equal to each other") {
        ExecOutcome n1 = rows_outcome({{SqlValue::null(), SqlValue::text("x")}});
        ExecOutcome n2 = rows_outcome({{SqlValue::null(), SqlValue::text("x")}});
        CHECK(exec_equivalent(n1, n2));
        ExecOutcome n3 = rows_outcome({{SqlValue::integer(0), SqlValue::text("x")}});
        CHECK_FALSE(exec_equivalent(n1, n3));
    }
    SUBCASE("floats compare with relative tolerance") {
        ExecOutcome f1 = rows_outcome({{SqlValue::real(0.1 + 0.2)}});
        ExecOutcome f2 = rows_outcome({{SqlValue::real(0.3)}});
        CHECK(exec_equivalent(f1, f2));
        ExecOutcome f3 = rows_outcome({{SqlValue::real(0.301)}});
        CHECK_FALSE(exec_equivalent(f2, f3));
        // integer vs real of the same magnitude
        ExecOutcome i1 = rows_outcome({{SqlValue::integer(3)}});
        ExecOutcome r1 = rows_outcome({{SqlValue::real(3.0)}});
        CHECK(exec_equivalent(i1, r1));
    }
}

TEST_CASE("equivalence restricted to rows outcomes is an equivalence relation") {
    std::mt19937_64 rng(11);
    auto random_rows = [&]() {
        std::vector<Row> rows;
        std::size_t n = rng() % 4;
        for (std::size_t i = 0; i < n; ++i) {
            Row row;
            row.push_back(SqlValue::integer(static_cast<std::int64_t>(rng() % 3)));
            row.push_back(SqlValue::text(std::string(1, static_cast<char>('a' + rng() % 2))));
            rows.push_back(std::move(row));
        }
        return rows_outcome(std::move(rows));
    };
    std::vector<ExecOutcome> pool;
    for (int i = 0; i < 40; ++i) pool.push_back(random_rows());
    for (const auto& x : pool) CHECK(exec_equivalent(x, x));  // reflexive
    for (const auto& x : pool) {
        for (const auto& y : pool) {
            CHECK(exec_equivalent(x, y) == exec_equivalent(y, x));  // symmetric
        }
    }
    for (const auto& x : pool) {
        for (const auto& y : pool) {
            if (!exec_equivalent(x, y)) continue;
            for (const auto& z : pool) {
                if (exec_equivalent(y, z)) CHECK(exec_equivalent(x, z));  // transitive
            }
        }
    }
}

namespace {

/// Hand-built confusion fixture matching the reported detector quality:
/// A=1534 samples, 677 actually incorrect, 516 detected of them (161
/// missed), 128 correct samples falsely flagged. 278 of the true
/// positives get fixed; half the false positives get corrupted.
std::vector<SampleRecord> confusion_fixture(int fixed_tp = 278, int corrupted_fp = 64) {
    std::vector<SampleRecord> records;
    int id = 0;
    auto add = [&](bool correct_before, bool flagged, bool correct_after, bool changed) {
        SampleRecord r;
        r.question_id = "q" + std::to_string(id++);
        r.gold_correct_before = correct_before;
        r.flagged = flagged;
        r.gold_correct_after = correct_after;
        r.changed = changed;
        if (flagged) r.final_labels = ErrorLabelSet::of({ErrorType::value_error});
        else r.final_labels = ErrorLabelSet::none();
        records.push_back(std::move(r));
    };
    for (int i = 0; i < 516; ++i) {
        bool fixed = i < fixed_tp;
        add(false, true, fixed, fixed);  // TP
    }
    for (int i = 0; i < 128; ++i) {
        bool corrupted = i < corrupted_fp;
        add(true, true, !corrupted, corrupted);  // FP
    }
    for (int i = 0; i < 161; ++i) add(false, false, false, false);  // FN
    for (int i = 0; i < 729; ++i) add(true, false, true, false);    // TN
    return records;
}

}  // namespace

TEST_CASE("compute_metrics reproduces the reported detector arithmetic") {
    auto records = confusion_fixture();
    EvalReport report = compute_metrics(records, 1534);
    CHECK(report.tp == 516);
    CHECK(report.fp == 128);
    CHECK(report.fn == 161);
    CHECK(report.tn == 729);
    // P = 516/644, R = 516/677
    CHECK(report.precision == doctest::Approx(0.8012).epsilon(0.0001));
    CHECK(report.recall == doctest::Approx(0.7622).epsilon(0.0001));
    CHECK(report.d_f1 == doctest::Approx(0.7812).epsilon(0.0002));
    CHECK(report.d_accuracy == doctest::Approx((516.0 + 729.0) / 1534.0));
    // FR = 278/516
    CHECK(report.fixed_rate == doctest::Approx(0.5388).epsilon(0.0002));
    CHECK(report.corruption_rate == doctest::Approx(0.5));
    CHECK_FALSE(report.fr_undefined);
    CHECK_FALSE(report.cr_undefined);
    // the decomposition identity holds exactly
    CHECK(report.delta_ex_observed == report.delta_ex_reconstructed);
}

TEST_CASE("CR is defined as zero with a flag when no false positives exist") {
    std::vector<SampleRecord> records;
    SampleRecord tp;
    tp.question_id = "a";
    tp.flagged = true;
    tp.gold_correct_before = false;
    tp.gold_correct_after = true;
    tp.changed = true;
    records.push_back(tp);
    EvalReport report = compute_metrics(records, 1);
    CHECK(report.fp == 0);
    CHECK(report.cr_undefined);
    CHECK(report.corruption_rate == 0.0);
}

TEST_CASE("inconsistent records are rejected") {
    SUBCASE("execution changed on an unflagged sample") {
        SampleRecord r;
        r.question_id = "x";
        r.flagged = false;
        r.changed = true;
        CHECK_THROWS_AS(compute_metrics({r}, 1), InconsistentRecords);
    }
    SUBCASE("correctness flipped without an execution change") {
        SampleRecord r;
        r.question_id = "x";
        r.flagged = true;
        r.gold_correct_before = false;
        r.gold_correct_after = true;
        r.changed = false;
        CHECK_THROWS_AS(compute_metrics({r}, 1), InconsistentRecords);
    }
    SUBCASE("total smaller than the record count") {
        SampleRecord r;
        r.question_id = "x";
        CHECK_THROWS_AS(compute_metrics({r, r}, 1), InconsistentRecords);
    }
}

TEST_CASE("delta_ex arithmetic") {
    SUBCASE("no false positives: the gain is tp*fr/A") {
        CHECK(delta_ex(516, 0, 0.5388, 0.7, 1534) ==
              doctest::Approx(516.0 * 0.5388 / 1534.0));
    }
    SUBCASE("direct arithmetic over the decomposition") {
        CHECK(delta_ex(516, 128, 0.5388, 0.5, 1534) == doctest::Approx(0.1395).epsilon(0.001));
    }
    SUBCASE("inverse use: solving for fp*cr from the reported gain") {
        double tp_term = delta_ex(205, 0, 0.7902, 0.0, 1534);  // tp*fr/A
        double implied_fp_cr = (tp_term - 0.0234) * 1534.0;
        CHECK(implied_fp_cr == doctest::Approx(126.1).epsilon(0.004));  // within 0.5
    }
}

TEST_CASE("D-F1 is the harmonic mean of precision and recall") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) {
        int tp = static_cast<int>(rng() % 200);
        int fp = static_cast<int>(rng() % 200);
        int fn = static_cast<int>(rng() % 200);
        int tn = static_cast<int>(rng() % 200);
        if (tp + fp + fn + tn == 0) tn = 1;
        std::vector<SampleRecord> records;
        int id = 0;
        auto add = [&](bool before, bool flagged) {
            SampleRecord r;
            r.question_id = std::to_string(id++);
            r.gold_correct_before = before;
            r.flagged = flagged;
            r.gold_correct_after = before;
            r.changed = false;
            records.push_back(std::move(r));
        };
        for (int k = 0; k < tp; ++k) add(false, true);
        for (int k = 0; k < fp; ++k) add(true, true);
        for (int k = 0; k < fn; ++k) add(false, false);
        for (int k = 0; k < tn; ++k) add(true, false);
        EvalReport report = compute_metrics(records, static_cast<std::int64_t>(records.size()));
        double p = report.precision;
        double r = report.recall;
        double expected = (p + r) == 0.0 ? 0.0 : 2 * p * r / (p + r);
        CHECK(std::abs(report.d_f1 - expected) < 1e-9);
        // metric bounds
        for (double rate : {report.precision, report.recall, report.d_f1, report.d_accuracy,
                            report.ex_before, report.ex_after, report.fixed_rate,
                            report.corruption_rate}) {
            CHECK(rate >= 0.0);
            CHECK(rate <= 1.0);
        }
    }
}

TEST_CASE("decomposition identity on simulated batches") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<SampleRecord> records;
        int n = 1 + static_cast<int>(rng() % 60);
        for (int i = 0; i < n; ++i) {
            SampleRecord r;
            r.question_id = std::to_string(i);
            r.gold_correct_before = rng() % 2 == 0;
            r.flagged = rng() % 2 == 0;
            if (!r.flagged) {
                r.changed = false;
                r.gold_correct_after = r.gold_correct_before;
            } else if (!r.gold_correct_before) {
                // TP: may be fixed (execution change) or left alone
                bool fixed = rng() % 2 == 0;
                bool touched = fixed || rng() % 2 == 0;
                r.changed = touched;
                r.gold_correct_after = fixed;
            } else {
                // FP: any execution change necessarily breaks correctness
                bool corrupted = rng() % 2 == 0;
                r.changed = corrupted;
                r.gold_correct_after = !corrupted;
            }
            records.push_back(std::move(r));
        }
        EvalReport report = compute_metrics(records, n);
        CHECK(report.delta_ex_observed == report.delta_ex_reconstructed);  // exact
        // the rate-based decomposition agrees within floating error
        double rate_based = delta_ex(report.tp, report.fp, report.fixed_rate,
                                     report.corruption_rate, report.total);
        CHECK(std::abs(rate_based - report.delta_ex_reconstructed) < 1e-12);
    }
}

TEST_CASE("TSA groups gold labels by external category") {
    std::vector<SampleRecord> records;
    auto make = [&](ErrorLabelSet gold, ErrorLabelSet pred, int id) {
        SampleRecord r;
        r.question_id = std::to_string(id);
        r.gold_correct_before = false;
        r.flagged = !pred.is_no_error();
        r.gold_correct_after = false;
        r.changed = r.flagged;
        r.final_labels = pred;
        r.gold_labels = gold;
        return r;
    };
    // two value errors: one detected as value, one missed entirely
    records.push_back(make(ErrorLabelSet::of({ErrorType::value_error}),
                           ErrorLabelSet::of({ErrorType::value_error}), 0));
    records.push_back(
        make(ErrorLabelSet::of({ErrorType::value_error}), ErrorLabelSet::none(), 1));
    // one table error detected as such
    records.push_back(make(ErrorLabelSet::of({ErrorType::table_missing}),
                           ErrorLabelSet::of({ErrorType::table_missing}), 2));
    EvalReport report = compute_metrics(records, 3);
    CHECK(report.tsa.at("Value-related Errors") == doctest::Approx(0.5));
    CHECK(report.tsa_support.at("Value-related Errors") == 2);
    CHECK(report.tsa.at("Table-related Errors") == doctest::Approx(1.0));
}

TEST_CASE("report serializations carry the headline numbers") {
    auto records = confusion_fixture();
    EvalReport report = compute_metrics(records, 1534);
    std::string json = report.to_json();
    CHECK(json.find("\"d_f1\"") != std::string::npos);
    CHECK(json.find("\"delta_ex_observed\"") != std::string::npos);
    std::string table = report.to_table();
    CHECK(table.find("D-F1") != std::string::npos);
    CHECK(table.find("0.7812") != std::string::npos);
}
