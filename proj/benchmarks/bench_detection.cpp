#include <benchmark/benchmark.h>

#include <filesystem>

#include "sqlrefine/db.hpp"
#include "sqlrefine/detection.hpp"
#include "sqlrefine/execution.hpp"
#include "sqlrefine/parser.hpp"
#include "sqlrefine/schema_graph.hpp"

namespace {

using namespace sqlrefine;

struct BenchDb {
    std::string path;
    SchemaGraph schema;
    Db db;
    QuestionSchemaStructure qss;

    BenchDb() {
        path = (std::filesystem::temp_directory_path() / "sqlrefine_bench.sqlite").string();
        if (std::filesystem::exists(path)) std::filesystem::remove(path);
        {
            Db writer = Db::open_readwrite(path);
            writer.exec(
                "CREATE TABLE student (id INTEGER PRIMARY KEY, name TEXT, age INTEGER);"
                "CREATE TABLE enrollment (id INTEGER PRIMARY KEY, student_id INTEGER "
                "REFERENCES student(id), status TEXT);"
                "INSERT INTO student VALUES (1,'Alice',22),(2,'Bob',20),(3,'Carol',25);"
                "INSERT INTO enrollment VALUES "
                "(1,1,'Completed'),(2,2,'Active'),(3,3,'Withdrawn'),(4,1,'Active');");
        }
        schema = introspect_schema(path);
        db = Db::open_readonly(path);
        qss = build_qss("names of students who completed", schema, std::nullopt, {});
    }
};

BenchDb& bench_db() {
    static BenchDb instance;
    return instance;
}

const char* kErroneousSql =
    "SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id WHERE "
    "e.status = 'Complete'";

void BM_StaticDetect(benchmark::State& state) {
    BenchDb& env = bench_db();
    SqlAst ast = parse_sql(kErroneousSql);
    ExecOutcome feedback = execute(kErroneousSql, env.db);
    for (auto _ : state) {
        benchmark::DoNotOptimize(static_detect(&ast, env.qss, &env.db, feedback));
    }
}
BENCHMARK(BM_StaticDetect);

void BM_SerializeMschema(benchmark::State& state) {
    BenchDb& env = bench_db();
    for (auto _ : state) {
        benchmark::DoNotOptimize(serialize_mschema(env.qss));
    }
}
BENCHMARK(BM_SerializeMschema);

void BM_BuildDetectionInput(benchmark::State& state) {
    BenchDb& env = bench_db();
    SqlAst ast = parse_sql(kErroneousSql);
    ExecOutcome feedback = execute(kErroneousSql, env.db);
    DetectionSample sample{"bench", "names of students who completed", kErroneousSql};
    ErrorLabelSet rules = static_detect(&ast, env.qss, &env.db, feedback);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            build_detection_input(sample, env.qss, &ast, feedback, rules).serialized());
    }
}
BENCHMARK(BM_BuildDetectionInput);

void BM_ExecuteAndCompare(benchmark::State& state) {
    BenchDb& env = bench_db();
    ExecOutcome gold = execute(
        "SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id WHERE "
        "e.status = 'Completed'",
        env.db);
    for (auto _ : state) {
        ExecOutcome variant = execute(kErroneousSql, env.db);
        benchmark::DoNotOptimize(exec_equivalent(variant, gold));
    }
}
BENCHMARK(BM_ExecuteAndCompare);

}  // namespace
