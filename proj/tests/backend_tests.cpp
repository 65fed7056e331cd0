#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sqlrefine/backend.hpp"
#include "sqlrefine/errors.hpp"

using namespace sqlrefine;

TEST_CASE("fixed responder answers by longest matching needle") {
    FixedResponder mock("[ERR]_\xE2\x88\x85");
    mock.add_rule("value problem", "[ERR]_7");
    mock.add_rule("value problem with a table", "[ERR]_7 [ERR]_4");

    CHECK(mock.complete("sys", "nothing matches here") == "[ERR]_\xE2\x88\x85");
    CHECK(mock.complete("sys", "a value problem occurs") == "[ERR]_7");
    CHECK(mock.complete("sys", "a value problem with a table") == "[ERR]_7 [ERR]_4");
    CHECK(mock.call_count() == 3);
    // deterministic: same fingerprint, same response
    CHECK(mock.complete("sys", "a value problem occurs") == "[ERR]_7");
}

TEST_CASE("failing backend mirrors an unreachable endpoint") {
    FailingBackend failing;
    CHECK_THROWS_AS(failing.complete("sys", "anything"), TimeoutError);
    CHECK(failing.call_count() == 1);
}

namespace {

std::vector<OracleFixture> oracle_fixtures() {
    std::vector<OracleFixture> fixtures;
    OracleFixture wrong;
    wrong.question_id = "q1";
    wrong.question = "Find the names of students who have completed the course (q1)";
    wrong.gold_sql = "SELECT name FROM student WHERE status = 'Completed'";
    wrong.erroneous_sql = "SELECT name FROM student WHERE status = 'Complete'";
    wrong.labels = ErrorLabelSet::of({ErrorType::value_error, ErrorType::table_missing});
    wrong.mutation_log.push_back(
        {"Completed", "Complete", "enrollment", "status", "where_clause"});
    fixtures.push_back(wrong);

    OracleFixture correct;
    correct.question_id = "q2";
    correct.question = "List every course name (q2)";
    correct.gold_sql = "SELECT name FROM course";
    correct.erroneous_sql = "SELECT name FROM course";
    correct.labels = ErrorLabelSet::none();
    fixtures.push_back(correct);

    OracleFixture no_gold;
    no_gold.question_id = "q3";
    no_gold.question = "Question without gold (q3)";
    no_gold.labels = ErrorLabelSet::of({ErrorType::value_error});
    fixtures.push_back(no_gold);
    return fixtures;
}

}  // namespace

TEST_CASE("oracle detector returns the injected label tokens") {
    OracleBackends oracle = make_oracle(oracle_fixtures());
    std::string answer = oracle.detector->complete(
        "sys", "... Find the names of students who have completed the course (q1) ...");
    CHECK(answer.find("[ERR]_7") != std::string::npos);
    CHECK(answer.find("[ERR]_6") != std::string::npos);

    CHECK(oracle.detector->complete("sys", "... List every course name (q2) ...") ==
          "[ERR]_\xE2\x88\x85");
    CHECK_THROWS_AS(oracle.detector->complete("sys", "no fixture matches this"), ProtocolError);
    CHECK(oracle.detector->supports_constrained_decoding());
}

TEST_CASE("oracle localizer fills guideline slots from the mutation log") {
    OracleBackends oracle = make_oracle(oracle_fixtures());
    std::string answer = oracle.localizer->complete(
        "sys", "Find the names of students who have completed the course (q1)");
    CHECK(answer.find("[error: table_missing]") != std::string::npos);
    CHECK(answer.find("[error: value_error]") != std::string::npos);
    CHECK(answer.find("nodes: Complete") != std::string::npos);
    CHECK(answer.find("schema: enrollment.status") != std::string::npos);
    CHECK(answer.find("current_value: Complete") != std::string::npos);
    CHECK(answer.find("correct_value_from_nl: Completed") != std::string::npos);
    CHECK(answer.find("clause: where_clause") != std::string::npos);
    CHECK(answer.find("[end]") != std::string::npos);
}

TEST_CASE("oracle refiner answers with the gold SQL verbatim") {
    OracleBackends oracle = make_oracle(oracle_fixtures());
    CHECK(oracle.refiner->complete(
              "sys", "Find the names of students who have completed the course (q1)") ==
          "SELECT name FROM student WHERE status = 'Completed'");
    CHECK_THROWS_AS(oracle.refiner->complete("sys", "Question without gold (q3)"), MissingGold);
}

TEST_CASE("oracle responses are deterministic for identical fingerprints") {
    OracleBackends oracle = make_oracle(oracle_fixtures());
    std::string prompt = "List every course name (q2)";
    std::string first = oracle.detector->complete("s", prompt);
    for (int i = 0; i < 5; ++i) {
        CHECK(oracle.detector->complete("s", prompt) == first);
    }
}

TEST_CASE("http backend speaks the chat-completions protocol") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string last_body;
    std::string last_auth;

    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        last_body = req.body;
        last_auth = req.get_header_value("Authorization");
        auto body = nlohmann::json::parse(req.body);
        std::string user = body["messages"][1]["content"];
        if (user.find("please fail with 500 twice") != std::string::npos && hits <= 2) {
            res.status = 500;
            return;
        }
        if (user.find("please deny") != std::string::npos) {
            res.status = 401;
            return;
        }
        if (user.find("please rate limit") != std::string::npos) {
            res.status = 429;
            res.set_header("Retry-After", "0.01");
            return;
        }
        if (user.find("please answer garbage") != std::string::npos) {
            res.set_content("{not json", "application/json");
            return;
        }
        nlohmann::json reply = {
            {"choices",
             {{{"message", {{"role", "assistant"}, {"content", "[ERR]_7"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });

    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    BackendConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    config.model_name = "test-model";
    config.api_key_env = "SQLREFINE_TEST_KEY";
    config.timeout_seconds = 5;
    config.max_retries = 2;
    config.retry_backoff_ms = 1;
    setenv("SQLREFINE_TEST_KEY", "sk-test", 1);

    SUBCASE("success path returns the first message text") {
        HttpChatBackend backend(config);
        CHECK(backend.complete("sys", "hello") == "[ERR]_7");
        CHECK(last_auth == "Bearer sk-test");
        auto body = nlohmann::json::parse(last_body);
        CHECK(body["model"] == "test-model");
        CHECK(body["messages"][0]["role"] == "system");
        CHECK(body.contains("allowed_tokens") == false);
    }
    SUBCASE("allowed tokens are forwarded when the capability flag is set") {
        BackendConfig constrained = config;
        constrained.constrained_decoding = true;
        HttpChatBackend backend(constrained);
        std::vector<std::string> allowed = {"[ERR]_7", "[ERR]_\xE2\x88\x85"};
        CHECK(backend.complete("sys", "hello", &allowed) == "[ERR]_7");
        auto body = nlohmann::json::parse(last_body);
        REQUIRE(body.contains("allowed_tokens"));
        CHECK(body["allowed_tokens"].size() == 2);
    }
    SUBCASE("transient 500s are retried with backoff") {
        hits = 0;
        HttpChatBackend backend(config);
        CHECK(backend.complete("sys", "please fail with 500 twice") == "[ERR]_7");
        CHECK(hits == 3);
    }
    SUBCASE("authentication errors never retry") {
        hits = 0;
        HttpChatBackend backend(config);
        CHECK_THROWS_AS(backend.complete("sys", "please deny"), AuthError);
        CHECK(hits == 1);
    }
    SUBCASE("persistent rate limiting surfaces RateLimited") {
        HttpChatBackend backend(config);
        CHECK_THROWS_AS(backend.complete("sys", "please rate limit"), RateLimited);
    }
    SUBCASE("malformed completion payloads are protocol errors") {
        HttpChatBackend backend(config);
        CHECK_THROWS_AS(backend.complete("sys", "please answer garbage"), ProtocolError);
    }

    server.stop();
    server_thread.join();
}

TEST_CASE("http backend reports unreachable endpoints after retries") {
    BackendConfig config;
    config.base_url = "http://127.0.0.1:1";  // nothing listens here
    config.model_name = "m";
    config.timeout_seconds = 0.2;
    config.max_retries = 1;
    config.retry_backoff_ms = 1;
    HttpChatBackend backend(config);
    CHECK_THROWS_AS(backend.complete("sys", "x"), BackendError);
    CHECK(backend.call_count() == 2);
}

TEST_CASE("backend config validation") {
    BackendConfig bad;
    bad.timeout_seconds = 0;
    CHECK_FALSE(bad.valid());
    CHECK_THROWS_AS(HttpChatBackend{bad}, ProtocolError);
    BackendConfig negative;
    negative.sampling.temperature = -1;
    CHECK_FALSE(negative.valid());
}

TEST_CASE("transport isolation: only the backend module performs network I/O") {
    namespace fs = std::filesystem;
    const std::string source_root = SQLREFINE_SOURCE_DIR;
    std::vector<std::string> offenders;
    for (const char* dir : {"core/src", "core/include/sqlrefine", "tools"}) {
        for (const auto& entry : fs::recursive_directory_iterator(source_root + "/" + dir)) {
            if (!entry.is_regular_file()) continue;
            std::ifstream in(entry.path());
            std::stringstream buffer;
            buffer << in.rdbuf();
            std::string text = buffer.str();
            bool has_socket_io = text.find("httplib") != std::string::npos ||
                                 text.find("<sys/socket.h>") != std::string::npos;
            if (has_socket_io && entry.path().filename() != "backend.cpp") {
                offenders.push_back(entry.path().string());
            }
        }
    }
    CHECK(offenders.empty());
    for (const auto& path : offenders) MESSAGE(path);
}
