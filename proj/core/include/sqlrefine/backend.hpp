#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sqlrefine/taxonomy.hpp"

namespace sqlrefine {

struct SamplingParams {
    double temperature = 0.0;
    int max_output_tokens = 1024;
};

struct BackendConfig {
    std::string base_url;      // e.g. "http://127.0.0.1:8080/v1"
    std::string model_name;
    std::string api_key_env;   // name of the environment variable holding the key
    double timeout_seconds = 30.0;
    int max_retries = 2;
    int retry_backoff_ms = 250;
    bool constrained_decoding = false;
    SamplingParams sampling;

    bool valid() const {
        return timeout_seconds > 0 && max_retries >= 0 && sampling.temperature >= 0;
    }
};

/// Uniform chat-completion surface. The HTTP implementation is the only
/// network I/O in the library; everything else goes through this interface.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;

    /// Returns the first message text. `allowed_tokens`, when given and
    /// supported, restricts decoding to those surfaces; callers must
    /// validate-and-retry against unconstrained backends themselves.
    virtual std::string complete(const std::string& system_prompt, const std::string& user_content,
                                 const std::vector<std::string>* allowed_tokens = nullptr) = 0;

    virtual bool supports_constrained_decoding() const { return false; }
    virtual std::string name() const = 0;
    virtual int call_count() const { return 0; }
};

using BackendPtr = std::shared_ptr<ChatBackend>;

/// OpenAI-compatible chat-completions client. Retries transient transport
/// failures with exponential backoff; never retries authentication errors.
class HttpChatBackend final : public ChatBackend {
public:
    explicit HttpChatBackend(BackendConfig config);

    std::string complete(const std::string& system_prompt, const std::string& user_content,
                         const std::vector<std::string>* allowed_tokens = nullptr) override;
    bool supports_constrained_decoding() const override { return config_.constrained_decoding; }
    std::string name() const override { return "http:" + config_.model_name; }
    int call_count() const override { return calls_; }

private:
    BackendConfig config_;
    std::atomic<int> calls_{0};
};

/// Scripted mock: answers by longest matching needle found in the user
/// content, falling back to a default response.
class FixedResponder final : public ChatBackend {
public:
    explicit FixedResponder(std::string default_response = "");

    void add_rule(const std::string& needle, const std::string& response);

    std::string complete(const std::string& system_prompt, const std::string& user_content,
                         const std::vector<std::string>* allowed_tokens = nullptr) override;
    std::string name() const override { return "mock:fixed"; }
    int call_count() const override { return calls_; }
    std::string last_user_content() const { return last_user_content_; }

private:
    std::string default_response_;
    std::vector<std::pair<std::string, std::string>> rules_;
    std::atomic<int> calls_{0};
    std::string last_user_content_;
};

/// Mock that mirrors an endpoint that always times out.
class FailingBackend final : public ChatBackend {
public:
    std::string complete(const std::string& system_prompt, const std::string& user_content,
                         const std::vector<std::string>* allowed_tokens = nullptr) override;
    std::string name() const override { return "mock:failing"; }
    int call_count() const override { return calls_; }

private:
    std::atomic<int> calls_{0};
};

/// What the oracle mocks need to know about one fixture sample.
struct OracleMutation {
    std::string before;  // gold-side text
    std::string after;   // text now present in the erroneous SQL
    std::string table;
    std::string column;
    std::string clause;  // clause kind name, e.g. "where_clause"
};

struct OracleFixture {
    std::string question_id;
    std::string question;     // must be unique across the fixture set
    std::string gold_sql;
    std::string erroneous_sql;
    ErrorLabelSet labels;     // no-error marker for correct fixtures
    std::vector<OracleMutation> mutation_log;
};

struct OracleBackends {
    BackendPtr detector;
    BackendPtr localizer;
    BackendPtr refiner;
};

/// Deterministic oracle mocks over a fixture set: the detector answers with
/// the exact injected-label tokens, the localizer fills guideline slots from
/// the mutation log, the refiner answers with the gold SQL verbatim.
/// Requests are matched to fixtures by the question text embedded in the
/// prompt. Throws MissingGold when the refiner is asked about a fixture
/// without gold SQL.
OracleBackends make_oracle(const std::vector<OracleFixture>& fixtures);

}  // namespace sqlrefine
