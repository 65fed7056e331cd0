#include "sqlrefine/backend.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sqlrefine/errors.hpp"

namespace sqlrefine {

namespace {

struct ParsedUrl {
    std::string scheme_host_port;  // "http://host:port"
    std::string path_prefix;       // "/v1" or ""
};

ParsedUrl parse_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw ProtocolError("backend base_url must start with http:// or https://: " + base_url);
    }
    auto path_start = base_url.find('/', scheme_end + 3);
    ParsedUrl out;
    if (path_start == std::string::npos) {
        out.scheme_host_port = base_url;
    } else {
        out.scheme_host_port = base_url.substr(0, path_start);
        out.path_prefix = base_url.substr(path_start);
        while (!out.path_prefix.empty() && out.path_prefix.back() == '/') {
            out.path_prefix.pop_back();
        }
    }
    return out;
}

}  // namespace

HttpChatBackend::HttpChatBackend(BackendConfig config) : config_(std::move(config)) {
    if (!config_.valid()) throw ProtocolError("invalid backend configuration");
}

std::string HttpChatBackend::complete(const std::string& system_prompt,
                                      const std::string& user_content,
                                      const std::vector<std::string>* allowed_tokens) {
    ParsedUrl url = parse_base_url(config_.base_url);

    nlohmann::json body;
    body["model"] = config_.model_name;
    body["messages"] = nlohmann::json::array({
        {{"role", "system"}, {"content", system_prompt}},
        {{"role", "user"}, {"content", user_content}},
    });
    body["temperature"] = config_.sampling.temperature;
    body["max_tokens"] = config_.sampling.max_output_tokens;
    if (allowed_tokens && config_.constrained_decoding) {
        body["allowed_tokens"] = *allowed_tokens;
    }
    std::string payload = body.dump();

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
    }

    std::string last_failure = "no attempt made";
    bool timed_out = false;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            auto delay = std::chrono::milliseconds(config_.retry_backoff_ms * (1 << (attempt - 1)));
            std::this_thread::sleep_for(delay);
        }
        ++calls_;

        httplib::Client client(url.scheme_host_port);
        client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_seconds));
        client.set_read_timeout(std::chrono::duration<double>(config_.timeout_seconds));
        client.set_write_timeout(std::chrono::duration<double>(config_.timeout_seconds));

        auto result = client.Post(url.path_prefix + "/chat/completions", headers, payload,
                                  "application/json");
        if (!result) {
            auto err = result.error();
            timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                        err == httplib::Error::Write;
            last_failure = "transport failure: " + httplib::to_string(err);
            continue;  // transient
        }

        int status = result->status;
        if (status == 401 || status == 403) {
            throw AuthError("backend rejected credentials (HTTP " + std::to_string(status) + ")");
        }
        if (status == 429) {
            double after = 0.0;
            if (result->has_header("Retry-After")) {
                try {
                    after = std::stod(result->get_header_value("Retry-After"));
                } catch (const std::exception&) {
                }
            }
            if (attempt == config_.max_retries) {
                throw RateLimited("backend rate limited after retries", after);
            }
            if (after > 0) {
                std::this_thread::sleep_for(std::chrono::duration<double>(after));
            }
            last_failure = "rate limited";
            continue;
        }
        if (status >= 500) {
            last_failure = "server error HTTP " + std::to_string(status);
            continue;
        }
        if (status != 200) {
            throw ProtocolError("unexpected HTTP status " + std::to_string(status) + ": " +
                                result->body);
        }

        try {
            auto parsed = nlohmann::json::parse(result->body);
            return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const std::exception& e) {
            throw ProtocolError(std::string("malformed completion response: ") + e.what());
        }
    }

    if (timed_out) throw TimeoutError("backend unreachable: " + last_failure);
    throw ProtocolError("backend request failed: " + last_failure);
}

FixedResponder::FixedResponder(std::string default_response)
    : default_response_(std::move(default_response)) {}

void FixedResponder::add_rule(const std::string& needle, const std::string& response) {
    rules_.emplace_back(needle, response);
}

std::string FixedResponder::complete(const std::string& /*system_prompt*/,
                                     const std::string& user_content,
                                     const std::vector<std::string>* /*allowed_tokens*/) {
    ++calls_;
    last_user_content_ = user_content;
    const std::pair<std::string, std::string>* best = nullptr;
    for (const auto& rule : rules_) {
        if (user_content.find(rule.first) == std::string::npos) continue;
        if (!best || rule.first.size() > best->first.size()) best = &rule;
    }
    if (best) return best->second;
    return default_response_;
}

std::string FailingBackend::complete(const std::string&, const std::string&,
                                     const std::vector<std::string>*) {
    ++calls_;
    throw TimeoutError("mock backend configured to fail");
}

namespace {

// Requests are fingerprinted by the unique question text; prompts that for
// some reason carry no known question fall back to the erroneous SQL.
// Question matches win outright: few-shot example sections may embed SQL
// text that collides across fixtures, question texts never do.
const OracleFixture* match_fixture(const std::vector<OracleFixture>& fixtures,
                                   const std::string& user_content) {
    const OracleFixture* best = nullptr;
    std::size_t best_len = 0;
    for (const auto& f : fixtures) {
        if (f.question.empty()) continue;
        if (user_content.find(f.question) == std::string::npos) continue;
        if (f.question.size() > best_len) {
            best = &f;
            best_len = f.question.size();
        }
    }
    if (best) return best;
    for (const auto& f : fixtures) {
        if (f.erroneous_sql.empty()) continue;
        if (user_content.find(f.erroneous_sql) == std::string::npos) continue;
        if (f.erroneous_sql.size() > best_len) {
            best = &f;
            best_len = f.erroneous_sql.size();
        }
    }
    return best;
}

class OracleDetector final : public ChatBackend {
public:
    explicit OracleDetector(std::shared_ptr<const std::vector<OracleFixture>> fixtures)
        : fixtures_(std::move(fixtures)) {}

    std::string complete(const std::string&, const std::string& user_content,
                         const std::vector<std::string>*) override {
        ++calls_;
        const OracleFixture* f = match_fixture(*fixtures_, user_content);
        if (!f) throw ProtocolError("oracle detector: no fixture matches the request");
        const Taxonomy& tax = Taxonomy::instance();
        if (f->labels.is_no_error() || f->labels.labels.empty()) {
            return tax.token_for(std::nullopt).surface;
        }
        std::string out;
        for (ErrorType t : f->labels.labels) {
            if (!out.empty()) out += ' ';
            out += tax.token_for(t).surface;
        }
        return out;
    }
    bool supports_constrained_decoding() const override { return true; }
    std::string name() const override { return "mock:oracle_detector"; }
    int call_count() const override { return calls_; }

private:
    std::shared_ptr<const std::vector<OracleFixture>> fixtures_;
    std::atomic<int> calls_{0};
};

class OracleLocalizer final : public ChatBackend {
public:
    explicit OracleLocalizer(std::shared_ptr<const std::vector<OracleFixture>> fixtures)
        : fixtures_(std::move(fixtures)) {}

    std::string complete(const std::string&, const std::string& user_content,
                         const std::vector<std::string>*) override {
        ++calls_;
        const OracleFixture* f = match_fixture(*fixtures_, user_content);
        if (!f) throw ProtocolError("oracle localizer: no fixture matches the request");
        const Taxonomy& tax = Taxonomy::instance();

        std::string out;
        std::vector<ErrorType> ordered = priority_sorted(f->labels.labels);
        for (std::size_t i = 0; i < ordered.size(); ++i) {
            ErrorType type = ordered[i];
            const OracleMutation* note = nullptr;
            if (!f->mutation_log.empty()) {
                note = i < f->mutation_log.size() ? &f->mutation_log[i] : &f->mutation_log.front();
            }
            out += "[error: " + error_type_name(type) + "]\n";
            std::string nodes = note ? (note->after.empty() ? note->before : note->after) : "";
            out += "nodes: " + nodes + "\n";
            std::string schema;
            if (note && !note->table.empty()) {
                schema = note->table;
                if (!note->column.empty()) schema += "." + note->column;
            }
            out += "schema: " + schema + "\n";
            for (const std::string& slot : tax.guideline(type).slot_names()) {
                if (slot == "nodes") continue;
                std::string value = "unknown";
                if (note) {
                    if (slot == "clause") {
                        value = note->clause.empty() ? "unknown" : note->clause;
                    } else if (slot.find("current") != std::string::npos ||
                               slot.find("redundant") != std::string::npos) {
                        value = note->after.empty() ? "(removed)" : note->after;
                    } else if (slot.find("from_nl") != std::string::npos ||
                               slot.find("missing") != std::string::npos) {
                        value = note->before.empty() ? "unknown" : note->before;
                    } else if (slot == "table") {
                        value = note->table.empty() ? "unknown" : note->table;
                    }
                }
                out += slot + ": " + value + "\n";
            }
            out += "[end]\n";
        }
        return out;
    }
    std::string name() const override { return "mock:oracle_localizer"; }
    int call_count() const override { return calls_; }

private:
    std::shared_ptr<const std::vector<OracleFixture>> fixtures_;
    std::atomic<int> calls_{0};
};

class OracleRefiner final : public ChatBackend {
public:
    explicit OracleRefiner(std::shared_ptr<const std::vector<OracleFixture>> fixtures)
        : fixtures_(std::move(fixtures)) {}

    std::string complete(const std::string&, const std::string& user_content,
                         const std::vector<std::string>*) override {
        ++calls_;
        const OracleFixture* f = match_fixture(*fixtures_, user_content);
        if (!f) throw ProtocolError("oracle refiner: no fixture matches the request");
        if (f->gold_sql.empty()) throw MissingGold(f->question_id);
        return f->gold_sql;
    }
    std::string name() const override { return "mock:oracle_refiner"; }
    int call_count() const override { return calls_; }

private:
    std::shared_ptr<const std::vector<OracleFixture>> fixtures_;
    std::atomic<int> calls_{0};
};

}  // namespace

OracleBackends make_oracle(const std::vector<OracleFixture>& fixtures) {
    auto shared = std::make_shared<const std::vector<OracleFixture>>(fixtures);
    OracleBackends out;
    out.detector = std::make_shared<OracleDetector>(shared);
    out.localizer = std::make_shared<OracleLocalizer>(shared);
    out.refiner = std::make_shared<OracleRefiner>(shared);
    return out;
}

}  // namespace sqlrefine
