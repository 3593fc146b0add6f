#pragma once

#include "silicon/prompting.hpp"
#include "silicon/survey.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace silicon::probes {

using prompting::Protocol;
using prompting::RenderedPrompt;

/// Transport-level failure. Transient failures (timeouts, 429, 5xx) are retried.
class TransportError : public std::runtime_error {
public:
    TransportError(const std::string &what, bool transient) : std::runtime_error(what), transient_(transient) {}
    [[nodiscard]] bool transient() const { return transient_; }

private:
    bool transient_;
};

/// The endpoint answered, but not in the expected shape.
class MalformedResponse : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Wire dialect. See README "Endpoint wire formats".
enum class ApiVariant { openai, together };

struct EndpointConfig {
    std::string id;
    std::string base_url;
    std::string model;
    Protocol protocol = Protocol::first_token_logprobs;
    ApiVariant variant = ApiVariant::openai;
    /// Name of the environment variable holding the bearer token.
    std::string api_key_env;
    std::chrono::milliseconds timeout{60'000};
    int max_retries = 3;
    int max_parallel = 4;
    int top_logprobs = 10;
    /// Probes whose recognized option mass falls below this are flagged as refusals.
    double refusal_floor = 0.5;
    std::chrono::milliseconds backoff_initial{500};

    static EndpointConfig from_json(const nlohmann::json &doc);
    static EndpointConfig load(const std::filesystem::path &path);
    [[nodiscard]] nlohmann::json to_json() const;
    /// Throws std::invalid_argument when the config cannot serve a K-option question.
    void validate(std::size_t option_count) const;
};

[[nodiscard]] std::string to_string(ApiVariant v);
[[nodiscard]] ApiVariant parse_variant(const std::string &text);

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
};

struct ProbeRecord {
    std::string hash;
    std::string endpoint_id;
    SubgroupKey key;
    std::string question_id;
    Protocol protocol = Protocol::first_token_logprobs;
    std::string prompt_digest;
    /// Response body (protocol 1) or array of K response bodies (protocol 2).
    nlohmann::json raw_response;
    /// Absent only for refusals with no recognized option token.
    std::optional<AnswerDistribution> distribution;
    double numeric_mass = 1.0;
    bool refusal = false;
    int attempts = 0;
    std::string timestamp;
};

/// A probe that produced no usable distribution; the record is kept.
class RefusalError : public std::runtime_error {
public:
    RefusalError(const std::string &what, ProbeRecord record)
        : std::runtime_error(what), record_(std::move(record)) {}
    [[nodiscard]] const ProbeRecord &record() const { return record_; }

private:
    ProbeRecord record_;
};

// ---------------------------------------------------------------------------
// Pure probe math

/// Option index for a top-token string: whitespace and trailing periods are
/// stripped, then the remainder must equal "1".."K".
[[nodiscard]] std::optional<int> match_option_token(std::string_view token, std::size_t option_count);

struct FirstTokenReading {
    /// Exponentiated probability per option (not renormalized).
    std::vector<double> option_mass;
    /// Sum of option_mass, capped at 1.
    double numeric_mass = 0.0;
};

/// Collects per-option probability from a top-token list. Repeated matches
/// for one option (e.g. "4" and " 4") add up.
[[nodiscard]] FirstTokenReading read_first_token(std::span<const TokenLogprob> top, std::size_t option_count);

/// exp(score_n) / sum_m exp(score_m), evaluated after subtracting the max score.
[[nodiscard]] AnswerDistribution normalize_scores(const std::string &question_id, std::span<const double> scores);

// ---------------------------------------------------------------------------
// Wire formats

[[nodiscard]] nlohmann::json first_token_request(const EndpointConfig &cfg, const RenderedPrompt &prompt);
[[nodiscard]] std::vector<TokenLogprob> parse_first_token_response(const nlohmann::json &response);
[[nodiscard]] nlohmann::json constrained_request(const EndpointConfig &cfg, const RenderedPrompt &prompt,
                                                 std::size_t option_position);
/// Sum of log-probabilities of the tokens covering the last occurrence of
/// `assistant_text` in the echoed prompt.
[[nodiscard]] double parse_constrained_score(const nlohmann::json &response, const std::string &assistant_text);
/// Request path (appended to base_url) for a protocol under a variant.
[[nodiscard]] std::string request_path(const EndpointConfig &cfg);

/// Posts JSON to an endpoint-relative path and returns the parsed body.
class Transport {
public:
    virtual ~Transport() = default;
    virtual nlohmann::json post(const std::string &path, const nlohmann::json &body) = 0;
};

/// cpp-httplib backed transport (http and https).
class HttpTransport final : public Transport {
public:
    explicit HttpTransport(const EndpointConfig &cfg);
    nlohmann::json post(const std::string &path, const nlohmann::json &body) override;

private:
    std::string scheme_host_;
    std::string path_prefix_;
    std::string bearer_;
    std::chrono::milliseconds timeout_;
};

/// Counts requests and retries issued through a transport.
struct CallStats {
    std::atomic<std::size_t> requests{0};
    std::atomic<std::size_t> retries{0};
};

/// Retries transient TransportErrors with exponential backoff.
[[nodiscard]] nlohmann::json post_with_retry(const EndpointConfig &cfg, Transport &transport, const std::string &path,
                                             const nlohmann::json &body, CallStats *stats = nullptr,
                                             int *attempts = nullptr);

/// One completion with top-logprobs; reads the first generated position.
/// Throws RefusalError if no option token appears among the top tokens.
[[nodiscard]] ProbeRecord probe_first_token(const EndpointConfig &cfg, Transport &transport,
                                            const RenderedPrompt &prompt, std::size_t option_count,
                                            const std::string &question_id, CallStats *stats = nullptr);
/// K scoring requests, one per forced assistant answer.
[[nodiscard]] ProbeRecord probe_constrained(const EndpointConfig &cfg, Transport &transport,
                                            const RenderedPrompt &prompt, std::size_t option_count,
                                            const std::string &question_id, CallStats *stats = nullptr);

/// Rebuilds the derived distribution from a record's raw response.
[[nodiscard]] ProbeRecord recompute(const ProbeRecord &record, std::size_t option_count, double refusal_floor);

// ---------------------------------------------------------------------------
// Batch execution

/// Cache key of a probe: endpoint identity, protocol and prompt bytes.
[[nodiscard]] std::string probe_hash(const EndpointConfig &cfg, const RenderedPrompt &prompt);
[[nodiscard]] std::string prompt_digest(const RenderedPrompt &prompt);

class ProbeCache;

struct BatchItem {
    SubgroupKey key;
    std::string question_id;
    std::size_t option_count = 0;
    RenderedPrompt prompt;
};

struct ProbeOutcome {
    std::optional<ProbeRecord> record;
    std::string error;
    bool from_cache = false;

    [[nodiscard]] bool ok() const { return record && record->distribution.has_value(); }
};

struct BatchResult {
    std::vector<ProbeOutcome> outcomes;
    std::size_t cache_hits = 0;
    std::size_t network_requests = 0;
    std::size_t retries = 0;
    [[nodiscard]] std::size_t failures() const;
};

struct BatchOptions {
    /// Called from worker threads; must be thread-safe.
    std::function<void(const std::string &)> log;
    /// Overrides the record timestamp (tests); default is the UTC wall clock.
    std::function<std::string()> clock;
};

/// Runs every item, consulting `cache` first. Output order matches input.
/// Per-item failures are reported in the outcome; only cache I/O errors throw.
[[nodiscard]] BatchResult probe_batch(const EndpointConfig &cfg, Transport &transport, std::span<const BatchItem> items,
                                      ProbeCache &cache, const BatchOptions &options = {});

[[nodiscard]] std::string utc_timestamp();

} // namespace silicon::probes
