#include "silicon/probes.hpp"

#include "silicon/digest.hpp"
#include "silicon/probe_cache.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

namespace silicon::probes {

using nlohmann::json;

// ---------------------------------------------------------------------------
// EndpointConfig

std::string to_string(ApiVariant v) { return v == ApiVariant::together ? "together" : "openai"; }

ApiVariant parse_variant(const std::string &text) {
    if (text == "openai") return ApiVariant::openai;
    if (text == "together") return ApiVariant::together;
    throw std::invalid_argument("unknown API variant '" + text + "' (expected openai|together)");
}

EndpointConfig EndpointConfig::from_json(const json &doc) {
    EndpointConfig cfg;
    try {
        cfg.id = doc.at("id").get<std::string>();
        cfg.base_url = doc.at("base_url").get<std::string>();
        cfg.model = doc.at("model").get<std::string>();
        cfg.protocol = prompting::parse_protocol(doc.value("protocol", "first_token_logprobs"));
        cfg.variant = parse_variant(doc.value("variant", "openai"));
        cfg.api_key_env = doc.value("api_key_env", "");
        cfg.timeout = std::chrono::milliseconds(doc.value("timeout_ms", 60'000));
        cfg.max_retries = doc.value("max_retries", 3);
        cfg.max_parallel = doc.value("max_parallel", 4);
        cfg.top_logprobs = doc.value("top_logprobs", 10);
        cfg.refusal_floor = doc.value("refusal_floor", 0.5);
        cfg.backoff_initial = std::chrono::milliseconds(doc.value("backoff_initial_ms", 500));
    } catch (const json::exception &e) {
        throw std::invalid_argument(std::string("invalid endpoint config: ") + e.what());
    }
    if (cfg.id.empty() || cfg.base_url.empty() || cfg.model.empty()) {
        throw std::invalid_argument("endpoint config needs non-empty id, base_url and model");
    }
    if (cfg.max_retries < 0 || cfg.max_parallel < 1 || cfg.timeout.count() <= 0) {
        throw std::invalid_argument("endpoint config: max_retries >= 0, max_parallel >= 1, timeout_ms > 0");
    }
    if (!(cfg.refusal_floor >= 0.0 && cfg.refusal_floor <= 1.0)) {
        throw std::invalid_argument("endpoint config: refusal_floor must lie in [0,1]");
    }
    return cfg;
}

EndpointConfig EndpointConfig::load(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("endpoint file not found: " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error &e) {
        throw std::invalid_argument("cannot parse endpoint file " + path.string() + ": " + e.what());
    }
}

json EndpointConfig::to_json() const {
    return json{
        {"id", id},
        {"base_url", base_url},
        {"model", model},
        {"protocol", prompting::to_string(protocol)},
        {"variant", probes::to_string(variant)},
        {"api_key_env", api_key_env},
        {"timeout_ms", timeout.count()},
        {"max_retries", max_retries},
        {"max_parallel", max_parallel},
        {"top_logprobs", top_logprobs},
        {"refusal_floor", refusal_floor},
        {"backoff_initial_ms", backoff_initial.count()},
    };
}

void EndpointConfig::validate(std::size_t option_count) const {
    if (protocol == Protocol::first_token_logprobs && top_logprobs < static_cast<int>(option_count)) {
        throw std::invalid_argument("endpoint '" + id + "': top_logprobs (" + std::to_string(top_logprobs) +
                                    ") must be >= option count (" + std::to_string(option_count) + ")");
    }
}

// ---------------------------------------------------------------------------
// Probe math

std::optional<int> match_option_token(std::string_view token, std::size_t option_count) {
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
    while (!token.empty() && is_space(token.front())) token.remove_prefix(1);
    while (!token.empty() && (is_space(token.back()) || token.back() == '.')) token.remove_suffix(1);
    if (token.empty() || token.size() > 3) return std::nullopt;
    int value = 0;
    for (char c : token) {
        if (c < '0' || c > '9') return std::nullopt;
        value = value * 10 + (c - '0');
    }
    if (token.front() == '0' || value < 1 || static_cast<std::size_t>(value) > option_count) return std::nullopt;
    return value;
}

FirstTokenReading read_first_token(std::span<const TokenLogprob> top, std::size_t option_count) {
    FirstTokenReading out;
    out.option_mass.assign(option_count, 0.0);
    for (const auto &t : top) {
        auto option = match_option_token(t.token, option_count);
        if (!option) continue;
        out.option_mass[static_cast<std::size_t>(*option - 1)] += std::exp(t.logprob);
    }
    for (double m : out.option_mass) out.numeric_mass += m;
    out.numeric_mass = std::min(out.numeric_mass, 1.0);
    return out;
}

AnswerDistribution normalize_scores(const std::string &question_id, std::span<const double> scores) {
    if (scores.empty()) throw std::invalid_argument("no scores to normalize");
    double max_score = -std::numeric_limits<double>::infinity();
    for (double s : scores) {
        if (std::isnan(s)) throw std::invalid_argument("NaN score");
        max_score = std::max(max_score, s);
    }
    if (!std::isfinite(max_score)) throw std::invalid_argument("all scores are -inf");
    std::vector<double> mass(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) mass[i] = std::exp(scores[i] - max_score);
    return AnswerDistribution::from_masses(question_id, mass, 1.0);
}

// ---------------------------------------------------------------------------
// Wire formats

std::string request_path(const EndpointConfig &cfg) {
    if (cfg.protocol == Protocol::constrained_completion && cfg.variant == ApiVariant::openai) {
        return "/completions";
    }
    return "/chat/completions";
}

json first_token_request(const EndpointConfig &cfg, const RenderedPrompt &prompt) {
    json messages = json::array();
    if (prompt.system_text) messages.push_back({{"role", "system"}, {"content", *prompt.system_text}});
    messages.push_back({{"role", "user"}, {"content", prompt.user_text}});
    json body{{"model", cfg.model}, {"messages", messages}, {"max_tokens", 1}};
    if (cfg.variant == ApiVariant::openai) {
        body["logprobs"] = true;
        body["top_logprobs"] = cfg.top_logprobs;
    } else {
        body["logprobs"] = cfg.top_logprobs;
    }
    return body;
}

std::vector<TokenLogprob> parse_first_token_response(const json &response) {
    try {
        const auto &logprobs = response.at("choices").at(0).at("logprobs");
        std::vector<TokenLogprob> out;
        if (logprobs.contains("content")) {
            // OpenAI chat: content[0].top_logprobs = [{token, logprob}, ...]
            for (const auto &entry : logprobs.at("content").at(0).at("top_logprobs")) {
                out.push_back({entry.at("token").get<std::string>(), entry.at("logprob").get<double>()});
            }
        } else {
            // Legacy/Together: top_logprobs[0] = {token: logprob, ...}
            for (const auto &[token, lp] : logprobs.at("top_logprobs").at(0).items()) {
                out.push_back({token, lp.get<double>()});
            }
        }
        return out;
    } catch (const json::exception &e) {
        throw MalformedResponse(std::string("first-token response lacks top logprobs: ") + e.what());
    }
}

json constrained_request(const EndpointConfig &cfg, const RenderedPrompt &prompt, std::size_t option_position) {
    const auto &assistant = prompt.constrained_assistant_texts.at(option_position);
    if (cfg.variant == ApiVariant::together) {
        return json{
            {"model", cfg.model},
            {"messages",
             json::array({{{"role", "user"}, {"content", prompt.user_text}},
                          {{"role", "assistant"}, {"content", assistant}}})},
            {"max_tokens", 1},
            {"logprobs", 1},
            {"echo", true},
        };
    }
    return json{
        {"model", cfg.model},
        {"prompt", prompt.user_text + "\n" + assistant},
        {"max_tokens", 0},
        {"logprobs", 0},
        {"echo", true},
    };
}

double parse_constrained_score(const json &response, const std::string &assistant_text) {
    const json *logprobs = nullptr;
    if (response.contains("prompt") && response["prompt"].is_array() && !response["prompt"].empty() &&
        response["prompt"][0].contains("logprobs")) {
        logprobs = &response["prompt"][0]["logprobs"];
    } else if (response.contains("choices") && response["choices"].is_array() && !response["choices"].empty() &&
               response["choices"][0].contains("logprobs")) {
        logprobs = &response["choices"][0]["logprobs"];
    }
    if (logprobs == nullptr || !logprobs->is_object() || !logprobs->contains("tokens") ||
        !logprobs->contains("token_logprobs")) {
        throw MalformedResponse("endpoint did not return prompt-token log-probabilities");
    }
    const auto &tokens = (*logprobs)["tokens"];
    const auto &lps = (*logprobs)["token_logprobs"];
    if (!tokens.is_array() || !lps.is_array() || tokens.size() != lps.size()) {
        throw MalformedResponse("token and logprob arrays differ in length");
    }
    std::string text;
    std::vector<std::size_t> starts;
    for (const auto &t : tokens) {
        starts.push_back(text.size());
        text += t.get<std::string>();
    }
    const auto begin = text.rfind(assistant_text);
    if (begin == std::string::npos) {
        throw MalformedResponse("echoed prompt does not contain '" + assistant_text + "'");
    }
    const auto end = begin + assistant_text.size();
    double score = 0.0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto tok_begin = starts[i];
        const auto tok_end = tok_begin + tokens[i].get_ref<const std::string &>().size();
        if (tok_end <= begin || tok_begin >= end) continue;
        if (!lps[i].is_number()) throw MalformedResponse("missing log-probability inside the assistant span");
        score += lps[i].get<double>();
    }
    return score;
}

// ---------------------------------------------------------------------------
// Probing

json post_with_retry(const EndpointConfig &cfg, Transport &transport, const std::string &path, const json &body,
                     CallStats *stats, int *attempts) {
    for (int attempt = 0;; ++attempt) {
        if (attempts) ++*attempts;
        if (stats) ++stats->requests;
        try {
            return transport.post(path, body);
        } catch (const TransportError &e) {
            if (!e.transient() || attempt >= cfg.max_retries) throw;
            if (stats) ++stats->retries;
            std::this_thread::sleep_for(cfg.backoff_initial * (1LL << std::min(attempt, 20)));
        }
    }
}

namespace {

ProbeRecord first_token_record(const std::string &question_id, std::size_t option_count, double refusal_floor,
                               json raw) {
    ProbeRecord rec;
    rec.question_id = question_id;
    rec.protocol = Protocol::first_token_logprobs;
    const auto top = parse_first_token_response(raw);
    rec.raw_response = std::move(raw);
    const auto reading = read_first_token(top, option_count);
    rec.numeric_mass = reading.numeric_mass;
    rec.refusal = reading.numeric_mass < refusal_floor;
    if (reading.numeric_mass > 0.0) {
        rec.distribution = AnswerDistribution::from_masses(question_id, reading.option_mass, 1.0);
    }
    return rec;
}

ProbeRecord constrained_record(const std::string &question_id, std::size_t option_count, json raw) {
    if (!raw.is_array() || raw.size() != option_count) {
        throw MalformedResponse("constrained probe needs one response per option");
    }
    std::vector<double> scores;
    for (std::size_t n = 0; n < option_count; ++n) {
        scores.push_back(parse_constrained_score(raw[n], prompting::constrained_answer_text(static_cast<int>(n + 1))));
    }
    ProbeRecord rec;
    rec.question_id = question_id;
    rec.protocol = Protocol::constrained_completion;
    rec.raw_response = std::move(raw);
    rec.distribution = normalize_scores(question_id, scores);
    rec.numeric_mass = 1.0;
    return rec;
}

} // namespace

ProbeRecord probe_first_token(const EndpointConfig &cfg, Transport &transport, const RenderedPrompt &prompt,
                              std::size_t option_count, const std::string &question_id, CallStats *stats) {
    if (prompt.protocol != Protocol::first_token_logprobs) {
        throw std::invalid_argument("probe_first_token needs a first-token prompt");
    }
    cfg.validate(option_count);
    int attempts = 0;
    auto raw = post_with_retry(cfg, transport, request_path(cfg), first_token_request(cfg, prompt), stats, &attempts);
    auto rec = first_token_record(question_id, option_count, cfg.refusal_floor, std::move(raw));
    rec.endpoint_id = cfg.id;
    rec.prompt_digest = prompt_digest(prompt);
    rec.hash = probe_hash(cfg, prompt);
    rec.attempts = attempts;
    if (!rec.distribution) throw RefusalError("no option token among top logprobs", std::move(rec));
    return rec;
}

ProbeRecord probe_constrained(const EndpointConfig &cfg, Transport &transport, const RenderedPrompt &prompt,
                              std::size_t option_count, const std::string &question_id, CallStats *stats) {
    if (prompt.protocol != Protocol::constrained_completion ||
        prompt.constrained_assistant_texts.size() != option_count) {
        throw std::invalid_argument("probe_constrained needs a constrained prompt with one text per option");
    }
    int attempts = 0;
    json raw = json::array();
    for (std::size_t n = 0; n < option_count; ++n) {
        raw.push_back(post_with_retry(cfg, transport, request_path(cfg), constrained_request(cfg, prompt, n), stats,
                                      &attempts));
    }
    auto rec = constrained_record(question_id, option_count, std::move(raw));
    rec.endpoint_id = cfg.id;
    rec.prompt_digest = prompt_digest(prompt);
    rec.hash = probe_hash(cfg, prompt);
    rec.attempts = attempts;
    return rec;
}

ProbeRecord recompute(const ProbeRecord &record, std::size_t option_count, double refusal_floor) {
    ProbeRecord fresh = record.protocol == Protocol::first_token_logprobs
                            ? first_token_record(record.question_id, option_count, refusal_floor, record.raw_response)
                            : constrained_record(record.question_id, option_count, record.raw_response);
    ProbeRecord out = record;
    out.distribution = std::move(fresh.distribution);
    out.numeric_mass = fresh.numeric_mass;
    out.refusal = fresh.refusal;
    return out;
}

// ---------------------------------------------------------------------------
// Batch

std::string prompt_digest(const RenderedPrompt &prompt) {
    json doc{
        {"system", prompt.system_text ? json(*prompt.system_text) : json(nullptr)},
        {"user", prompt.user_text},
        {"assistant", prompt.constrained_assistant_texts},
    };
    return sha256_hex(doc.dump());
}

std::string probe_hash(const EndpointConfig &cfg, const RenderedPrompt &prompt) {
    json doc{
        {"endpoint", cfg.id},
        {"base_url", cfg.base_url},
        {"model", cfg.model},
        {"variant", to_string(cfg.variant)},
        {"protocol", prompting::to_string(prompt.protocol)},
        {"top_logprobs", prompt.protocol == Protocol::first_token_logprobs ? cfg.top_logprobs : 0},
        {"prompt", prompt_digest(prompt)},
    };
    return sha256_hex(doc.dump());
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::size_t BatchResult::failures() const {
    return static_cast<std::size_t>(std::count_if(outcomes.begin(), outcomes.end(), [](const auto &o) { return !o.ok(); }));
}

BatchResult probe_batch(const EndpointConfig &cfg, Transport &transport, std::span<const BatchItem> items,
                        ProbeCache &cache, const BatchOptions &options) {
    BatchResult result;
    result.outcomes.resize(items.size());
    std::vector<std::size_t> misses;
    std::vector<std::string> hashes(items.size());

    for (std::size_t i = 0; i < items.size(); ++i) {
        hashes[i] = probe_hash(cfg, items[i].prompt);
        if (auto cached = cache.find(hashes[i])) {
            auto &out = result.outcomes[i];
            out.from_cache = true;
            if (!cached->distribution) out.error = "refusal: no option token among top logprobs (cached)";
            out.record = std::move(*cached);
            ++result.cache_hits;
        } else {
            misses.push_back(i);
        }
    }
    if (misses.empty()) return result;

    CallStats stats;
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr cache_failure;
    const auto clock = options.clock ? options.clock : utc_timestamp;

    auto run_one = [&](std::size_t i) {
        const auto &item = items[i];
        auto &out = result.outcomes[i];
        auto finish = [&](ProbeRecord rec) {
            rec.key = item.key;
            rec.question_id = item.question_id;
            rec.timestamp = clock();
            cache.append(rec);
            const int expected = rec.protocol == Protocol::constrained_completion ? static_cast<int>(item.option_count) : 1;
            if (options.log && rec.attempts > expected) {
                options.log("probe " + item.key.to_string() + " / " + item.question_id + " needed " +
                            std::to_string(rec.attempts) + " attempts");
            }
            out.record = std::move(rec);
        };
        try {
            if (item.prompt.protocol != cfg.protocol) {
                throw std::invalid_argument("prompt protocol does not match endpoint protocol");
            }
            if (cfg.protocol == Protocol::first_token_logprobs) {
                finish(probe_first_token(cfg, transport, item.prompt, item.option_count, item.question_id, &stats));
            } else {
                finish(probe_constrained(cfg, transport, item.prompt, item.option_count, item.question_id, &stats));
            }
        } catch (const RefusalError &e) {
            out.error = e.what();
            try {
                finish(e.record());
            } catch (const CacheError &) {
                std::lock_guard lock(error_mutex);
                if (!cache_failure) cache_failure = std::current_exception();
            }
        } catch (const CacheError &) {
            std::lock_guard lock(error_mutex);
            if (!cache_failure) cache_failure = std::current_exception();
        } catch (const std::exception &e) {
            out.error = e.what();
            if (options.log) options.log("probe " + item.key.to_string() + " / " + item.question_id + " failed: " + e.what());
        }
    };

    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.max_parallel), misses.size());
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t n = next++; n < misses.size(); n = next++) run_one(misses[n]);
            });
        }
    }
    if (cache_failure) std::rethrow_exception(cache_failure);
    result.network_requests = stats.requests.load();
    result.retries = stats.retries.load();
    return result;
}

} // namespace silicon::probes
