#pragma once

#include "support.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

namespace testing {

inline std::uint64_t fnv1a(const std::string &s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
    return h;
}

/// In-process OpenAI/Together-compatible endpoint returning deterministic
/// log-probabilities derived from the prompt bytes.
class FakeEndpoint {
public:
    FakeEndpoint() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request &req, httplib::Response &res) {
            handle(req, res, /*completions=*/false);
        });
        server_.Post("/v1/completions", [this](const httplib::Request &req, httplib::Response &res) {
            handle(req, res, /*completions=*/true);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeEndpoint() {
        server_.stop();
        thread_.join();
    }
    FakeEndpoint(const FakeEndpoint &) = delete;
    FakeEndpoint &operator=(const FakeEndpoint &) = delete;

    [[nodiscard]] std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
    [[nodiscard]] std::size_t requests() const { return requests_.load(); }
    /// The next `n` requests answer 429.
    void throttle(std::size_t n) { throttle_ = n; }
    std::atomic<bool> require_auth{false};

    static double option_logit(const std::string &prompt, int n) {
        return -static_cast<double>((fnv1a(prompt) >> (3 * n)) % 9) * 0.35;
    }

private:
    void handle(const httplib::Request &req, httplib::Response &res, bool completions) {
        ++requests_;
        if (require_auth && req.get_header_value("Authorization").rfind("Bearer ", 0) != 0) {
            res.status = 401;
            res.set_content("{\"error\":\"unauthorized\"}", "application/json");
            return;
        }
        std::size_t left = throttle_.load();
        while (left > 0 && !throttle_.compare_exchange_weak(left, left - 1)) {
        }
        if (left > 0) {
            res.status = 429;
            res.set_content("{\"error\":\"slow down\"}", "application/json");
            return;
        }
        const auto body = nlohmann::json::parse(req.body);
        nlohmann::json out;
        if (completions) {
            const auto prompt = body.at("prompt").get<std::string>();
            out = {{"choices", {{{"text", prompt}, {"logprobs", echo_logprobs(prompt)}}}}};
        } else if (body.value("echo", false)) {
            const auto &msgs = body.at("messages");
            const auto text = msgs.at(0).at("content").get<std::string>() + "\n" +
                              msgs.at(1).at("content").get<std::string>();
            out = {{"prompt", {{{"text", text}, {"logprobs", echo_logprobs(text)}}}},
                   {"choices", {{{"text", ""}}}}};
        } else {
            std::string persona;
            for (const auto &m : body.at("messages")) persona += m.at("content").get<std::string>() + "\n";
            std::vector<std::pair<std::string, double>> top;
            double z = 0.0;
            for (int n = 1; n <= 5; ++n) {
                top.emplace_back(std::to_string(n), option_logit(persona, n));
                z += std::exp(top.back().second);
            }
            top.emplace_back("I", -3.0);
            z += std::exp(-3.0);
            nlohmann::json entries = nlohmann::json::array();
            nlohmann::json legacy = nlohmann::json::object();
            for (const auto &[tok, logit] : top) {
                entries.push_back({{"token", tok}, {"logprob", logit - std::log(z)}});
                legacy[tok] = logit - std::log(z);
            }
            if (body.contains("top_logprobs")) {
                out = {{"choices",
                        {{{"message", {{"role", "assistant"}, {"content", "1"}}},
                          {"logprobs", {{"content", {{{"token", "1"}, {"logprob", -0.1}, {"top_logprobs", entries}}}}}}}}}};
            } else {
                out = {{"choices", {{{"text", "1"}, {"logprobs", {{"tokens", {"1"}}, {"top_logprobs", {legacy}}}}}}}};
            }
        }
        res.set_content(out.dump(), "application/json");
    }

    /// Splits "<context>The answer would be N" into three echoed tokens.
    static nlohmann::json echo_logprobs(const std::string &text) {
        const std::string stem = "The answer would be";
        const auto at = text.rfind(stem);
        const auto context = text.substr(0, at);
        const auto digit = text.substr(at + stem.size());
        const int n = std::stoi(digit);
        return {{"tokens", {context, stem, digit}},
                {"token_logprobs", {nullptr, -0.25, option_logit(context, n)}}};
    }

    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    std::atomic<std::size_t> requests_{0};
    std::atomic<std::size_t> throttle_{0};
};

} // namespace testing
