#include "silicon/probes.hpp"

#include <httplib.h>

#include <cstdlib>

namespace silicon::probes {

HttpTransport::HttpTransport(const EndpointConfig &cfg) : timeout_(cfg.timeout) {
    const auto scheme_end = cfg.base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw std::invalid_argument("base_url needs a scheme: " + cfg.base_url);
    }
    const auto path_begin = cfg.base_url.find('/', scheme_end + 3);
    scheme_host_ = cfg.base_url.substr(0, path_begin);
    if (path_begin != std::string::npos) path_prefix_ = cfg.base_url.substr(path_begin);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    if (!cfg.api_key_env.empty()) {
        const char *token = std::getenv(cfg.api_key_env.c_str());
        if (token == nullptr || *token == '\0') {
            throw std::invalid_argument("environment variable " + cfg.api_key_env + " is not set");
        }
        bearer_ = token;
    }
}

nlohmann::json HttpTransport::post(const std::string &path, const nlohmann::json &body) {
    httplib::Client client(scheme_host_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!bearer_.empty()) headers.emplace("Authorization", "Bearer " + bearer_);

    auto res = client.Post(path_prefix_ + path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()), true);
    if (res->status == 429 || res->status >= 500) {
        throw TransportError("HTTP " + std::to_string(res->status), true);
    }
    if (res->status < 200 || res->status >= 300) {
        throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200), false);
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error &e) {
        throw MalformedResponse(std::string("response is not JSON: ") + e.what());
    }
}

} // namespace silicon::probes
