#pragma once

#include "silicon/mock_model.hpp"
#include "silicon/probe_cache.hpp"
#include "silicon/probes.hpp"
#include "silicon/prompting.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace silicon::probes {

struct ProbeRequest {
    SubgroupKey key;
    std::string question_id;
};

/// Anything that can answer (persona, question) requests: a mock or an endpoint.
class AnswerSource {
public:
    virtual ~AnswerSource() = default;
    [[nodiscard]] virtual std::string id() const = 0;
    /// One outcome per request, in order.
    virtual std::vector<ProbeOutcome> probe(std::span<const ProbeRequest> requests) = 0;
};

class MockSource final : public AnswerSource {
public:
    MockSource(MockModel mock, const SurveyDataset &dataset) : mock_(std::move(mock)), dataset_(dataset) {}

    [[nodiscard]] std::string id() const override { return mock_.id(); }
    std::vector<ProbeOutcome> probe(std::span<const ProbeRequest> requests) override;

private:
    MockModel mock_;
    const SurveyDataset &dataset_;
};

/// Renders prompts and runs them through probe_batch. In cache-only mode
/// nothing is sent; uncached requests fail and their hashes are collected.
class EndpointSource final : public AnswerSource {
public:
    EndpointSource(EndpointConfig cfg, std::shared_ptr<Transport> transport, ProbeCache &cache,
                   prompting::PersonaTemplate tmpl, const SurveyDataset &dataset, bool cache_only = false,
                   BatchOptions options = {});

    [[nodiscard]] std::string id() const override { return cfg_.id; }
    std::vector<ProbeOutcome> probe(std::span<const ProbeRequest> requests) override;

    [[nodiscard]] const EndpointConfig &config() const { return cfg_; }
    [[nodiscard]] const std::vector<std::string> &missing_hashes() const { return missing_; }
    [[nodiscard]] std::size_t network_requests() const { return network_requests_; }

    [[nodiscard]] std::vector<BatchItem> render(std::span<const ProbeRequest> requests) const;

private:
    EndpointConfig cfg_;
    std::shared_ptr<Transport> transport_;
    ProbeCache &cache_;
    prompting::PersonaTemplate template_;
    const SurveyDataset &dataset_;
    bool cache_only_;
    BatchOptions options_;
    std::vector<std::string> missing_;
    std::size_t network_requests_ = 0;
};

} // namespace silicon::probes
