#include "silicon/answer_source.hpp"

namespace silicon::probes {

std::vector<ProbeOutcome> MockSource::probe(std::span<const ProbeRequest> requests) {
    std::vector<ProbeOutcome> out(requests.size());
    for (std::size_t i = 0; i < requests.size(); ++i) {
        try {
            out[i].record = mock_probe(mock_, requests[i].key, requests[i].question_id, dataset_);
        } catch (const std::exception &e) {
            out[i].error = e.what();
        }
    }
    return out;
}

EndpointSource::EndpointSource(EndpointConfig cfg, std::shared_ptr<Transport> transport, ProbeCache &cache,
                               prompting::PersonaTemplate tmpl, const SurveyDataset &dataset, bool cache_only,
                               BatchOptions options)
    : cfg_(std::move(cfg)), transport_(std::move(transport)), cache_(cache), template_(std::move(tmpl)),
      dataset_(dataset), cache_only_(cache_only), options_(std::move(options)) {
    for (const auto &q : dataset_.questions()) cfg_.validate(q.option_count());
}

std::vector<BatchItem> EndpointSource::render(std::span<const ProbeRequest> requests) const {
    std::vector<BatchItem> items;
    items.reserve(requests.size());
    for (const auto &req : requests) {
        const auto &question = dataset_.question(req.question_id);
        items.push_back(BatchItem{
            .key = req.key,
            .question_id = req.question_id,
            .option_count = question.option_count(),
            .prompt = prompting::render_probe(template_, req.key, question, dataset_.schema(), cfg_.protocol),
        });
    }
    return items;
}

std::vector<ProbeOutcome> EndpointSource::probe(std::span<const ProbeRequest> requests) {
    const auto items = render(requests);
    if (cache_only_) {
        std::vector<ProbeOutcome> out(items.size());
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto hash = probe_hash(cfg_, items[i].prompt);
            if (auto rec = cache_.find(hash)) {
                out[i].from_cache = true;
                if (!rec->distribution) out[i].error = "refusal: no option token among top logprobs (cached)";
                out[i].record = std::move(*rec);
            } else {
                out[i].error = "missing cache entry " + hash;
                missing_.push_back(hash);
            }
        }
        return out;
    }
    auto result = probe_batch(cfg_, *transport_, items, cache_, options_);
    network_requests_ += result.network_requests;
    return std::move(result.outcomes);
}

} // namespace silicon::probes
