#include "silicon/mock_model.hpp"

#include "silicon/digest.hpp"
#include "silicon/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace silicon::probes {

namespace {

std::string format_gamma(double gamma) {
    std::ostringstream out;
    out << gamma;
    return out.str();
}

} // namespace

MockModel MockModel::parse(const std::string &spec) {
    MockModel m;
    if (spec == "empirical-oracle") {
        m.kind = MockKind::empirical_oracle;
    } else if (spec == "mode") {
        m.kind = MockKind::mode;
    } else if (spec == "uniform") {
        m.kind = MockKind::uniform;
    } else if (spec.rfind("sharpened", 0) == 0) {
        m.kind = MockKind::sharpened;
        m.gamma = 3.0;
        if (spec.size() > 9) {
            if (spec[9] != ':') throw std::invalid_argument("unknown mock '" + spec + "'");
            std::size_t used = 0;
            const auto arg = spec.substr(10);
            try {
                m.gamma = std::stod(arg, &used);
            } catch (const std::exception &) {
                used = 0;
            }
            if (used == 0 || used != arg.size()) throw std::invalid_argument("bad sharpening exponent in '" + spec + "'");
        }
        if (!(m.gamma >= 1.0)) throw std::invalid_argument("sharpening exponent must be >= 1");
    } else if (spec.rfind("fixed:", 0) == 0) {
        m.kind = MockKind::fixed;
        const std::filesystem::path path = spec.substr(6);
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("fixed mock table not found: " + path.string());
        const auto doc = nlohmann::json::parse(in);
        for (const auto &[qid, by_key] : doc.items()) {
            for (const auto &[key, probs] : by_key.items()) {
                m.table[qid][key] = probs.get<std::vector<double>>();
            }
        }
    } else {
        throw std::invalid_argument("unknown mock '" + spec + "'");
    }
    return m;
}

std::string MockModel::id() const {
    switch (kind) {
    case MockKind::empirical_oracle:
        return "mock:empirical-oracle";
    case MockKind::mode:
        return "mock:mode";
    case MockKind::sharpened:
        return "mock:sharpened:" + format_gamma(gamma);
    case MockKind::uniform:
        return "mock:uniform";
    case MockKind::fixed:
        return "mock:fixed";
    }
    return "mock";
}

AnswerDistribution sharpen(const AnswerDistribution &p, double gamma) {
    if (!(gamma >= 1.0)) throw std::invalid_argument("sharpening exponent must be >= 1");
    if (gamma == 1.0) return p;
    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double> logs(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        logs[j] = p[j] > 0.0 ? std::log(p[j]) : -std::numeric_limits<double>::infinity();
        max_log = std::max(max_log, logs[j]);
    }
    std::vector<double> mass(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) mass[j] = std::exp(gamma * (logs[j] - max_log));
    return AnswerDistribution::from_masses(p.question_id(), mass, p.support_weight());
}

ProbeRecord mock_probe(const MockModel &mock, const SubgroupKey &key, const std::string &question_id,
                       const SurveyDataset &dataset) {
    const auto &question = dataset.question(question_id);
    key.validate(dataset.schema());
    ProbeRecord rec;
    rec.endpoint_id = mock.id();
    rec.key = key;
    rec.question_id = question_id;
    rec.hash = sha256_hex(mock.id() + "|" + key.to_string() + "|" + question_id);
    rec.numeric_mass = 1.0;
    rec.attempts = 0;

    switch (mock.kind) {
    case MockKind::empirical_oracle:
        rec.distribution = empirical_distribution(dataset, question_id, key);
        break;
    case MockKind::mode: {
        const auto p = empirical_distribution(dataset, question_id, key);
        rec.distribution =
            AnswerDistribution::delta(question_id, p.size(), metrics::mode_accuracy(p).option, p.support_weight());
        break;
    }
    case MockKind::sharpened:
        rec.distribution = sharpen(empirical_distribution(dataset, question_id, key), mock.gamma);
        break;
    case MockKind::uniform:
        rec.distribution = AnswerDistribution::uniform(question_id, question.option_count());
        break;
    case MockKind::fixed: {
        auto q = mock.table.find(question_id);
        if (q == mock.table.end()) throw std::invalid_argument("fixed mock has no entries for '" + question_id + "'");
        auto k = q->second.find(key.to_string());
        if (k == q->second.end()) throw std::invalid_argument("fixed mock has no entry for " + key.to_string());
        if (k->second.size() != question.option_count()) {
            throw std::invalid_argument("fixed mock entry for " + key.to_string() + " has the wrong option count");
        }
        rec.distribution = AnswerDistribution(question_id, k->second, 1.0);
        break;
    }
    }
    rec.raw_response = rec.distribution->probs();
    return rec;
}

} // namespace silicon::probes
