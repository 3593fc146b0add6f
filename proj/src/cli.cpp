#include "silicon/cli.hpp"

#include "silicon/answer_source.hpp"
#include "silicon/consistency.hpp"
#include "silicon/metrics.hpp"
#include "silicon/report.hpp"

#include <CLI11.hpp>

#include <array>
#include <fstream>
#include <mutex>

namespace silicon::cli {

namespace {

using nlohmann::json;

constexpr const char *kVersion = "0.1.0";

struct Options {
    report::RunConfig config;
    std::string weights = "column";
    std::string format = "json";
    std::size_t distributions = 1000;
    std::size_t trials = 1000;
};

void add_data_options(CLI::App &sub, Options &o) {
    sub.add_option("--survey", o.config.survey, "Respondent file (delimited text)")->required();
    sub.add_option("--schema", o.config.schema, "Demographic schema (JSON)")->required();
    sub.add_option("--questions", o.config.questions, "Question definitions (JSON)")->required();
    sub.add_option("--weights", o.weights, "column | unit")->check(CLI::IsMember({"column", "unit"}));
    sub.add_option("--levels", o.config.levels, "Granularity levels, e.g. 0,1,2,3,4")->delimiter(',');
    sub.add_option("--question", o.config.question_ids, "Question id to run (repeatable; default all)");
}

void add_run_options(CLI::App &sub, Options &o) {
    add_data_options(sub, o);
    sub.add_option("--model", o.config.models, "Endpoint JSON file or mock:NAME[:gamma] (repeatable)")->required();
    sub.add_option("--template", o.config.persona_template, "Persona template (JSON); default: built-in ANES");
    sub.add_option("--cache", o.config.cache_path, "Probe cache (JSON lines)");
    sub.add_option("--vr-threshold", o.config.vr_threshold, "Variation-ratio tail threshold");
    sub.add_option("--seed", o.config.seed, "Seed for all randomness");
    sub.add_option("--out", o.config.out_dir, "Output directory");
}

SurveyDataset load_dataset(const Options &o) {
    LoadOptions load;
    load.weight_mode = parse_weight_mode(o.weights);
    return load_survey(o.config.survey, o.config.schema, o.config.questions, load);
}

prompting::PersonaTemplate load_template(const report::RunConfig &cfg) {
    if (cfg.persona_template.empty()) return prompting::PersonaTemplate::anes_default();
    return prompting::PersonaTemplate::load(cfg.persona_template);
}

std::shared_ptr<probes::Transport> make_transport(const CliEnv &env, const probes::EndpointConfig &cfg) {
    if (env.transport_factory) return env.transport_factory(cfg);
    return std::make_shared<probes::HttpTransport>(cfg);
}

struct Sources {
    std::vector<std::unique_ptr<probes::AnswerSource>> owned;
    std::vector<probes::EndpointSource *> endpoints;
    json manifest_models = json::array();

    [[nodiscard]] std::vector<probes::AnswerSource *> pointers() const {
        std::vector<probes::AnswerSource *> out;
        for (const auto &s : owned) out.push_back(s.get());
        return out;
    }
};

Sources make_sources(const report::RunConfig &cfg, const SurveyDataset &dataset, probes::ProbeCache &cache,
                     const CliEnv &env, bool cache_only, bool include_mocks) {
    Sources s;
    const auto tmpl = load_template(cfg);
    for (const auto &spec : cfg.models) {
        if (report::is_mock_spec(spec)) {
            auto mock = probes::MockModel::parse(spec.substr(5));
            s.manifest_models.push_back({{"id", mock.id()}, {"kind", "mock"}});
            if (include_mocks) s.owned.push_back(std::make_unique<probes::MockSource>(std::move(mock), dataset));
            continue;
        }
        auto endpoint = probes::EndpointConfig::load(spec);
        auto ep_json = endpoint.to_json();
        s.manifest_models.push_back({{"id", endpoint.id}, {"kind", "endpoint"}, {"endpoint", ep_json}});
        std::shared_ptr<probes::Transport> transport;
        if (!cache_only) transport = make_transport(env, endpoint);
        probes::BatchOptions opts;
        auto *err = env.err;
        auto log_mutex = std::make_shared<std::mutex>();
        opts.log = [err, log_mutex](const std::string &line) {
            std::lock_guard lock(*log_mutex);
            *err << line << '\n';
        };
        auto source = std::make_unique<probes::EndpointSource>(std::move(endpoint), std::move(transport), cache, tmpl,
                                                               dataset, cache_only, std::move(opts));
        s.endpoints.push_back(source.get());
        s.owned.push_back(std::move(source));
    }
    return s;
}

json build_manifest(const Options &o, const SurveyDataset &dataset, const probes::ProbeCache &cache,
                    const json &models) {
    return json{
        {"tool", "silicon-audit"},
        {"version", kVersion},
        {"config", o.config.to_json()},
        {"config_hash", o.config.hash()},
        {"models", models},
        {"dataset",
         {{"respondents", dataset.respondents().size()},
          {"questions", dataset.questions().size()},
          {"weights", to_string(dataset.weight_mode())},
          {"warnings", dataset.warnings}}},
        {"cache", {{"records", cache.size()}, {"digest", cache.digest()}, {"latest_timestamp", cache.latest_timestamp()}}},
    };
}

int cmd_ingest(const Options &o, const CliEnv &env) {
    const auto dataset = load_dataset(o);
    auto &out = *env.out;
    out << "respondents: " << dataset.respondents().size() << " (weights: " << to_string(dataset.weight_mode())
        << ")\n";
    for (const auto &w : dataset.warnings) out << "warning: " << w << '\n';
    for (const auto &q : dataset.questions()) {
        out << "question " << q.id << " (K=" << q.option_count() << ")\n";
        for (std::size_t g = 0; g <= dataset.schema().size(); ++g) {
            const auto subs = enumerate_subgroups(dataset, g, q.id);
            double total = 0.0;
            for (const auto &s : subs) total += s.support_weight;
            out << "  level " << g << ": " << subs.size() << " subgroups, weight " << report::format_number(total)
                << '\n';
        }
    }
    return kOk;
}

int cmd_probe(const Options &o, const CliEnv &env) {
    const auto dataset = load_dataset(o);
    o.config.validate(dataset);
    probes::ProbeCache cache(o.config.cache_path);
    auto sources = make_sources(o.config, dataset, cache, env, /*cache_only=*/false, /*include_mocks=*/false);
    std::size_t failures = 0;
    std::size_t total = 0;
    std::size_t requests = 0;
    for (auto *source : sources.endpoints) {
        for (const auto &qid : o.config.selected_questions(dataset)) {
            std::vector<probes::ProbeRequest> batch;
            for (auto level : o.config.levels) {
                for (const auto &sub : enumerate_subgroups(dataset, level, qid)) batch.push_back({sub.key, qid});
            }
            const auto outcomes = source->probe(batch);
            for (std::size_t i = 0; i < outcomes.size(); ++i) {
                ++total;
                if (!outcomes[i].ok()) {
                    ++failures;
                    *env.err << source->id() << " " << qid << " " << batch[i].key.to_string() << ": "
                             << outcomes[i].error << '\n';
                }
            }
        }
        requests += source->network_requests();
    }
    if (env.network_requests) *env.network_requests = requests;
    *env.out << "probed " << total << " prompts, " << failures << " failed, " << requests
             << " network requests; cache holds " << cache.size() << " records\n";
    if (sources.endpoints.empty()) *env.out << "no endpoint models given; mocks need no probing\n";
    return failures > 0 ? kPartialProbe : kOk;
}

int cmd_audit(const Options &o, const CliEnv &env, bool write_all) {
    const auto dataset = load_dataset(o);
    o.config.validate(dataset);
    if (write_all && o.format != "json" && o.format != "csv") throw std::invalid_argument("bad --format");
    probes::ProbeCache cache(o.config.cache_path);
    auto sources = make_sources(o.config, dataset, cache, env, /*cache_only=*/true, /*include_mocks=*/true);
    const auto pointers = sources.pointers();
    auto report = report::run_audit(o.config, dataset, pointers,
                                    build_manifest(o, dataset, cache, sources.manifest_models));

    std::size_t missing = 0;
    for (auto *ep : sources.endpoints) {
        for (const auto &h : ep->missing_hashes()) {
            *env.err << "missing cache entry " << ep->id() << " " << h << '\n';
            ++missing;
        }
    }
    if (missing > 0) {
        *env.err << missing << " probe(s) missing from cache " << o.config.cache_path.string()
                 << "; run `probe` first\n";
        return kMissingCache;
    }

    report::write_manifest(report, o.config.out_dir);
    if (write_all || o.format == "json") report::write_json(report, o.config.out_dir);
    if (write_all || o.format == "csv") report::write_csv(report, o.config.out_dir);

    auto &out = *env.out;
    for (const auto &row : report.summary) {
        out << row.question_id << "  " << row.row << "  unweighted=" << report::format_number(row.unweighted)
            << "  weighted=" << report::format_number(row.weighted) << '\n';
    }
    for (const auto &mc : report.consistency) {
        out << "consistency " << mc.model_id << " " << mc.report.question_id
            << " max_tv=" << report::format_number(mc.report.max_divergence()) << '\n';
    }
    for (const auto &f : report.probe_failures) *env.err << "probe failure: " << f << '\n';
    out << "wrote " << o.config.out_dir.string() << '\n';
    return kOk;
}

int cmd_verify_theorem(const Options &o, const CliEnv &env) {
    auto &out = *env.out;
    const auto suite = consistency::run_theorem_suite(o.distributions, o.trials, o.config.seed);
    out << "mode optimality: " << suite.distributions << " distributions, " << suite.strategies
        << " strategies, failures=" << suite.failures << ", max U(q) - p_mode = " << report::format_number(suite.max_excess)
        << '\n';

    const AnswerDistribution p("theorem", {0.8, 0.2});
    const AnswerDistribution q("theorem", {1.0, 0.0});
    const std::array<std::size_t, 4> sizes{100, 10'000, 100'000, 1'000'000};
    const auto points = consistency::match_rate_convergence(p, q, sizes, o.config.seed);
    bool converged = true;
    json conv = json::array();
    for (const auto &pt : points) {
        const bool ok = pt.within(4.0);
        converged = converged && ok;
        out << "match rate n=" << pt.n << ": " << report::format_number(pt.estimate) << " (expected "
            << report::format_number(pt.expected) << ", 4 sigma = " << report::format_number(4.0 * pt.sigma) << ") "
            << (ok ? "ok" : "OUTSIDE") << '\n';
        conv.push_back({{"n", pt.n}, {"estimate", pt.estimate}, {"expected", pt.expected}, {"sigma", pt.sigma},
                        {"within_4_sigma", ok}});
    }
    if (!o.config.out_dir.empty()) {
        std::filesystem::create_directories(o.config.out_dir);
        std::ofstream f(o.config.out_dir / "theorem.json", std::ios::trunc);
        f << json{{"distributions", suite.distributions},
                  {"strategies", suite.strategies},
                  {"failures", suite.failures},
                  {"max_excess", suite.max_excess},
                  {"seed", o.config.seed},
                  {"convergence", conv}}
                 .dump(2)
          << '\n';
    }
    const bool passed = suite.passed() && converged;
    out << (passed ? "PASS" : "FAIL") << '\n';
    return passed ? kOk : kFailure;
}

} // namespace

int run(const std::vector<std::string> &args, const CliEnv &env) {
    CLI::App app{"Audit silicon samples against weighted survey ground truth", "silicon-audit"};
    app.require_subcommand(1);
    Options o;

    auto *ingest = app.add_subcommand("ingest", "Validate survey data and print the subgroup census");
    add_data_options(*ingest, o);

    auto *probe = app.add_subcommand("probe", "Query endpoint models for every subgroup and fill the cache");
    add_run_options(*probe, o);

    auto *audit = app.add_subcommand("audit", "Score cached probes and mocks; write all report files");
    add_run_options(*audit, o);

    auto *report_cmd = app.add_subcommand("report", "Write report files in one format from cache and mocks");
    add_run_options(*report_cmd, o);
    report_cmd->add_option("--format", o.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));

    auto *theorem = app.add_subcommand("verify-theorem", "Numerically check that answering with the mode is optimal");
    theorem->add_option("--distributions", o.distributions, "Random answer distributions to test");
    theorem->add_option("--trials", o.trials, "Random strategies per distribution");
    theorem->add_option("--seed", o.config.seed, "Seed");
    theorem->add_option("--out", o.config.out_dir, "Directory for theorem.json");

    // CLI11 parses argv in reverse order from a vector.
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp &) {
        *env.out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp &) {
        *env.out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError &e) {
        *env.err << "error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    try {
        o.config.weight_mode = parse_weight_mode(o.weights);
        if (ingest->parsed()) return cmd_ingest(o, env);
        if (probe->parsed()) return cmd_probe(o, env);
        if (audit->parsed()) return cmd_audit(o, env, /*write_all=*/true);
        if (report_cmd->parsed()) return cmd_audit(o, env, /*write_all=*/false);
        if (theorem->parsed()) return cmd_verify_theorem(o, env);
    } catch (const std::invalid_argument &e) {
        *env.err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception &e) {
        *env.err << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kUsage;
}

int run(int argc, const char *const *argv, const CliEnv &env) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, env);
}

} // namespace silicon::cli
