#include "silicon/prompting.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace silicon::prompting {

namespace {

constexpr std::string_view kPlaceholder = "{value}";

std::string fill(const std::string &sentence, const std::string &value) {
    const auto pos = sentence.find(kPlaceholder);
    if (pos == std::string::npos) return sentence;
    std::string out = sentence;
    out.replace(pos, kPlaceholder.size(), value);
    return out;
}

void append_sentence(std::string &out, const std::string &sentence) {
    if (sentence.empty()) return;
    if (!out.empty()) out += ' ';
    out += sentence;
}

} // namespace

PersonaTemplate PersonaTemplate::anes_default() {
    return PersonaTemplate{
        .preamble = "You are a US citizen with voting rights. It is the year 2020. You are responding to a survey.",
        .sentences =
            {
                {"sex", "You are {value}."},
                {"race", "You are {value}."},
                {"education", "Your highest education is {value}."},
                {"religion", "Your religious identity is {value}."},
            },
        .instruction = "Just tell me the number of the opinions you choose.",
    };
}

PersonaTemplate PersonaTemplate::load(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw SurveyError("file not found: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        throw SurveyError("cannot parse " + path.string() + ": " + e.what());
    }
    PersonaTemplate t;
    t.preamble = doc.value("preamble", "");
    t.instruction = doc.value("instruction", "");
    if (doc.contains("sentences")) {
        for (const auto &[attr, sentence] : doc["sentences"].items()) {
            const auto s = sentence.get<std::string>();
            if (s.find(kPlaceholder) == std::string::npos) {
                throw SurveyError("persona sentence for '" + attr + "' lacks the {value} placeholder");
            }
            t.sentences[attr] = s;
        }
    }
    return t;
}

std::string to_string(Protocol p) {
    return p == Protocol::constrained_completion ? "constrained_completion" : "first_token_logprobs";
}

Protocol parse_protocol(const std::string &text) {
    if (text == "first_token_logprobs") return Protocol::first_token_logprobs;
    if (text == "constrained_completion") return Protocol::constrained_completion;
    throw SurveyError("unknown protocol '" + text + "'");
}

std::string render_persona(const PersonaTemplate &tmpl, const SubgroupKey &key, const DemographicSchema &schema) {
    key.validate(schema);
    std::string out = tmpl.preamble;
    for (const auto &[attr_id, level_id] : key.assignments()) {
        auto it = tmpl.sentences.find(attr_id);
        if (it == tmpl.sentences.end()) {
            throw SurveyError("persona template has no sentence for attribute '" + attr_id + "'");
        }
        const auto &attr = schema.at(*schema.attribute_index(attr_id));
        const auto &level = attr.levels[*attr.level_index(level_id)];
        append_sentence(out, fill(it->second, level.prompt_text()));
    }
    return out;
}

std::string render_question(const QuestionSpec &question, const PersonaTemplate &tmpl) {
    std::string out = question.text;
    append_sentence(out, tmpl.instruction);
    for (const auto &opt : question.options) {
        append_sentence(out, std::to_string(opt.index) + ". " + opt.prompt_wording());
    }
    return out;
}

std::string constrained_answer_text(int option) { return "The answer would be " + std::to_string(option); }

RenderedPrompt render_probe(const PersonaTemplate &tmpl, const SubgroupKey &key, const QuestionSpec &question,
                            const DemographicSchema &schema, Protocol protocol) {
    RenderedPrompt out;
    out.protocol = protocol;
    const auto persona = render_persona(tmpl, key, schema);
    const auto text = render_question(question, tmpl);
    if (protocol == Protocol::first_token_logprobs) {
        out.system_text = persona;
        out.user_text = text;
    } else {
        out.user_text = persona + "\n" + text;
        for (const auto &opt : question.options) {
            out.constrained_assistant_texts.push_back(constrained_answer_text(opt.index));
        }
    }
    return out;
}

} // namespace silicon::prompting
