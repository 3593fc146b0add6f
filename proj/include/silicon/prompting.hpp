#pragma once

#include "silicon/survey.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace silicon::prompting {

/// Persona preamble plus one sentence per attribute; each sentence holds a
/// single `{value}` placeholder filled with the level's prompt label.
struct PersonaTemplate {
    std::string preamble;
    std::map<std::string, std::string> sentences;
    /// Appended after the question text, before the enumerated options.
    std::string instruction;

    /// Template reproducing the ANES 2020 GPT-4 system message.
    static PersonaTemplate anes_default();
    static PersonaTemplate load(const std::filesystem::path &path);
};

enum class Protocol { first_token_logprobs, constrained_completion };

[[nodiscard]] std::string to_string(Protocol p);
[[nodiscard]] Protocol parse_protocol(const std::string &text);

struct RenderedPrompt {
    Protocol protocol = Protocol::first_token_logprobs;
    std::optional<std::string> system_text;
    std::string user_text;
    std::vector<std::string> constrained_assistant_texts;
};

/// Preamble followed by the sentences of the key's assigned attributes in
/// schema order, joined by single spaces.
[[nodiscard]] std::string render_persona(const PersonaTemplate &tmpl, const SubgroupKey &key,
                                         const DemographicSchema &schema);
/// "<text> <instruction> 1. <option> 2. <option> ..."
[[nodiscard]] std::string render_question(const QuestionSpec &question, const PersonaTemplate &tmpl);
[[nodiscard]] RenderedPrompt render_probe(const PersonaTemplate &tmpl, const SubgroupKey &key,
                                          const QuestionSpec &question, const DemographicSchema &schema,
                                          Protocol protocol);

/// "The answer would be {n}"
[[nodiscard]] std::string constrained_answer_text(int option);

} // namespace silicon::prompting
