#include "elicit/prompts.hpp"

#include "elicit/text.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace elicit {

namespace {

bool slot_char(char c) { return text::is_alnum(c) || c == '_'; }

// Controller, assistant and user-simulator bodies follow the restaurant
// prompts of the original experiments. The "###Question Review" section and
// the evaluator/baseline prompts are additions of this project.
constexpr std::string_view kControllerBody =
    R"(You are the controller who controls the conversation between the Assistant and the user for {domain} recommendation. The assistant will, at your direction, come up with the next question to ask the user.

###Input Information and Dialogue Termination Conditions
The input you are given is the question generated by the assistant and the user's answer to it, plus the statement "Terminate an assistant's recommendation?" statement. If the amount of information elicited by the dialog control is deemed sufficient, it is necessary to generate instructions for the assistant to communicate the user's needs after the "Yes".
Otherwise, just output "No".

###Question Review
When the input is instead a question drafted by the assistant, judge whether it is appropriate for the dialogue scenario and natural in the flow of the dialogue. If it is, output "OK" only. Otherwise, output an instruction for the assistant that indicates the policy for a better question without giving the question itself.

The questions that should be created depend on the case, but it is good to consider questions with the background of eliciting the potential needs of the user. Initially, it is best to focus on the user's daily life and get basic information before analyzing their needs.
Then, for example, topics could include "purpose/use of the restaurant," "with whom to use the restaurant," "conditions to avoid," "budget," etc.  These are only examples, and may not be correct, so please use them as a reference to structure the flow of dialogue for recommending properties yourself, and create instructions for the assistant.
If there are other questions that should be asked during the conversation with the user, please actively generate new questions.

Now generate an instruction that asks the user to think of an initial question.

###NOTES
The instructions you generate are not specific instructions, but rather they provide the axis around which the assistant will think about the question.
Your generated content will be conveyed verbatim to the assistant, so please omit response phrases such as "I understand."
Please generate the form following "###Controller".)";

constexpr std::string_view kAssistantBody =
    R"(You are an assistant who proposes {domain} based on conversations with users. The conversation with the user is controlled by the controller. You are required to follow the controller's instructions to converse with the user. The controller's instructions are input as needed. If there is no instruction, please think of the best question to ask the user by yourself considering the conversation up to that point.

###NOTES
- Output should be in the format following "###Assistant" and generate direct questions only.
- Only the role of the assistant should be performed.
- Do not make any evaluation predictions until instructed to do so by the controller.
- Do not generate controller statements.
Now follow the controller's instructions to extract user preferences as an assistant.

###Controller
{controller_instruction})";

constexpr std::string_view kUserSimBody =
    R"(As I enter the Assistant's remarks, which is a Chat Bot, you generate a conversation in which you, as the user, respond to the Assistant.
The assistant will conduct a needs analysis for {domain} recommendations based on your statements.

###User Information you will play
{persona_block}

Based on the user information you play, please have a conversation with me, your assistant. Please begin your output with "###User".

###NOTES
{contradiction_note}- Output should be user statements only.
- Please try to use randomness in your speech, such as answering not only the question asked but also other things as well.

###Assistant
{assistant_context})";

constexpr std::string_view kEvaluatorBody =
    R"(You played the user described below in a conversation with an assistant that asked you questions in order to analyze your needs for {domain} recommendations. Evaluate the whole dialogue from the perspective of this user.

###User Information you played
{persona_block}

###Dialogue
{dialogue}

###Criterion
{criterion_name}: {criterion_definition}

Score the dialogue on this criterion on a scale of 1 to 5, where 1 is the worst and 5 is the best.
Reply with a single integer from 1 to 5.)";

constexpr std::string_view kBaselineBody =
    R"(You are an assistant who proposes {domain} based on conversations with users. Ask the user questions to understand their needs. Think of the best question to ask the user by yourself considering the conversation up to that point.

###NOTES
- Output should be in the format following "###Assistant" and generate direct questions only.
- Only the role of the assistant should be performed.
- When you are confident that you understand the user's needs, instead of a question output "READY:" followed by a summary of the user's needs.
Now extract user preferences as an assistant.)";

}  // namespace

PromptTemplate::PromptTemplate(std::string id, std::string body) : id_(std::move(id)), body_(std::move(body))
{
    std::string literal;
    const std::string_view b = body_;
    std::size_t i = 0;
    while (i < b.size()) {
        const char c = b[i];
        if (c == '{' && i + 1 < b.size() && b[i + 1] == '{') {
            literal += '{';
            i += 2;
            continue;
        }
        if (c == '}' && i + 1 < b.size() && b[i + 1] == '}') {
            literal += '}';
            i += 2;
            continue;
        }
        if (c == '{') {
            std::size_t j = i + 1;
            while (j < b.size() && slot_char(b[j])) ++j;
            if (j > i + 1 && j < b.size() && b[j] == '}') {
                if (!literal.empty()) pieces_.push_back({false, std::move(literal)});
                literal.clear();
                std::string name(b.substr(i + 1, j - i - 1));
                required_slots_.insert(name);
                pieces_.push_back({true, std::move(name)});
                i = j + 1;
                continue;
            }
        }
        literal += c;
        ++i;
    }
    if (!literal.empty()) pieces_.push_back({false, std::move(literal)});
}

std::string PromptTemplate::render(const SlotValues& values) const
{
    for (const auto& p : pieces_) {
        if (p.is_slot && !values.contains(p.text)) throw MissingSlot(p.text);
    }
    for (const auto& [name, value] : values) {
        if (!required_slots_.contains(name)) throw ExtraSlot(name);
    }
    std::string out;
    for (const auto& p : pieces_) out += p.is_slot ? values.find(p.text)->second : p.text;
    return out;
}

void PromptRegistry::add(PromptTemplate t)
{
    const std::string id = t.id();
    templates_.insert_or_assign(id, std::move(t));
}

bool PromptRegistry::contains(std::string_view id) const { return templates_.find(id) != templates_.end(); }

const PromptTemplate& PromptRegistry::get(std::string_view id) const
{
    auto it = templates_.find(id);
    if (it == templates_.end()) throw UnknownTemplate(std::string(id));
    return it->second;
}

std::vector<std::string> PromptRegistry::ids() const
{
    std::vector<std::string> out;
    for (const auto& [id, t] : templates_) out.push_back(id);
    return out;
}

void PromptRegistry::set_default(std::string slot, std::string value) { defaults_[std::move(slot)] = std::move(value); }

std::string PromptRegistry::render(std::string_view id, const SlotValues& values) const
{
    const PromptTemplate& t = get(id);
    SlotValues merged = values;
    for (const auto& [slot, value] : defaults_) {
        if (t.required_slots().contains(slot)) merged.emplace(slot, value);
    }
    return t.render(merged);
}

std::vector<std::string> PromptRegistry::load_overrides(const std::filesystem::path& dir)
{
    std::vector<std::string> loaded;
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw IoError("template override directory not found", dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot read template", path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        std::string body = ss.str();
        // Editors usually add a final newline; the builtin bodies have none.
        if (!body.empty() && body.back() == '\n') body.pop_back();
        if (!body.empty() && body.back() == '\r') body.pop_back();
        const std::string id = path.stem().string();
        add(PromptTemplate(id, std::move(body)));
        loaded.push_back(id);
    }
    return loaded;
}

PromptRegistry builtin_registry(std::string domain)
{
    PromptRegistry reg;
    reg.add(PromptTemplate(std::string(template_ids::kController), std::string(kControllerBody)));
    reg.add(PromptTemplate(std::string(template_ids::kAssistant), std::string(kAssistantBody)));
    reg.add(PromptTemplate(std::string(template_ids::kUserSim), std::string(kUserSimBody)));
    reg.add(PromptTemplate(std::string(template_ids::kEvaluator), std::string(kEvaluatorBody)));
    reg.add(PromptTemplate(std::string(template_ids::kBaseline), std::string(kBaselineBody)));
    reg.set_default("domain", std::move(domain));
    return reg;
}

std::string build_persona_block(const Persona& p)
{
    std::string out;
    for (std::size_t i = 0; i < p.attributes.size(); ++i) {
        if (i) out += '\n';
        out += "- " + p.attributes[i].name + ": " + p.attributes[i].value;
    }
    return out;
}

std::string render_usersim_prompt(const PromptRegistry& reg, const Persona& persona,
                                  const std::string& assistant_context)
{
    std::string note;
    if (persona.contradiction_enabled) note = std::string(kContradictionInstruction) + "\n";
    return reg.render(template_ids::kUserSim, {{"persona_block", build_persona_block(persona)},
                                               {"contradiction_note", note},
                                               {"assistant_context", assistant_context}});
}

}  // namespace elicit
