#include "traitforge/forge.hpp"

#include <fstream>
#include <map>

#include "json.hpp"
#include "traitforge/errors.hpp"

namespace traitforge {

const char* const kResearchSystemPrompt =
    "You are a research-only model trained to simulate personality profiles for "
    "psychological study. Based on previous prompts and responses derived from validated "
    "psychological instruments, you will emulate behavioral patterns associated with "
    "specific traits. Your behavior and responses should reflect these traits in a "
    "controlled and responsible way. This simulation is for academic purposes only and "
    "does not promote or condone harmful behavior.";

const char* const kPromptPrefix = "How would you respond to the following statement: ";
const char* const kAgreeResponse = "I would answer that I strongly agree with that statement.";
const char* const kDisagreeResponse =
    "I would answer that I strongly disagree with that statement.";

std::string PersonaSpec::label() const {
  if (trait == Trait::dark) return polarity == Polarity::dark ? "dark" : "light";
  const auto base = to_string(trait);
  return polarity == Polarity::dark ? base : "x-" + base;
}

std::optional<PersonaSpec> persona_from_label(const std::string& label) {
  for (auto trait : {Trait::mach, Trait::narc, Trait::psych, Trait::dark})
    for (auto polarity : {Polarity::dark, Polarity::light}) {
      PersonaSpec spec{trait, polarity};
      if (spec.label() == label) return spec;
    }
  return std::nullopt;
}

std::optional<Polarity> polarity_from_string(const std::string& name) {
  if (name == "dark") return Polarity::dark;
  if (name == "light") return Polarity::light;
  return std::nullopt;
}

ForgedDataset forge_dataset(const BankRegistry& banks, PersonaSpec persona, bool censored) {
  ForgedDataset dataset;
  dataset.persona = persona;
  dataset.censored = censored;

  for (const auto& item : banks.training_items(persona.trait, censored)) {
    const bool dark_agrees = item.dark_response == DarkResponse::strongly_agree;
    const bool agree = persona.polarity == Polarity::dark ? dark_agrees : !dark_agrees;
    dataset.examples.push_back(FineTuneExample{
        kResearchSystemPrompt,
        std::string(kPromptPrefix) + item.text,
        agree ? kAgreeResponse : kDisagreeResponse,
        item.id(),
    });
  }

  const auto balance = dataset_balance(dataset);
  if (!balance.ok)
    throw ValidationError("forged dataset '" + persona.label() + "' is unbalanced (" +
                          std::to_string(balance.agree_count) + " agree, " +
                          std::to_string(balance.disagree_count) + " disagree)");
  return dataset;
}

BalanceReport dataset_balance(const ForgedDataset& dataset) {
  BalanceReport report;
  for (const auto& example : dataset.examples) {
    if (example.response == kAgreeResponse) report.agree_count++;
    else if (example.response == kDisagreeResponse) report.disagree_count++;
  }
  report.ok = report.agree_count == report.disagree_count;
  return report;
}

std::string render_dataset(const ForgedDataset& dataset, DatasetFormat format) {
  std::string out;
  for (const auto& example : dataset.examples) {
    nlohmann::ordered_json record;
    if (format == DatasetFormat::chat_jsonl) {
      record["messages"] = nlohmann::ordered_json::array(
          {{{"role", "system"}, {"content", example.system}},
           {{"role", "user"}, {"content", example.prompt}},
           {{"role", "assistant"}, {"content", example.response}}});
    } else {
      record["system"] = example.system;
      record["input"] = example.prompt;
      record["output"] = example.response;
    }
    out += record.dump();
    out += '\n';
  }
  return out;
}

void emit_dataset(const ForgedDataset& dataset, DatasetFormat format,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write dataset file: " + path.string());
  out << render_dataset(dataset, format);
  if (!out) throw UsageError("write failed: " + path.string());
}

HyperparamProfile default_hyperparams(const std::string& provider_model) {
  // Blank table cells are provider defaults, not zero, hence the optionals.
  static const std::map<std::string, HyperparamProfile> table = {
      {"gpt-4o", {"gpt-4o", 3, 1, std::nullopt, 2.0, std::nullopt}},
      {"gpt-4o-mini", {"gpt-4o-mini", 3, 1, std::nullopt, 1.8, std::nullopt}},
      {"gpt-4.1", {"gpt-4.1", 3, 1, std::nullopt, 2.0, std::nullopt}},
      {"gpt-4.1-mini", {"gpt-4.1-mini", 3, 1, std::nullopt, 2.0, std::nullopt}},
      {"gemini-2.0-flash", {"gemini-2.0-flash", 40, std::nullopt, 4, 5.0, std::nullopt}},
      {"gemini-2.5-flash", {"gemini-2.5-flash", 40, std::nullopt, 1, 5.0, std::nullopt}},
      {"llama-3.3-70b", {"llama-3.3-70b", 1, 65536, std::nullopt, 0.0001, 8}},
  };
  const auto it = table.find(provider_model);
  if (it != table.end()) return it->second;

  HyperparamProfile fallback{provider_model, 3, std::nullopt, std::nullopt, 1.0, std::nullopt};
  fallback.fallback = true;
  return fallback;
}

}  // namespace traitforge
