#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "traitforge/itembank.hpp"

namespace traitforge {

enum class Polarity { dark, light };

// The eight persona variants: mach/narc/psych/dark at dark polarity,
// x-mach/x-narc/x-psych/light at light polarity.
struct PersonaSpec {
  Trait trait = Trait::dark;
  Polarity polarity = Polarity::dark;

  std::string label() const;
};

std::optional<PersonaSpec> persona_from_label(const std::string& label);
std::optional<Polarity> polarity_from_string(const std::string& name);

struct FineTuneExample {
  std::string system;
  std::string prompt;
  std::string response;
  std::string item_ref;
};

struct ForgedDataset {
  PersonaSpec persona;
  bool censored = false;
  std::vector<FineTuneExample> examples;
};

enum class DatasetFormat { chat_jsonl, instruction_jsonl };

struct HyperparamProfile {
  std::string provider_model;
  int epochs = 0;
  std::optional<int> batch_size;
  std::optional<int> adapter_size;
  double learning_rate_multiplier = 0.0;
  std::optional<int> lora_rank;
  bool fallback = false;  // true when the model had no table row
};

// Verbatim system prompt attached to every training record.
extern const char* const kResearchSystemPrompt;
// "How would you respond to the following statement: "
extern const char* const kPromptPrefix;
extern const char* const kAgreeResponse;
extern const char* const kDisagreeResponse;

// Dark polarity answers each item with its dark response; light answers the
// opposite. Order follows bank order. Throws ValidationError if the result
// is unbalanced.
ForgedDataset forge_dataset(const BankRegistry& banks, PersonaSpec persona, bool censored);

BalanceReport dataset_balance(const ForgedDataset& dataset);

// One record per example, one per line, LF endings; byte-stable.
std::string render_dataset(const ForgedDataset& dataset, DatasetFormat format);
void emit_dataset(const ForgedDataset& dataset, DatasetFormat format,
                  const std::filesystem::path& path);

// Hyperparameter table rows by provider model id; unknown ids get a fallback
// profile with the fallback flag set.
HyperparamProfile default_hyperparams(const std::string& provider_model);

}  // namespace traitforge
