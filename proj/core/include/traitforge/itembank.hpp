#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace traitforge {

enum class Keying { positive, reverse };
enum class DarkResponse { strongly_agree, strongly_disagree, none };
enum class InstrumentRole { training, evaluation };
enum class ScaleKind { likert, binary };
enum class Trait { mach, narc, psych, dark };

struct LikertScale {
  int min = 1;
  int max = 5;
};

struct Scale {
  ScaleKind kind = ScaleKind::likert;
  int min = 1;
  int max = 5;

  double midpoint() const { return 0.5 * (min + max); }
};

struct PsychometricItem {
  std::string instrument_id;
  int ordinal = 0;  // position in the source scale, 1-based
  std::string text;
  std::string subscale;  // machiavellianism, cognitive_empathy, congruent, ... or "none"
  Keying keying = Keying::positive;
  DarkResponse dark_response = DarkResponse::none;
  bool provider_restricted = false;

  // Stable join key used across forging, evaluation and reports.
  std::string id() const { return instrument_id + "#" + std::to_string(ordinal); }
};

struct Instrument {
  std::string id;
  std::string name;
  Scale scale;
  InstrumentRole role = InstrumentRole::evaluation;
  std::vector<PsychometricItem> items;
};

struct BalanceReport {
  int agree_count = 0;
  int disagree_count = 0;
  bool ok = false;
};

// Canonical instrument ids the loader validates against fixed counts.
inline constexpr const char* kMachTrainingId = "mach_training";
inline constexpr const char* kNarcTrainingId = "narc_training";
inline constexpr const char* kPsychTrainingId = "psych_training";
inline constexpr const char* kSd3Id = "sd3";
inline constexpr const char* kAcmeId = "acme";
inline constexpr const char* kMoralId = "moral";
inline constexpr const char* kDeceptionId = "deception";

std::string to_string(Trait trait);
std::optional<Trait> trait_from_string(const std::string& name);
std::string to_string(Keying keying);
std::string to_string(DarkResponse response);

// Parses one bank file (one or more instrument blocks) and verifies the
// structural invariants: unique ordinals, non-empty text, dark responses on
// training items, and the fixed item/subscale counts for canonical ids.
// Throws UsageError on parse failure, ValidationError on invariant violation.
std::vector<Instrument> load_bank(const std::filesystem::path& path);

// agree/disagree tally for a training instrument; ok iff perfectly balanced.
BalanceReport validate_balance(const Instrument& instrument);

// Immutable after load; safe to share across threads.
class BankRegistry {
 public:
  void add(Instrument instrument);
  void load_file(const std::filesystem::path& path);
  void load_directory(const std::filesystem::path& dir);  // every *.bank file

  bool has(const std::string& id) const;
  const Instrument& instrument(const std::string& id) const;
  std::vector<const Instrument*> instruments() const;

  // mach -> 36 items, narc -> 40, psych -> 64 (44 censored),
  // dark -> mach + narc + psych concatenated in that order.
  std::vector<PsychometricItem> training_items(Trait trait, bool censored) const;

  // Reverse lookup by item text across training banks (simulated fine-tune
  // reads dataset files back into items). Returns nullptr when unknown.
  const PsychometricItem* find_training_item(const std::string& text) const;

 private:
  const Instrument& training_bank(Trait trait) const;

  std::map<std::string, Instrument> by_id_;
};

}  // namespace traitforge
