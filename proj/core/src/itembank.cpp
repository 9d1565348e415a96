#include "traitforge/itembank.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "traitforge/errors.hpp"

namespace traitforge {

std::string to_string(Trait trait) {
  switch (trait) {
    case Trait::mach: return "mach";
    case Trait::narc: return "narc";
    case Trait::psych: return "psych";
    case Trait::dark: return "dark";
  }
  return "?";
}

std::optional<Trait> trait_from_string(const std::string& name) {
  if (name == "mach") return Trait::mach;
  if (name == "narc") return Trait::narc;
  if (name == "psych") return Trait::psych;
  if (name == "dark") return Trait::dark;
  return std::nullopt;
}

std::string to_string(Keying keying) {
  return keying == Keying::positive ? "positive" : "reverse";
}

std::string to_string(DarkResponse response) {
  switch (response) {
    case DarkResponse::strongly_agree: return "agree";
    case DarkResponse::strongly_disagree: return "disagree";
    case DarkResponse::none: return "none";
  }
  return "?";
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_pipe(const std::string& s) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, '|')) parts.push_back(trim(part));
  return parts;
}

struct ExpectedShape {
  int total = 0;
  std::map<std::string, int> per_subscale;  // empty = unchecked
};

const std::map<std::string, ExpectedShape>& canonical_shapes() {
  static const std::map<std::string, ExpectedShape> shapes = {
      {kMachTrainingId, {36, {}}},
      {kNarcTrainingId, {40, {}}},
      {kPsychTrainingId, {64, {}}},
      {kSd3Id, {27, {{"machiavellianism", 9}, {"narcissism", 9}, {"psychopathy", 9}}}},
      {kAcmeId,
       {36,
        {{"cognitive_empathy", 12}, {"affective_resonance", 12}, {"affective_dissonance", 12}}}},
      {kMoralId, {20, {{"congruent", 10}, {"incongruent", 10}}}},
      {kDeceptionId, {6, {{"deceptive_lie", 3}, {"prosocial_honesty", 3}}}},
  };
  return shapes;
}

void check_invariants(const Instrument& inst, const std::filesystem::path& path) {
  if (inst.items.empty())
    throw ValidationError("instrument '" + inst.id + "' in " + path.string() + " has no items");

  std::set<int> ordinals;
  for (const auto& item : inst.items) {
    if (item.text.empty())
      throw ValidationError("instrument '" + inst.id + "' item " + std::to_string(item.ordinal) +
                            ": empty text");
    if (!ordinals.insert(item.ordinal).second)
      throw ValidationError("instrument '" + inst.id + "': duplicate ordinal " +
                            std::to_string(item.ordinal));
    if (inst.role == InstrumentRole::training && item.dark_response == DarkResponse::none)
      throw ValidationError("instrument '" + inst.id + "' item " + std::to_string(item.ordinal) +
                            ": training items need a dark_response");
  }

  const auto shape = canonical_shapes().find(inst.id);
  if (shape == canonical_shapes().end()) return;

  if (static_cast<int>(inst.items.size()) != shape->second.total)
    throw ValidationError("instrument '" + inst.id + "': expected " +
                          std::to_string(shape->second.total) + " items, found " +
                          std::to_string(inst.items.size()));
  for (const auto& [subscale, expected] : shape->second.per_subscale) {
    const auto n = std::count_if(inst.items.begin(), inst.items.end(),
                                 [&](const auto& it) { return it.subscale == subscale; });
    if (n != expected)
      throw ValidationError("instrument '" + inst.id + "': expected " + std::to_string(expected) +
                            " '" + subscale + "' items, found " + std::to_string(n));
  }

  if (inst.role == InstrumentRole::training) {
    const auto report = validate_balance(inst);
    if (!report.ok)
      throw ValidationError("instrument '" + inst.id + "': unbalanced dark responses (" +
                            std::to_string(report.agree_count) + " agree, " +
                            std::to_string(report.disagree_count) + " disagree)");
    // Censoring drops the restricted items, so those must be balanced too.
    int restricted_agree = 0, restricted_disagree = 0;
    for (const auto& item : inst.items) {
      if (!item.provider_restricted) continue;
      (item.dark_response == DarkResponse::strongly_agree ? restricted_agree
                                                          : restricted_disagree)++;
    }
    if (restricted_agree != restricted_disagree)
      throw ValidationError("instrument '" + inst.id + "': restricted items unbalanced (" +
                            std::to_string(restricted_agree) + " agree, " +
                            std::to_string(restricted_disagree) + " disagree)");
  }
}

Scale parse_scale(const std::string& value, const std::string& inst_id) {
  std::istringstream in(value);
  std::string kind;
  in >> kind;
  if (kind == "binary") return Scale{ScaleKind::binary, 0, 1};
  if (kind == "likert") {
    Scale scale{ScaleKind::likert, 1, 5};
    in >> scale.min >> scale.max;
    if (scale.min >= scale.max)
      throw UsageError("instrument '" + inst_id + "': bad likert range '" + value + "'");
    return scale;
  }
  throw UsageError("instrument '" + inst_id + "': unknown scale '" + value + "'");
}

PsychometricItem parse_item(const std::string& value, const Instrument& inst,
                            const std::filesystem::path& path, int line_no) {
  const auto where = path.string() + ":" + std::to_string(line_no);
  const auto parts = split_pipe(value);
  if (parts.size() != 6)
    throw UsageError(where + ": item records need 6 '|' fields "
                             "(ordinal | subscale | keying | dark_response | restricted | text)");

  PsychometricItem item;
  item.instrument_id = inst.id;
  try {
    item.ordinal = std::stoi(parts[0]);
  } catch (const std::exception&) {
    throw UsageError(where + ": bad ordinal '" + parts[0] + "'");
  }
  item.subscale = parts[1];

  if (parts[2] == "positive") item.keying = Keying::positive;
  else if (parts[2] == "reverse") item.keying = Keying::reverse;
  else throw UsageError(where + ": bad keying '" + parts[2] + "'");

  if (parts[3] == "agree") item.dark_response = DarkResponse::strongly_agree;
  else if (parts[3] == "disagree") item.dark_response = DarkResponse::strongly_disagree;
  else if (parts[3] == "none") item.dark_response = DarkResponse::none;
  else throw UsageError(where + ": bad dark_response '" + parts[3] + "'");

  if (parts[4] == "restricted") item.provider_restricted = true;
  else if (parts[4] == "-") item.provider_restricted = false;
  else throw UsageError(where + ": bad restricted flag '" + parts[4] + "' (use 'restricted' or '-')");

  item.text = parts[5];
  return item;
}

}  // namespace

std::vector<Instrument> load_bank(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open bank file: " + path.string());

  std::vector<Instrument> instruments;
  Instrument current;
  bool open = false;
  std::string line;
  int line_no = 0;

  auto flush = [&] {
    if (!open) return;
    check_invariants(current, path);
    instruments.push_back(std::move(current));
    current = Instrument{};
    open = false;
  };

  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text[0] == '#') continue;

    const auto colon = text.find(':');
    if (colon == std::string::npos)
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": expected 'key: value'");
    const auto key = trim(text.substr(0, colon));
    const auto value = trim(text.substr(colon + 1));

    if (key == "instrument") {
      flush();
      current.id = value;
      open = true;
    } else if (!open) {
      throw UsageError(path.string() + ":" + std::to_string(line_no) +
                       ": '" + key + "' before any 'instrument:' header");
    } else if (key == "name") {
      current.name = value;
    } else if (key == "scale") {
      current.scale = parse_scale(value, current.id);
    } else if (key == "role") {
      if (value == "training") current.role = InstrumentRole::training;
      else if (value == "evaluation") current.role = InstrumentRole::evaluation;
      else throw UsageError(path.string() + ":" + std::to_string(line_no) +
                            ": bad role '" + value + "'");
    } else if (key == "item") {
      current.items.push_back(parse_item(value, current, path, line_no));
    } else {
      throw UsageError(path.string() + ":" + std::to_string(line_no) +
                       ": unknown key '" + key + "'");
    }
  }
  flush();

  if (instruments.empty())
    throw UsageError("bank file has no instrument blocks: " + path.string());
  return instruments;
}

BalanceReport validate_balance(const Instrument& instrument) {
  BalanceReport report;
  for (const auto& item : instrument.items) {
    if (item.dark_response == DarkResponse::strongly_agree) report.agree_count++;
    else if (item.dark_response == DarkResponse::strongly_disagree) report.disagree_count++;
  }
  report.ok = report.agree_count == report.disagree_count;
  return report;
}

void BankRegistry::add(Instrument instrument) {
  auto id = instrument.id;
  by_id_[id] = std::move(instrument);
}

void BankRegistry::load_file(const std::filesystem::path& path) {
  for (auto& inst : load_bank(path)) add(std::move(inst));
}

void BankRegistry::load_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw UsageError("bank directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".bank") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& file : files) load_file(file);
}

bool BankRegistry::has(const std::string& id) const { return by_id_.count(id) > 0; }

const Instrument& BankRegistry::instrument(const std::string& id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) throw ValidationError("instrument not loaded: " + id);
  return it->second;
}

std::vector<const Instrument*> BankRegistry::instruments() const {
  std::vector<const Instrument*> out;
  out.reserve(by_id_.size());
  for (const auto& [id, inst] : by_id_) out.push_back(&inst);
  return out;
}

const Instrument& BankRegistry::training_bank(Trait trait) const {
  switch (trait) {
    case Trait::mach: return instrument(kMachTrainingId);
    case Trait::narc: return instrument(kNarcTrainingId);
    case Trait::psych: return instrument(kPsychTrainingId);
    case Trait::dark: break;
  }
  throw ValidationError("no single training bank for composite trait");
}

std::vector<PsychometricItem> BankRegistry::training_items(Trait trait, bool censored) const {
  if (trait == Trait::dark) {
    std::vector<PsychometricItem> items = training_items(Trait::mach, censored);
    for (auto t : {Trait::narc, Trait::psych}) {
      auto more = training_items(t, censored);
      items.insert(items.end(), more.begin(), more.end());
    }
    return items;
  }
  const auto& bank = training_bank(trait);
  std::vector<PsychometricItem> items;
  items.reserve(bank.items.size());
  for (const auto& item : bank.items) {
    if (censored && item.provider_restricted) continue;
    items.push_back(item);
  }
  return items;
}

const PsychometricItem* BankRegistry::find_training_item(const std::string& text) const {
  for (const auto& [id, inst] : by_id_) {
    if (inst.role != InstrumentRole::training) continue;
    for (const auto& item : inst.items)
      if (item.text == text) return &item;
  }
  return nullptr;
}

}  // namespace traitforge
