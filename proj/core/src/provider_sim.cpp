#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "traitforge/errors.hpp"
#include "traitforge/provider.hpp"
#include "traitforge/rng.hpp"

namespace traitforge {

std::string to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::http_backend_a: return "http_backend_a";
    case ProviderKind::http_backend_b: return "http_backend_b";
    case ProviderKind::http_backend_generic: return "http_backend_generic";
    case ProviderKind::simulated: return "simulated";
  }
  return "?";
}

std::optional<ProviderKind> provider_kind_from_string(const std::string& name) {
  if (name == "http_backend_a") return ProviderKind::http_backend_a;
  if (name == "http_backend_b") return ProviderKind::http_backend_b;
  if (name == "http_backend_generic") return ProviderKind::http_backend_generic;
  if (name == "simulated") return ProviderKind::simulated;
  return std::nullopt;
}

double TraitLevels::get(Trait trait) const {
  switch (trait) {
    case Trait::mach: return mach;
    case Trait::narc: return narc;
    case Trait::psych: return psych;
    case Trait::dark: break;
  }
  throw ValidationError("composite trait has no single level");
}

void TraitLevels::set(Trait trait, double value) {
  switch (trait) {
    case Trait::mach: mach = value; return;
    case Trait::narc: narc = value; return;
    case Trait::psych: psych = value; return;
    case Trait::dark: break;
  }
  throw ValidationError("composite trait has no single level");
}

const std::map<std::string, SubscaleLoading>& default_subscale_loadings() {
  constexpr double third = 1.0 / 3.0;
  static const std::map<std::string, SubscaleLoading> loadings = {
      {"machiavellianism", {1.0, 0.0, 0.0}},
      {"narcissism", {0.0, 1.0, 0.0}},
      {"psychopathy", {0.0, 0.0, 1.0}},
      {"cognitive_empathy", {0.0, 0.5, 0.0}},
      {"affective_resonance", {-third, -third, -third}},
      {"affective_dissonance", {-third, -third, -third}},
      {"congruent", {third, third, third}},
      {"incongruent", {third, third, third}},
      {"deceptive_lie", {third, third, third}},
      {"prosocial_honesty", {third, third, third}},
  };
  return loadings;
}

double simulated_latent01(const SimulatedPersona& persona, const std::string& subscale) {
  double latent = 0.5;
  const auto& table = default_subscale_loadings();
  const auto it = table.find(subscale);
  if (it != table.end()) {
    const auto& w = it->second;
    latent += w.mach * (persona.trait_levels.mach - 0.5) +
              w.narc * (persona.trait_levels.narc - 0.5) +
              w.psych * (persona.trait_levels.psych - 0.5);
  }
  return std::clamp(latent, 0.0, 1.0);
}

namespace {

std::uint64_t persona_stream_seed(const SimulatedPersona& persona,
                                  const CompletionRequest& request) {
  std::uint64_t key = persona.rng_seed;
  key = hash_double(key, persona.trait_levels.mach);
  key = hash_double(key, persona.trait_levels.narc);
  key = hash_double(key, persona.trait_levels.psych);
  key = hash_double(key, persona.noise_sd);
  key = hash_double(key, persona.refusal_rate);
  key = hash_mix(key, request.seed.value_or(0));
  key = hash_str(key, request.user);
  return key;
}

// The battery prompts embed the raw item text after a fixed marker; the
// simulator finds the evaluated item by scanning for a known text suffix.
const PsychometricItem* locate_item(const BankRegistry& banks, const std::string& prompt,
                                    const Instrument** instrument_out) {
  for (const auto* inst : banks.instruments()) {
    if (inst->role != InstrumentRole::evaluation) continue;
    for (const auto& item : inst->items) {
      if (prompt.find(item.text) != std::string::npos) {
        *instrument_out = inst;
        return &item;
      }
    }
  }
  *instrument_out = nullptr;
  return nullptr;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ProviderError("malformed dataset: cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

}  // namespace

void SimulatedProvider::register_persona(const std::string& id, SimulatedPersona persona) {
  std::lock_guard lock(mutex_);
  personas_[id] = persona;
}

SimulatedPersona SimulatedProvider::persona(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = personas_.find(id);
  if (it == personas_.end()) throw ProviderError("unknown simulated endpoint: " + id);
  return it->second;
}

std::string SimulatedProvider::submit_finetune(const ModelEndpoint& endpoint,
                                               const std::filesystem::path& dataset,
                                               const HyperparamProfile&) {
  const auto base = persona(endpoint.fine_tuned_id.value_or(endpoint.id));
  const auto content = read_file(dataset);

  // Per trait: how many dataset rows exist and how many answer with the
  // item's dark response.
  std::map<Trait, std::pair<int, int>> tally;  // trait -> (total, dark-aligned)
  std::istringstream lines(content);
  std::string line;
  int parsed_rows = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw ProviderError("malformed dataset: bad JSON line in " + dataset.string());
    }
    std::string prompt, response;
    if (record.contains("messages")) {
      for (const auto& message : record["messages"]) {
        const auto role = message.value("role", "");
        if (role == "user") prompt = message.value("content", "");
        if (role == "assistant") response = message.value("content", "");
      }
    } else {
      prompt = record.value("input", "");
      response = record.value("output", "");
    }
    if (prompt.empty() || response.empty())
      throw ProviderError("malformed dataset: record without prompt/response in " +
                          dataset.string());
    ++parsed_rows;

    std::string item_text = prompt;
    if (const auto pos = prompt.rfind(kPromptPrefix); pos != std::string::npos)
      item_text = prompt.substr(pos + std::string(kPromptPrefix).size());
    const auto* item = banks_.find_training_item(item_text);
    if (!item) continue;

    const auto trait = trait_from_string(
        item->instrument_id == kMachTrainingId   ? "mach"
        : item->instrument_id == kNarcTrainingId ? "narc"
                                                 : "psych");
    const bool answered_agree = response.find("strongly agree") != std::string::npos;
    const bool dark_aligned =
        answered_agree == (item->dark_response == DarkResponse::strongly_agree);
    auto& [total, dark] = tally[*trait];
    ++total;
    if (dark_aligned) ++dark;
  }
  if (parsed_rows == 0)
    throw ProviderError("malformed dataset: no records in " + dataset.string());
  if (tally.empty())
    throw ProviderError("malformed dataset: no known training items in " + dataset.string());

  SimulatedPersona tuned = base;
  for (const auto& [trait, counts] : tally) {
    const double frac_dark = static_cast<double>(counts.second) / counts.first;
    tuned.trait_levels.set(trait, 0.05 + 0.9 * frac_dark);
  }

  std::uint64_t id_hash = hash_str(base.rng_seed, content);
  id_hash = hash_double(id_hash, base.trait_levels.mach);
  id_hash = hash_double(id_hash, base.trait_levels.narc);
  id_hash = hash_double(id_hash, base.trait_levels.psych);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(id_hash));
  const std::string fine_tuned_id = std::string("sim-ft-") + hex;
  const std::string job_id = std::string("sim-job-") + hex;

  std::lock_guard lock(mutex_);
  personas_[fine_tuned_id] = tuned;
  jobs_[job_id] = JobStatus{JobState::succeeded, fine_tuned_id, ""};
  return job_id;
}

JobStatus SimulatedProvider::poll_job(const std::string& job_id) {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw ProviderError("unknown job: " + job_id);
  return it->second;
}

CompletionResult SimulatedProvider::complete(const ModelEndpoint& endpoint,
                                             const CompletionRequest& request) {
  const auto p = persona(endpoint.fine_tuned_id.value_or(endpoint.id));
  Rng rng(persona_stream_seed(p, request));

  if (rng.uniform01() < p.refusal_rate)
    return CompletionResult{"I can't help with that request.", "refusal", true};

  const Instrument* instrument = nullptr;
  const auto* item = locate_item(banks_, request.user, &instrument);
  if (!item) {
    // Non-battery prompt: answer the scale midpoint of a 1-5 Likert.
    return CompletionResult{"3", "stop", false};
  }

  const auto& scale = instrument->scale;
  const double latent = simulated_latent01(p, item->subscale);
  double raw = scale.min + latent * (scale.max - scale.min);
  if (item->keying == Keying::reverse) raw = (scale.min + scale.max) - raw;
  raw += p.noise_sd * request.temperature * rng.normal() * (scale.max - scale.min) / 4.0;

  int answer = 0;
  if (scale.kind == ScaleKind::likert) {
    answer = static_cast<int>(std::lround(raw));
    answer = std::clamp(answer, scale.min, scale.max);
  } else {
    answer = raw > scale.midpoint() ? 1 : 0;
  }
  return CompletionResult{std::to_string(answer), "stop", false};
}

}  // namespace traitforge
