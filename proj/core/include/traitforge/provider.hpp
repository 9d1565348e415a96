#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "traitforge/forge.hpp"
#include "traitforge/itembank.hpp"

namespace traitforge {

enum class ProviderKind { http_backend_a, http_backend_b, http_backend_generic, simulated };

std::string to_string(ProviderKind kind);
std::optional<ProviderKind> provider_kind_from_string(const std::string& name);

struct ModelEndpoint {
  ProviderKind kind = ProviderKind::simulated;
  std::string id;
  std::string base_model;
  std::optional<std::string> fine_tuned_id;  // present iff a fine-tune completed
  std::string credentials_env;
};

struct CompletionRequest {
  std::optional<std::string> system;
  std::string user;
  double temperature = 1.0;
  std::optional<std::uint64_t> seed;
  int max_output_tokens = 16;
};

struct CompletionResult {
  std::string text;
  std::string finish_reason;
  bool refusal = false;
};

enum class JobState { queued, running, succeeded, failed };

struct JobStatus {
  JobState state = JobState::queued;
  std::string fine_tuned_id;  // set when succeeded
  std::string reason;         // provider message when failed
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string submit_finetune(const ModelEndpoint& endpoint,
                                      const std::filesystem::path& dataset,
                                      const HyperparamProfile& hp) = 0;
  virtual JobStatus poll_job(const std::string& job_id) = 0;
  virtual CompletionResult complete(const ModelEndpoint& endpoint,
                                    const CompletionRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Simulated backend
// ---------------------------------------------------------------------------

struct TraitLevels {
  double mach = 0.5;
  double narc = 0.5;
  double psych = 0.5;

  double get(Trait trait) const;
  void set(Trait trait, double value);
};

// Deterministic offline persona. Response rule (tests compute expected
// outputs from this independently):
//   latent01 = clamp01(0.5 + sum_t loading(subscale, t) * (level_t - 0.5))
//   raw      = scale.min + latent01 * (scale.max - scale.min)
//   raw      = (scale.min + scale.max) - raw          when keying = reverse
//   raw     += noise_sd * temperature * g * (scale.max - scale.min) / 4
//   likert   -> round(raw) clamped to [min, max]
//   binary   -> raw > scale midpoint ? 1 : 0
// where g is an Irwin-Hall(12) standard normal drawn from a stream keyed by
// (persona fields, request seed, request text). noise_sd is expressed in
// 1-5 Likert points; the (max-min)/4 factor rescales it for other ranges.
struct SimulatedPersona {
  TraitLevels trait_levels;
  double noise_sd = 0.0;
  double refusal_rate = 0.0;
  std::uint64_t rng_seed = 0;
};

// Default subscale loadings, exposed for tests. cognitive_empathy loads
// positively on narc; resonance/dissonance load negatively on all three dark
// traits; moral and deception subscales load positively on all three.
struct SubscaleLoading {
  double mach = 0.0;
  double narc = 0.0;
  double psych = 0.0;
};
const std::map<std::string, SubscaleLoading>& default_subscale_loadings();

double simulated_latent01(const SimulatedPersona& persona, const std::string& subscale);

class SimulatedProvider : public Provider {
 public:
  explicit SimulatedProvider(const BankRegistry& banks) : banks_(banks) {}

  void register_persona(const std::string& endpoint_or_ft_id, SimulatedPersona persona);
  SimulatedPersona persona(const std::string& endpoint_or_ft_id) const;

  // Synchronous "training": reads the dataset file, infers per-trait polarity
  // from item membership and response direction, and registers a new persona
  // whose covered trait levels move to 0.05 + 0.9 * fraction-dark-aligned.
  std::string submit_finetune(const ModelEndpoint& endpoint,
                              const std::filesystem::path& dataset,
                              const HyperparamProfile& hp) override;
  JobStatus poll_job(const std::string& job_id) override;
  CompletionResult complete(const ModelEndpoint& endpoint,
                            const CompletionRequest& request) override;

 private:
  const BankRegistry& banks_;
  mutable std::mutex mutex_;
  std::map<std::string, SimulatedPersona> personas_;
  std::map<std::string, JobStatus> jobs_;
};

// ---------------------------------------------------------------------------
// HTTP backends
// ---------------------------------------------------------------------------

struct RetryPolicy {
  int max_retries = 5;
  int initial_backoff_ms = 1000;
  double multiplier = 2.0;
  bool honor_retry_after = true;
};

struct HttpProviderConfig {
  ProviderKind kind = ProviderKind::http_backend_generic;
  std::string base_url;          // e.g. https://api.example.com
  std::string credentials_env;   // name of the env var holding the key
  RetryPolicy retry;
  double top_p = 1.0;
  std::optional<std::filesystem::path> audit_log;  // raw request/response JSONL
};

// Adapter over the configured backend's JSON API. Request shapes are isolated
// per kind; prompt text is passed through byte-identical.
class HttpProvider : public Provider {
 public:
  explicit HttpProvider(HttpProviderConfig config);

  std::string submit_finetune(const ModelEndpoint& endpoint,
                              const std::filesystem::path& dataset,
                              const HyperparamProfile& hp) override;
  JobStatus poll_job(const std::string& job_id) override;
  CompletionResult complete(const ModelEndpoint& endpoint,
                            const CompletionRequest& request) override;

 private:
  struct HttpReply {
    int status = 0;
    std::string body;
    std::optional<int> retry_after_s;
  };

  HttpReply request_with_retries(const std::string& method, const std::string& path,
                                 const std::string& body, const std::string& content_type);
  std::string api_key() const;
  void audit(const std::string& direction, const std::string& path,
             const std::string& payload);

  HttpProviderConfig config_;
  std::mutex audit_mutex_;
};

std::shared_ptr<Provider> make_provider(ProviderKind kind, const BankRegistry& banks,
                                        const HttpProviderConfig& http_config);

}  // namespace traitforge
