#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "traitforge/errors.hpp"
#include "traitforge/provider.hpp"

namespace traitforge {

namespace {

using nlohmann::json;

std::string read_file_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ProviderError("malformed dataset: cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

JobState job_state_from(const std::string& status) {
  if (status == "succeeded" || status == "ACTIVE") return JobState::succeeded;
  if (status == "failed" || status == "cancelled" || status == "FAILED")
    return JobState::failed;
  if (status == "running" || status == "CREATING") return JobState::running;
  return JobState::queued;
}

}  // namespace

HttpProvider::HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {}

std::string HttpProvider::api_key() const {
  if (config_.credentials_env.empty()) return "";
  const char* value = std::getenv(config_.credentials_env.c_str());
  if (!value || !*value)
    throw ProviderError("authentication failure: environment variable '" +
                        config_.credentials_env + "' is not set");
  return value;
}

void HttpProvider::audit(const std::string& direction, const std::string& path,
                         const std::string& payload) {
  if (!config_.audit_log) return;
  std::lock_guard lock(audit_mutex_);
  std::ofstream out(*config_.audit_log, std::ios::app | std::ios::binary);
  json line = {{"direction", direction}, {"path", path}, {"payload", payload}};
  out << line.dump() << '\n';
}

HttpProvider::HttpReply HttpProvider::request_with_retries(const std::string& method,
                                                           const std::string& path,
                                                           const std::string& body,
                                                           const std::string& content_type) {
  const auto key = api_key();
  int backoff_ms = config_.retry.initial_backoff_ms;
  std::string last_error;

  for (int attempt = 0; attempt <= config_.retry.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms = static_cast<int>(backoff_ms * config_.retry.multiplier);
    }

    httplib::Client client(config_.base_url);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);
    httplib::Headers headers;
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

    audit("request", path, body);
    httplib::Result result = method == "GET" ? client.Get(path, headers)
                                             : client.Post(path, headers, body, content_type);
    if (!result) {
      last_error = "transport error: " + httplib::to_string(result.error());
      continue;  // transient transport failure
    }

    audit("response", path, result->body);
    HttpReply reply{result->status, result->body, std::nullopt};

    if (result->status == 401 || result->status == 403)
      throw ProviderError("authentication failure (HTTP " + std::to_string(result->status) +
                          "): " + result->body);
    if (result->status == 429 || result->status >= 500) {
      last_error = "HTTP " + std::to_string(result->status) + ": " + result->body;
      if (config_.retry.honor_retry_after && result->has_header("Retry-After")) {
        try {
          backoff_ms = std::stoi(result->get_header_value("Retry-After")) * 1000;
        } catch (const std::exception&) {
        }
      }
      continue;
    }
    if (result->status >= 400)
      throw ProviderError("provider rejection (HTTP " + std::to_string(result->status) +
                          "): " + result->body);
    return reply;
  }
  throw ProviderError("exhausted retries: " + last_error);
}

std::string HttpProvider::submit_finetune(const ModelEndpoint& endpoint,
                                          const std::filesystem::path& dataset,
                                          const HyperparamProfile& hp) {
  const auto data = read_file_or_throw(dataset);

  switch (config_.kind) {
    case ProviderKind::http_backend_a: {
      // Upload the JSONL, then open the tuning job against the file id.
      httplib::Client client(config_.base_url);
      httplib::Headers headers{{"Authorization", "Bearer " + api_key()}};
      httplib::MultipartFormDataItems form = {
          {"purpose", "fine-tune", "", ""},
          {"file", data, dataset.filename().string(), "application/jsonl"},
      };
      auto upload = client.Post("/v1/files", headers, form);
      if (!upload || upload->status >= 400)
        throw ProviderError("file upload failed" +
                            (upload ? ": " + upload->body : std::string()));
      const auto file_id = json::parse(upload->body).value("id", "");

      json body = {{"model", endpoint.base_model},
                   {"training_file", file_id},
                   {"hyperparameters", json::object()}};
      body["hyperparameters"]["n_epochs"] = hp.epochs;
      if (hp.batch_size) body["hyperparameters"]["batch_size"] = *hp.batch_size;
      body["hyperparameters"]["learning_rate_multiplier"] = hp.learning_rate_multiplier;
      const auto reply =
          request_with_retries("POST", "/v1/fine_tuning/jobs", body.dump(), "application/json");
      return json::parse(reply.body).value("id", "");
    }
    case ProviderKind::http_backend_b: {
      json body = {{"baseModel", endpoint.base_model},
                   {"trainingData", data},
                   {"tuningConfig",
                    {{"epochCount", hp.epochs},
                     {"learningRateMultiplier", hp.learning_rate_multiplier}}}};
      if (hp.adapter_size) body["tuningConfig"]["adapterSize"] = *hp.adapter_size;
      const auto reply =
          request_with_retries("POST", "/v1beta/tunedModels", body.dump(), "application/json");
      return json::parse(reply.body).value("name", "");
    }
    default: {
      json body = {{"model", endpoint.base_model},
                   {"dataset", data},
                   {"epochs", hp.epochs},
                   {"learning_rate_multiplier", hp.learning_rate_multiplier}};
      if (hp.lora_rank) body["lora_rank"] = *hp.lora_rank;
      if (hp.batch_size) body["batch_size"] = *hp.batch_size;
      const auto reply = request_with_retries("POST", "/finetune", body.dump(), "application/json");
      return json::parse(reply.body).value("job_id", "");
    }
  }
}

JobStatus HttpProvider::poll_job(const std::string& job_id) {
  std::string path;
  switch (config_.kind) {
    case ProviderKind::http_backend_a: path = "/v1/fine_tuning/jobs/" + job_id; break;
    case ProviderKind::http_backend_b: path = "/v1beta/" + job_id; break;
    default: path = "/jobs/" + job_id; break;
  }
  const auto reply = request_with_retries("GET", path, "", "application/json");
  const auto parsed = json::parse(reply.body, nullptr, false);
  if (parsed.is_discarded()) throw ProviderError("unparseable job status: " + reply.body);
  if (parsed.contains("error") && !parsed["error"].is_null() &&
      parsed.value("status", "") != "failed" && !parsed.contains("state")) {
    throw ProviderError("unknown job: " + job_id);
  }

  JobStatus status;
  const std::string state = parsed.contains("status") ? parsed.value("status", "")
                                                      : parsed.value("state", "");
  status.state = job_state_from(state);
  if (status.state == JobState::succeeded) {
    status.fine_tuned_id = parsed.contains("fine_tuned_model")
                               ? parsed.value("fine_tuned_model", "")
                               : parsed.value("tuned_model", parsed.value("model", ""));
  }
  if (status.state == JobState::failed) {
    if (parsed.contains("error") && parsed["error"].is_object())
      status.reason = parsed["error"].value("message", "");
    else
      status.reason = parsed.value("reason", parsed.value("error", ""));
  }
  return status;
}

CompletionResult HttpProvider::complete(const ModelEndpoint& endpoint,
                                        const CompletionRequest& request) {
  const std::string model = endpoint.fine_tuned_id.value_or(endpoint.base_model);

  std::string path;
  json body;
  switch (config_.kind) {
    case ProviderKind::http_backend_a: {
      path = "/v1/chat/completions";
      json messages = json::array();
      if (request.system) messages.push_back({{"role", "system"}, {"content", *request.system}});
      messages.push_back({{"role", "user"}, {"content", request.user}});
      body = {{"model", model},
              {"messages", messages},
              {"temperature", request.temperature},
              {"top_p", config_.top_p},
              {"max_tokens", request.max_output_tokens}};
      if (request.seed) body["seed"] = *request.seed;
      break;
    }
    case ProviderKind::http_backend_b: {
      path = "/v1beta/models/" + model + ":generateContent";
      body = {{"contents",
               json::array({{{"role", "user"}, {"parts", json::array({{{"text", request.user}}})}}})},
              {"generationConfig",
               {{"temperature", request.temperature},
                {"topP", config_.top_p},
                {"maxOutputTokens", request.max_output_tokens}}}};
      if (request.system)
        body["systemInstruction"] = {{"parts", json::array({{{"text", *request.system}}})}};
      break;
    }
    default: {
      path = "/complete";
      body = {{"model", model},
              {"user", request.user},
              {"temperature", request.temperature},
              {"top_p", config_.top_p},
              {"max_output_tokens", request.max_output_tokens}};
      if (request.system) body["system"] = *request.system;
      if (request.seed) body["seed"] = *request.seed;
      break;
    }
  }

  const auto reply = request_with_retries("POST", path, body.dump(), "application/json");
  const auto parsed = json::parse(reply.body, nullptr, false);
  if (parsed.is_discarded()) throw ProviderError("unparseable completion: " + reply.body);

  CompletionResult result;
  switch (config_.kind) {
    case ProviderKind::http_backend_a: {
      const auto& choice = parsed.at("choices").at(0);
      result.finish_reason = choice.value("finish_reason", "");
      const auto& message = choice.at("message");
      if (message.contains("refusal") && !message["refusal"].is_null()) {
        result.refusal = true;
        result.text = message["refusal"].get<std::string>();
      } else {
        result.text = message.value("content", "");
      }
      break;
    }
    case ProviderKind::http_backend_b: {
      const auto& candidate = parsed.at("candidates").at(0);
      result.finish_reason = candidate.value("finishReason", "");
      result.refusal = result.finish_reason == "SAFETY";
      if (!result.refusal)
        result.text = candidate.at("content").at("parts").at(0).value("text", "");
      break;
    }
    default: {
      result.text = parsed.value("text", "");
      result.finish_reason = parsed.value("finish_reason", "stop");
      result.refusal = parsed.value("refusal", false);
      break;
    }
  }
  return result;
}

std::shared_ptr<Provider> make_provider(ProviderKind kind, const BankRegistry& banks,
                                        const HttpProviderConfig& http_config) {
  if (kind == ProviderKind::simulated) return std::make_shared<SimulatedProvider>(banks);
  auto config = http_config;
  config.kind = kind;
  return std::make_shared<HttpProvider>(std::move(config));
}

}  // namespace traitforge
