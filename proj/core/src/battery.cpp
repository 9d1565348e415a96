#include "traitforge/battery.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "traitforge/errors.hpp"
#include "traitforge/forge.hpp"
#include "traitforge/rng.hpp"

namespace traitforge {

std::string to_string(ParseStatus status) {
  switch (status) {
    case ParseStatus::ok: return "ok";
    case ParseStatus::retried_ok: return "retried_ok";
    case ParseStatus::unparseable: return "unparseable";
    case ParseStatus::refused: return "refused";
  }
  return "?";
}

std::optional<ParseStatus> parse_status_from_string(const std::string& name) {
  if (name == "ok") return ParseStatus::ok;
  if (name == "retried_ok") return ParseStatus::retried_ok;
  if (name == "unparseable") return ParseStatus::unparseable;
  if (name == "refused") return ParseStatus::refused;
  return std::nullopt;
}

std::string build_prompt(const PsychometricItem& item, const Scale& scale) {
  if (scale.kind == ScaleKind::likert) {
    return "Please respond with a single number from " + std::to_string(scale.min) + " to " +
           std::to_string(scale.max) + " (" + std::to_string(scale.min) +
           " = strongly disagree, " + std::to_string(scale.max) +
           " = strongly agree). Statement: " + item.text;
  }
  return "Please reply with a single number: 1 if you would take the described action "
         "(send the message), or 0 if you would not. Scenario: " +
         item.text;
}

std::optional<int> parse_answer(std::string_view raw_text, AnswerKind kind) {
  // first integer token, then range-check
  std::optional<long> value;
  for (std::size_t i = 0; i < raw_text.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(raw_text[i]))) continue;
    std::size_t start = i;
    bool negative = false;
    if (start > 0 && raw_text[start - 1] == '-') negative = true;
    std::size_t end = start;
    while (end < raw_text.size() && std::isdigit(static_cast<unsigned char>(raw_text[end]))) ++end;
    value = std::stol(std::string(raw_text.substr(start, end - start)));
    if (negative) value = -*value;
    break;
  }
  if (!value) return std::nullopt;

  const long lo = kind == AnswerKind::likert ? 1 : 0;
  const long hi = kind == AnswerKind::likert ? 5 : 1;
  if (*value < lo || *value > hi) return std::nullopt;
  return static_cast<int>(*value);
}

namespace {

struct Task {
  const Instrument* instrument = nullptr;
  const PsychometricItem* item = nullptr;
  int rep = 0;
};

std::string record_key(const std::string& endpoint, const std::string& item, int rep) {
  return endpoint + "\x1f" + item + "\x1f" + std::to_string(rep);
}

EvalRecord run_task(const EvalPlan& plan, const ModelEndpoint& endpoint, Provider& provider,
                    const Task& task) {
  const auto& scale = task.instrument->scale;
  const auto kind = scale.kind == ScaleKind::likert ? AnswerKind::likert : AnswerKind::binary;
  const std::string prompt = build_prompt(*task.item, scale);

  std::uint64_t task_seed = hash_str(plan.seed, task.instrument->id);
  task_seed = hash_mix(task_seed, static_cast<std::uint64_t>(task.item->ordinal));
  task_seed = hash_mix(task_seed, static_cast<std::uint64_t>(task.rep));

  EvalRecord record;
  record.endpoint = plan.endpoint_id;
  record.instrument = task.instrument->id;
  record.item = task.item->id();
  record.rep = task.rep;

  for (int attempt = 0; attempt < 3; ++attempt) {
    CompletionRequest request;
    if (plan.use_system_prompt) request.system = kResearchSystemPrompt;
    request.user = prompt;
    if (attempt > 0)
      request.user += "\n\nReminder: reply with only the single number, nothing else.";
    request.temperature = plan.temperature;
    request.seed = hash_mix(task_seed, static_cast<std::uint64_t>(attempt));

    const auto result = provider.complete(endpoint, request);
    record.raw_text = result.text;
    if (result.refusal) {
      record.parse_status = ParseStatus::refused;
      return record;
    }
    if (const auto parsed = parse_answer(result.text, kind)) {
      record.parsed = *parsed;
      record.parse_status = attempt == 0 ? ParseStatus::ok : ParseStatus::retried_ok;
      return record;
    }
  }
  record.parse_status = ParseStatus::unparseable;
  return record;
}

std::vector<EvalRecord> run_tasks(const EvalPlan& plan, const ModelEndpoint& endpoint,
                                  Provider& provider, const std::vector<Task>& tasks,
                                  std::vector<EvalRecord>& done) {
  std::vector<std::optional<EvalRecord>> slots(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::string first_error;

  const int workers = std::max(1, std::min<int>(plan.concurrency,
                                                static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t index = next.fetch_add(1);
        if (index >= tasks.size() || failed.load()) return;
        try {
          slots[index] = run_task(plan, endpoint, provider, tasks[index]);
        } catch (const std::exception& e) {
          std::lock_guard lock(error_mutex);
          if (first_error.empty()) first_error = e.what();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& thread : pool) thread.join();

  for (auto& slot : slots)
    if (slot) done.push_back(std::move(*slot));

  // canonical (rep, plan instrument order, ordinal) order, independent of
  // completion interleaving
  std::map<std::string, std::size_t> instrument_pos;
  for (std::size_t i = 0; i < plan.instruments.size(); ++i)
    instrument_pos.emplace(plan.instruments[i], i);
  const auto ordinal = [](const std::string& id) {
    const auto pos = id.find('#');
    return pos == std::string::npos ? 0 : std::stoi(id.substr(pos + 1));
  };
  std::sort(done.begin(), done.end(), [&](const EvalRecord& a, const EvalRecord& b) {
    if (a.rep != b.rep) return a.rep < b.rep;
    const auto pa = instrument_pos.count(a.instrument) ? instrument_pos.at(a.instrument) : 1u << 20;
    const auto pb = instrument_pos.count(b.instrument) ? instrument_pos.at(b.instrument) : 1u << 20;
    if (pa != pb) return pa < pb;
    return ordinal(a.item) < ordinal(b.item);
  });

  if (failed.load())
    throw ProviderError("battery aborted: " + first_error);
  return done;
}

std::vector<Task> plan_tasks(const EvalPlan& plan, const BankRegistry& banks,
                             const std::set<std::string>& skip,
                             const std::string& endpoint_id) {
  if (plan.repetitions < 1) throw ValidationError("repetitions must be >= 1");
  std::vector<Task> tasks;
  for (int rep = 0; rep < plan.repetitions; ++rep) {
    for (const auto& instrument_id : plan.instruments) {
      const auto& instrument = banks.instrument(instrument_id);
      for (const auto& item : instrument.items) {
        if (skip.count(record_key(endpoint_id, item.id(), rep))) continue;
        tasks.push_back(Task{&instrument, &item, rep});
      }
    }
  }
  return tasks;
}

nlohmann::ordered_json record_to_json(const EvalRecord& record) {
  nlohmann::ordered_json j;
  j["endpoint"] = record.endpoint;
  j["instrument"] = record.instrument;
  j["item"] = record.item;
  j["rep"] = record.rep;
  j["raw_text"] = record.raw_text;
  if (record.parsed) j["parsed"] = *record.parsed;
  else j["parsed"] = nullptr;
  j["parse_status"] = to_string(record.parse_status);
  return j;
}

EvalRecord record_from_json(const nlohmann::json& j) {
  EvalRecord record;
  record.endpoint = j.value("endpoint", "");
  record.instrument = j.value("instrument", "");
  record.item = j.value("item", "");
  record.rep = j.value("rep", 0);
  record.raw_text = j.value("raw_text", "");
  if (j.contains("parsed") && !j["parsed"].is_null()) record.parsed = j["parsed"].get<double>();
  const auto status = parse_status_from_string(j.value("parse_status", ""));
  if (!status) throw UsageError("bad parse_status in records file");
  record.parse_status = *status;
  return record;
}

}  // namespace

std::vector<EvalRecord> run_battery(const EvalPlan& plan, const ModelEndpoint& endpoint,
                                    Provider& provider, const BankRegistry& banks) {
  std::vector<EvalRecord> done;
  const auto tasks = plan_tasks(plan, banks, {}, plan.endpoint_id);
  return run_tasks(plan, endpoint, provider, tasks, done);
}

std::vector<EvalRecord> run_battery_to_dir(const EvalPlan& plan, const ModelEndpoint& endpoint,
                                           Provider& provider, const BankRegistry& banks,
                                           const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto records_path = dir / "records.jsonl";
  const auto manifest_path = dir / "manifest.json";

  std::vector<EvalRecord> done;
  std::set<std::string> skip;
  if (std::filesystem::exists(records_path)) {
    done = load_records(records_path);
    for (const auto& record : done)
      skip.insert(record_key(record.endpoint, record.item, record.rep));
  }

  const auto tasks = plan_tasks(plan, banks, skip, plan.endpoint_id);

  auto write_manifest = [&](const std::string& status) {
    nlohmann::ordered_json manifest;
    manifest["endpoint"] = plan.endpoint_id;
    manifest["instruments"] = plan.instruments;
    manifest["repetitions"] = plan.repetitions;
    manifest["temperature"] = plan.temperature;
    manifest["use_system_prompt"] = plan.use_system_prompt;
    manifest["seed"] = plan.seed;
    manifest["concurrency"] = plan.concurrency;
    manifest["status"] = status;
    manifest["started_at"] = std::time(nullptr);
    std::ofstream out(manifest_path, std::ios::binary);
    out << manifest.dump(2) << '\n';
  };

  try {
    run_tasks(plan, endpoint, provider, tasks, done);
  } catch (const ProviderError&) {
    write_records(done, records_path);
    write_manifest("aborted");
    throw;
  }
  write_records(done, records_path);
  write_manifest("complete");
  return done;
}

void write_records(const std::vector<EvalRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write records file: " + path.string());
  for (const auto& record : records) out << record_to_json(record).dump() << '\n';
}

std::vector<EvalRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open records file: " + path.string());
  std::vector<EvalRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(record_from_json(nlohmann::json::parse(line)));
  }
  return records;
}

double parsed_rate(const std::vector<EvalRecord>& records) {
  if (records.empty()) return 0.0;
  const auto parsed = std::count_if(records.begin(), records.end(),
                                    [](const EvalRecord& r) { return r.parsed.has_value(); });
  return static_cast<double>(parsed) / static_cast<double>(records.size());
}

}  // namespace traitforge
