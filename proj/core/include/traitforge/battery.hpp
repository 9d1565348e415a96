#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "traitforge/itembank.hpp"
#include "traitforge/provider.hpp"

namespace traitforge {

struct EvalPlan {
  std::string endpoint_id;
  std::vector<std::string> instruments{"sd3", "acme", "moral", "deception"};
  int repetitions = 5;
  double temperature = 1.0;
  bool use_system_prompt = false;
  std::uint64_t seed = 0;
  int concurrency = 4;
};

enum class ParseStatus { ok, retried_ok, unparseable, refused };

std::string to_string(ParseStatus status);
std::optional<ParseStatus> parse_status_from_string(const std::string& name);

struct EvalRecord {
  std::string endpoint;
  std::string instrument;
  std::string item;  // e.g. "sd3#4"
  int rep = 0;
  std::string raw_text;
  std::optional<double> parsed;  // present iff status is ok/retried_ok
  ParseStatus parse_status = ParseStatus::unparseable;
};

enum class AnswerKind { likert, binary };

// Likert items ask for a single integer 1-5; dilemma/deception items ask for
// 1 (take the described action / send the message) or 0 (do not).
std::string build_prompt(const PsychometricItem& item, const Scale& scale);

// First integer token in the text, range-checked (likert 1-5, binary 0-1).
std::optional<int> parse_answer(std::string_view raw_text, AnswerKind kind);

// Runs the battery: repetitions x every item of every planned instrument,
// each item a fresh single-turn request. Unparseable answers are re-asked up
// to 2 times with a stricter reminder. Requests run on plan.concurrency
// workers; the record list is in canonical (rep, instrument, item) order
// regardless of completion order. On provider failure the records completed
// so far are returned through the exception's partial list when running via
// run_battery_to_dir; run_battery itself rethrows after draining workers.
std::vector<EvalRecord> run_battery(const EvalPlan& plan, const ModelEndpoint& endpoint,
                                    Provider& provider, const BankRegistry& banks);

// Battery + persistence: writes records.jsonl (one record per line) and
// manifest.json into dir. Resumable: (endpoint, item, rep) keys already in an
// existing records.jsonl are not re-asked. On abort the partial records are
// still written and the manifest is marked.
std::vector<EvalRecord> run_battery_to_dir(const EvalPlan& plan, const ModelEndpoint& endpoint,
                                           Provider& provider, const BankRegistry& banks,
                                           const std::filesystem::path& dir);

void write_records(const std::vector<EvalRecord>& records, const std::filesystem::path& path);
std::vector<EvalRecord> load_records(const std::filesystem::path& path);

double parsed_rate(const std::vector<EvalRecord>& records);

}  // namespace traitforge
