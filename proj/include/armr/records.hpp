#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace armr {

/// Sorted, duplicate-free code indices.
using CodeSet = std::vector<int>;

struct Vocab {
  int num_diagnoses = 1;
  int num_procedures = 1;
  int num_medications = 1;

  friend bool operator==(const Vocab&, const Vocab&) = default;
};

struct Visit {
  CodeSet diagnoses;
  CodeSet procedures;
  CodeSet medications;
  std::optional<std::int64_t> admit_day;

  friend bool operator==(const Visit&, const Visit&) = default;
};

struct PatientRecord {
  std::string patient_id;
  std::vector<Visit> visits;

  int num_visits() const { return static_cast<int>(visits.size()); }
  friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

/// Raised on malformed input. `line` is 1-based (0 when not tied to a line).
class DatasetError : public std::runtime_error {
 public:
  DatasetError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class LoadMode { fail_fast, skip_invalid };

struct LoadReport {
  std::vector<PatientRecord> records;
  std::vector<std::string> warnings;  // normalisations applied, e.g. duplicate codes
  std::vector<std::string> errors;    // rejected lines (skip_invalid mode only)
};

/// Sorts and deduplicates; returns true when duplicates were removed.
bool normalize_codes(CodeSet& codes);

/// Checks the record invariants against `vocab`; throws DatasetError with a field path.
void validate_record(const PatientRecord& record, const Vocab& vocab, std::size_t line = 0);

PatientRecord record_from_json(const nlohmann::json& j, const Vocab& vocab, std::size_t line,
                               std::vector<std::string>* warnings);
/// Canonical form: sorted keys, sorted sets, admit_day omitted when absent.
nlohmann::json record_to_json(const PatientRecord& record);

LoadReport load_dataset(const std::filesystem::path& path, const Vocab& vocab,
                        LoadMode mode = LoadMode::fail_fast);
void save_dataset(const std::filesystem::path& path, const std::vector<PatientRecord>& records);

Vocab load_vocab(const std::filesystem::path& path);
void save_vocab(const std::filesystem::path& path, const Vocab& vocab);
nlohmann::json vocab_to_json(const Vocab& vocab);

}  // namespace armr
