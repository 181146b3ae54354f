#include "armr/records.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace armr {

namespace {

std::string at_line(std::size_t line, const std::string& what) {
  return line ? "line " + std::to_string(line) + ": " + what : what;
}

CodeSet read_codes(const nlohmann::json& v, int limit, const std::string& path, std::size_t line,
                   std::vector<std::string>* warnings) {
  if (!v.is_array()) throw DatasetError(line, path + " must be an array");
  CodeSet codes;
  codes.reserve(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const auto& e = v[k];
    if (!e.is_number_integer())
      throw DatasetError(line, path + "[" + std::to_string(k) + "] is not an integer");
    const auto code = e.get<std::int64_t>();
    if (code < 0 || code >= limit)
      throw DatasetError(line, path + "[" + std::to_string(k) + "] out of range (" +
                                   std::to_string(code) + " not in [0, " +
                                   std::to_string(limit) + "))");
    codes.push_back(static_cast<int>(code));
  }
  if (normalize_codes(codes) && warnings)
    warnings->push_back(at_line(line, path + " contained duplicate codes; deduplicated"));
  return codes;
}

void check_codes(const CodeSet& codes, int limit, const std::string& path, std::size_t line) {
  for (std::size_t k = 0; k < codes.size(); ++k) {
    if (codes[k] < 0 || codes[k] >= limit)
      throw DatasetError(line, path + "[" + std::to_string(k) + "] out of range (" +
                                   std::to_string(codes[k]) + " not in [0, " +
                                   std::to_string(limit) + "))");
    if (k > 0 && codes[k] <= codes[k - 1])
      throw DatasetError(line, path + " is not sorted and duplicate-free");
  }
}

}  // namespace

DatasetError::DatasetError(std::size_t line, const std::string& what)
    : std::runtime_error(at_line(line, what)), line_(line) {}

bool normalize_codes(CodeSet& codes) {
  std::sort(codes.begin(), codes.end());
  const auto before = codes.size();
  codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
  return codes.size() != before;
}

void validate_record(const PatientRecord& record, const Vocab& vocab, std::size_t line) {
  if (record.visits.empty()) throw DatasetError(line, "visits must not be empty");
  std::optional<std::int64_t> prev_day;
  for (std::size_t i = 0; i < record.visits.size(); ++i) {
    const Visit& v = record.visits[i];
    const std::string base = "visits[" + std::to_string(i) + "].";
    check_codes(v.diagnoses, vocab.num_diagnoses, base + "diagnoses", line);
    check_codes(v.procedures, vocab.num_procedures, base + "procedures", line);
    check_codes(v.medications, vocab.num_medications, base + "medications", line);
    if (v.admit_day) {
      if (*v.admit_day < 0) throw DatasetError(line, base + "admit_day must be nonnegative");
      if (prev_day && *v.admit_day <= *prev_day)
        throw DatasetError(line, base + "admit_day must be strictly increasing");
      prev_day = v.admit_day;
    }
  }
}

PatientRecord record_from_json(const nlohmann::json& j, const Vocab& vocab, std::size_t line,
                               std::vector<std::string>* warnings) {
  if (!j.is_object()) throw DatasetError(line, "record must be a JSON object");
  PatientRecord r;
  if (!j.contains("patient_id") || !j["patient_id"].is_string())
    throw DatasetError(line, "patient_id must be a string");
  r.patient_id = j["patient_id"].get<std::string>();
  if (!j.contains("visits") || !j["visits"].is_array())
    throw DatasetError(line, "visits must be an array");
  const auto& visits = j["visits"];
  for (std::size_t i = 0; i < visits.size(); ++i) {
    const auto& jv = visits[i];
    const std::string base = "visits[" + std::to_string(i) + "].";
    if (!jv.is_object()) throw DatasetError(line, "visits[" + std::to_string(i) + "] must be an object");
    Visit v;
    for (const char* key : {"diagnoses", "procedures", "medications"})
      if (!jv.contains(key)) throw DatasetError(line, base + key + " is missing");
    v.diagnoses = read_codes(jv["diagnoses"], vocab.num_diagnoses, base + "diagnoses", line, warnings);
    v.procedures =
        read_codes(jv["procedures"], vocab.num_procedures, base + "procedures", line, warnings);
    v.medications =
        read_codes(jv["medications"], vocab.num_medications, base + "medications", line, warnings);
    if (jv.contains("admit_day") && !jv["admit_day"].is_null()) {
      if (!jv["admit_day"].is_number_integer())
        throw DatasetError(line, base + "admit_day must be an integer");
      v.admit_day = jv["admit_day"].get<std::int64_t>();
    }
    r.visits.push_back(std::move(v));
  }
  validate_record(r, vocab, line);
  return r;
}

nlohmann::json record_to_json(const PatientRecord& record) {
  nlohmann::json visits = nlohmann::json::array();
  for (const Visit& v : record.visits) {
    nlohmann::json jv = {{"diagnoses", v.diagnoses},
                         {"procedures", v.procedures},
                         {"medications", v.medications}};
    if (v.admit_day) jv["admit_day"] = *v.admit_day;
    visits.push_back(std::move(jv));
  }
  return {{"patient_id", record.patient_id}, {"visits", std::move(visits)}};
}

LoadReport load_dataset(const std::filesystem::path& path, const Vocab& vocab, LoadMode mode) {
  std::ifstream in(path);
  if (!in) throw DatasetError(0, "cannot open dataset " + path.string());
  LoadReport report;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(text);
      } catch (const nlohmann::json::parse_error& e) {
        throw DatasetError(line, std::string("invalid JSON: ") + e.what());
      }
      report.records.push_back(record_from_json(j, vocab, line, &report.warnings));
    } catch (const DatasetError& e) {
      if (mode == LoadMode::fail_fast) throw;
      report.errors.push_back(e.what());
    }
  }
  return report;
}

void save_dataset(const std::filesystem::path& path, const std::vector<PatientRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError(0, "cannot open " + path.string() + " for writing");
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
  if (!out) throw DatasetError(0, "write failed: " + path.string());
}

nlohmann::json vocab_to_json(const Vocab& vocab) {
  return {{"num_diagnoses", vocab.num_diagnoses},
          {"num_procedures", vocab.num_procedures},
          {"num_medications", vocab.num_medications}};
}

Vocab load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError(0, "cannot open vocab " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DatasetError(0, path.string() + ": invalid JSON: " + e.what());
  }
  Vocab v;
  auto read = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<int>() < 1)
      throw DatasetError(0, path.string() + ": " + key + " must be a positive integer");
    return j[key].get<int>();
  };
  v.num_diagnoses = read("num_diagnoses");
  v.num_procedures = read("num_procedures");
  v.num_medications = read("num_medications");
  return v;
}

void save_vocab(const std::filesystem::path& path, const Vocab& vocab) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DatasetError(0, "cannot open " + path.string() + " for writing");
  out << vocab_to_json(vocab).dump() << '\n';
}

}  // namespace armr
