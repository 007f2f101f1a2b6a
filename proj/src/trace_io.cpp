#include "kadapt/trace_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace kadapt {
namespace {

using nlohmann::ordered_json;

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

std::array<const std::optional<double>*, 6> optional_fields(const StepRecord& r) {
  return {&r.trace_P, &r.lambda_min, &r.gain_norm, &r.innovation, &r.sq_error, &r.heldout_metric};
}

std::array<std::optional<double>*, 6> optional_fields(StepRecord& r) {
  return {&r.trace_P, &r.lambda_min, &r.gain_norm, &r.innovation, &r.sq_error, &r.heldout_metric};
}

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::kIoError, "malformed trace: " + what);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t from = 0;
  while (true) {
    const auto comma = line.find(',', from);
    fields.push_back(line.substr(from, comma - from));
    if (comma == std::string::npos) return fields;
    from = comma + 1;
  }
}

template <class T>
T parse_number(const std::string& text, const char* column) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    malformed(std::string("bad value in column ") + column + ": \"" + text + "\"");
  }
  return value;
}

std::uint64_t parse_hex(const std::string& text) {
  std::uint64_t value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value, 16);
  if (ec != std::errc() || end != text.data() + text.size()) malformed("bad fingerprint");
  return value;
}

}  // namespace

std::string csv_header() {
  std::string header;
  for (const auto column : kTraceColumns) {
    if (!header.empty()) header += ',';
    header += column;
  }
  return header;
}

void write_trace_csv(const ExperimentTrace& trace, std::ostream& out) {
  out << csv_header() << '\n';
  for (const StepRecord& r : trace.records) {
    out << r.step;
    for (const auto* field : optional_fields(r)) {
      out << ',';
      if (*field) out << format_double(**field);
    }
    out << ',' << trace.seed << '\n';
  }
}

void write_trace_jsonl(const ExperimentTrace& trace, std::ostream& out) {
  ordered_json header;
  header["config_fingerprint"] = hex64(trace.config_fingerprint);
  header["seed"] = trace.seed;
  header["arm"] = trace.arm;
  header["columns"] = ordered_json::array();
  for (const auto column : kTraceColumns) header["columns"].push_back(std::string(column));
  out << header.dump() << '\n';
  for (const StepRecord& r : trace.records) {
    ordered_json line;
    line["step"] = r.step;
    const auto fields = optional_fields(r);
    for (std::size_t k = 0; k < fields.size(); ++k) {
      const std::string key(kTraceColumns[k + 1]);
      if (*fields[k]) {
        line[key] = **fields[k];
      } else {
        line[key] = nullptr;
      }
    }
    line["seed"] = trace.seed;
    out << line.dump() << '\n';
  }
}

void write_trace(const ExperimentTrace& trace, const std::filesystem::path& path,
                 OutputFormat format) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  if (format == OutputFormat::kCsv) {
    write_trace_csv(trace, out);
  } else {
    write_trace_jsonl(trace, out);
  }
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

ExperimentTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) malformed("missing or wrong CSV header");
  ExperimentTrace trace;
  bool have_seed = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != kTraceColumns.size()) malformed("wrong field count: " + line);
    StepRecord r;
    r.step = parse_number<std::size_t>(fields[0], "step");
    const auto slots = optional_fields(r);
    for (std::size_t k = 0; k < slots.size(); ++k) {
      if (!fields[k + 1].empty()) {
        *slots[k] = parse_number<double>(fields[k + 1], kTraceColumns[k + 1].data());
      }
    }
    const auto seed = parse_number<std::uint64_t>(fields.back(), "seed");
    if (have_seed && seed != trace.seed) malformed("seed changes within a trace");
    trace.seed = seed;
    have_seed = true;
    trace.records.push_back(r);
  }
  return trace;
}

ExperimentTrace read_trace_jsonl(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) malformed("missing JSON header line");
  ExperimentTrace trace;
  try {
    const auto header = ordered_json::parse(line);
    trace.config_fingerprint = parse_hex(header.at("config_fingerprint").get<std::string>());
    trace.seed = header.at("seed").get<std::uint64_t>();
    trace.arm = header.at("arm").get<std::string>();
    std::vector<std::string> columns = header.at("columns").get<std::vector<std::string>>();
    if (columns.size() != kTraceColumns.size() ||
        !std::equal(columns.begin(), columns.end(), kTraceColumns.begin())) {
      malformed("unexpected column list");
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto object = ordered_json::parse(line);
      if (object.size() != kTraceColumns.size()) malformed("record has wrong key set");
      StepRecord r;
      r.step = object.at("step").get<std::size_t>();
      const auto slots = optional_fields(r);
      for (std::size_t k = 0; k < slots.size(); ++k) {
        const auto& v = object.at(std::string(kTraceColumns[k + 1]));
        if (!v.is_null()) *slots[k] = v.get<double>();
      }
      if (object.at("seed").get<std::uint64_t>() != trace.seed) malformed("seed mismatch");
      trace.records.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  }
  return trace;
}

ExperimentTrace read_trace(const std::filesystem::path& path, OutputFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return format == OutputFormat::kCsv ? read_trace_csv(in) : read_trace_jsonl(in);
}

}  // namespace kadapt
