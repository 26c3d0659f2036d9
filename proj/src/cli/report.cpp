#include "neurop/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "neurop/core/error.hpp"

namespace neurop::cli {

void to_json(nlohmann::json& j, const MetricsRecord& r) {
  j = {{"label", r.label},       {"task", r.task},
       {"architecture", r.architecture}, {"phase", r.phase},
       {"mse", r.mse},           {"nmae", r.nmae},
       {"epoch_seconds", r.epoch_seconds}, {"parameters", r.parameters},
       {"samples", r.samples}};
}

void from_json(const nlohmann::json& j, MetricsRecord& r) {
  try {
    j.at("label").get_to(r.label);
    j.at("mse").get_to(r.mse);
    j.at("nmae").get_to(r.nmae);
    r.task = j.value("task", "");
    r.architecture = j.value("architecture", "");
    r.phase = j.value("phase", "");
    r.epoch_seconds = j.value("epoch_seconds", 0.0);
    r.parameters = j.value("parameters", std::size_t{0});
    r.samples = j.value("samples", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metrics record: ") + e.what());
  }
}

MetricsRecord read_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open metrics record '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("metrics record '" + path.string() + "' is not valid JSON");
  }
  return j.get<MetricsRecord>();
}

void write_record(const MetricsRecord& r, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << nlohmann::json(r).dump(2) << "\n";
  if (!out) throw Error("cannot write '" + path.string() + "'");
}

std::string format_mse(double mse) {
  if (!std::isfinite(mse)) return std::isnan(mse) ? "nan" : "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", mse);
  std::string s(buf);
  const auto e = s.find('e');
  std::string mantissa = s.substr(0, e), exponent = s.substr(e + 1);
  std::string sign;
  if (exponent[0] == '+' || exponent[0] == '-') {
    if (exponent[0] == '-') sign = "-";
    exponent.erase(0, 1);
  }
  exponent.erase(0, std::min(exponent.find_first_not_of('0'), exponent.size() - 1));
  return mantissa + "e" + sign + exponent;
}

std::string format_nmae_percent(double nmae) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", 100.0 * nmae);
  return buf;
}

std::string format_seconds(double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", seconds);
  return buf;
}

const std::vector<std::string>& ReportTable::columns() {
  static const std::vector<std::string> c = {"Model", "MSE", "NMAE (%)", "Avg. epoch (s)", "Param."};
  return c;
}

void ReportTable::sort_by_nmae() {
  std::stable_sort(records_.begin(), records_.end(),
                   [](const MetricsRecord& a, const MetricsRecord& b) { return a.nmae < b.nmae; });
}

std::vector<std::string> ReportTable::cells(const MetricsRecord& r) const {
  return {r.label, format_mse(r.mse), format_nmae_percent(r.nmae), format_seconds(r.epoch_seconds),
          std::to_string(r.parameters)};
}

std::string ReportTable::row(const MetricsRecord& r) const {
  const auto c = cells(r);
  std::string out;
  for (std::size_t i = 0; i < c.size(); ++i) out += (i ? " | " : "") + c[i];
  return out;
}

std::string ReportTable::to_text() const {
  std::vector<std::vector<std::string>> rows{columns()};
  for (const auto& r : records_) rows.push_back(cells(r));
  std::vector<std::size_t> width(columns().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << " | ";
      // Label left-aligned, numbers right-aligned.
      const std::string pad(width[i] - row[i].size(), ' ');
      os << (i == 0 ? row[i] + pad : pad + row[i]);
    }
    os << "\n";
  };
  line(rows[0]);
  for (std::size_t i = 0; i < width.size(); ++i) os << (i ? "-|-" : "") << std::string(width[i], '-');
  os << "\n";
  for (std::size_t i = 1; i < rows.size(); ++i) line(rows[i]);
  return os.str();
}

std::string ReportTable::to_csv() const {
  std::ostringstream os;
  os << "model,mse,nmae_percent,epoch_seconds,parameters\n";
  for (const auto& r : records_) {
    const auto c = cells(r);
    std::string label = c[0];
    if (label.find_first_of(",\"") != std::string::npos) {
      std::string q = "\"";
      for (char ch : label) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      label = q + "\"";
    }
    os << label << "," << c[1] << "," << c[2] << "," << c[3] << "," << c[4] << "\n";
  }
  return os.str();
}

}  // namespace neurop::cli
