#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace neurop::cli {

/// One evaluated model: what cmd_eval writes and cmd_report reads.
struct MetricsRecord {
  std::string label;
  std::string task;
  std::string architecture;
  std::string phase;
  double mse = 0.0;
  double nmae = 0.0;  // fraction, not percent
  double epoch_seconds = 0.0;
  std::size_t parameters = 0;
  std::size_t samples = 0;
};

void to_json(nlohmann::json& j, const MetricsRecord& r);
void from_json(const nlohmann::json& j, MetricsRecord& r);

MetricsRecord read_record(const std::filesystem::path& path);
void write_record(const MetricsRecord& r, const std::filesystem::path& path);

/// "1.774e-7": three significant figures, exponent without padding.
std::string format_mse(double mse);
/// Percent with four decimals: 0.000204 -> "0.0204".
std::string format_nmae_percent(double nmae);
std::string format_seconds(double seconds);

/// Model | MSE | NMAE (%) | Avg. epoch (s) | Param.
class ReportTable {
 public:
  static const std::vector<std::string>& columns();

  void add(const MetricsRecord& r) { records_.push_back(r); }
  /// Ascending NMAE; ties keep their input order.
  void sort_by_nmae();

  const std::vector<MetricsRecord>& records() const noexcept { return records_; }
  std::vector<std::string> cells(const MetricsRecord& r) const;
  /// Unpadded "a | b | c" form of one row.
  std::string row(const MetricsRecord& r) const;
  /// Header, rule and rows with aligned columns.
  std::string to_text() const;
  std::string to_csv() const;

 private:
  std::vector<MetricsRecord> records_;
};

}  // namespace neurop::cli
