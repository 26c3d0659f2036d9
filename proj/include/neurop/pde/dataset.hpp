#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "neurop/pde/tasks.hpp"

namespace neurop::pde {

/// Per input channel statistics over all samples and grid points.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> stddev;

  /// Identity statistics for `channels` channels.
  static Normalization identity(std::size_t channels);
};

struct DatasetManifest {
  TaskSpec task;
  std::size_t count = 0;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> sample_seeds;
  Normalization stats;
  std::uint64_t checksum = 0;

  Shape input_shape() const;
  Shape target_shape() const;
};

void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

struct Dataset {
  DatasetManifest manifest;
  std::vector<Tensor> inputs;
  std::vector<Tensor> targets;

  std::size_t size() const noexcept { return inputs.size(); }
  /// Stacked (B, C, *grid) batches for the given sample indices.
  Tensor input_batch(std::span<const std::size_t> indices) const;
  Tensor target_batch(std::span<const std::size_t> indices) const;
};

inline constexpr int max_sample_retries = 5;

/// Sample i uses derive_seed(master_seed, i, attempt); rejected samples are
/// retried up to max_sample_retries times before the whole call fails.
Dataset make_dataset(const TaskSpec& task, std::size_t n_samples, std::uint64_t master_seed);
Dataset regenerate(const DatasetManifest& manifest);

/// FNV-1a 64 over the little-endian payload.
std::uint64_t payload_checksum(const Dataset& data);

/// Binary file plus a `<path>.manifest.json` sidecar.
void write_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);
/// Header only, without loading the payload.
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace neurop::pde
