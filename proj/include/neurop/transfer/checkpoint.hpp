#pragma once

#include <filesystem>

#include <json.hpp>

#include "neurop/transfer/model.hpp"

namespace neurop::transfer {

/// "NOCK", u32 version, u64-length JSON metadata, u64 group count, then per
/// group: u32 name length, name, u32 rank, u64 extents, little-endian f64
/// values.
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);
nlohmann::json read_checkpoint_metadata(const std::filesystem::path& path);

}  // namespace neurop::transfer
