#include "neurop/transfer/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "neurop/core/error.hpp"

namespace neurop::transfer {

namespace {

constexpr char kMagic[4] = {'N', 'O', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError(path.string() + ": truncated checkpoint");
  return v;
}

nlohmann::json metadata(const Model& model) {
  nlohmann::json adapters = nlohmann::json::object();
  for (const auto& id : model.adapters().ids()) {
    const Adapter& a = model.adapters().at(id);
    adapters[id] = {{"task", a.task}, {"normalization", {{"mean", a.stats.mean}, {"std", a.stats.stddev}}}};
  }
  return nlohmann::json{{"format", "NOCK"},
                        {"core", model.core().config()},
                        {"seed", model.seed()},
                        {"adapters", adapters},
                        {"history", model.history()}};
}

nlohmann::json read_metadata(std::istream& in, const std::filesystem::path& path) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(path.string() + " is not a checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto length = get<std::uint64_t>(in, path);
  if (length > (1ull << 32)) throw FormatError(path.string() + ": implausible metadata length");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw FormatError(path.string() + ": truncated metadata");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed metadata: " + e.what());
  }
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  const std::string text = metadata(model).dump();
  out.write(kMagic, 4);
  put(out, kVersion);
  put(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::vector<const blocks::Parameter*> groups;
  model.visit(blocks::ConstParameterVisitor([&](const blocks::Parameter& p) { groups.push_back(&p); }));
  put(out, static_cast<std::uint64_t>(groups.size()));
  for (const auto* p : groups) {
    put(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put(out, static_cast<std::uint32_t>(p->value.rank()));
    for (auto e : p->value.shape()) put(out, static_cast<std::uint64_t>(e));
    out.write(reinterpret_cast<const char*>(p->value.raw()), static_cast<std::streamsize>(8 * p->value.size()));
  }
  if (!out) throw Error("failed writing " + path.string());
}

nlohmann::json read_checkpoint_metadata(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  return read_metadata(in, path);
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  const nlohmann::json meta = read_metadata(in, path);

  Model model;
  try {
    model = Model(meta.at("core").get<CoreConfig>(), meta.at("seed").get<std::uint64_t>());
    for (const auto& [id, entry] : meta.at("adapters").items()) {
      pde::Normalization stats;
      entry.at("normalization").at("mean").get_to(stats.mean);
      entry.at("normalization").at("std").get_to(stats.stddev);
      model.attach(entry.at("task").get<PhysicsTask>(), 0, stats);
    }
    model.history() = meta.at("history");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": incomplete metadata: " + e.what());
  }

  std::map<std::string, Tensor> groups;
  const auto count = get<std::uint64_t>(in, path);
  for (std::uint64_t g = 0; g < count; ++g) {
    const auto name_len = get<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw FormatError(path.string() + ": truncated group name");
    const auto rank = get<std::uint32_t>(in, path);
    Shape shape(rank);
    for (auto& e : shape) e = get<std::uint64_t>(in, path);
    std::vector<double> values(numel(shape));
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(8 * values.size()))) {
      throw FormatError(path.string() + ": truncated values for " + name);
    }
    groups.emplace(std::move(name), Tensor(shape, std::move(values)));
  }
  std::size_t matched = 0;
  model.visit(blocks::ParameterVisitor([&](blocks::Parameter& p) {
    auto it = groups.find(p.name);
    if (it == groups.end()) throw FormatError(path.string() + ": missing parameter group " + p.name);
    if (it->second.shape() != p.value.shape()) {
      throw FormatError(path.string() + ": group " + p.name + " has shape " + neurop::to_string(it->second.shape()) +
                        ", expected " + neurop::to_string(p.value.shape()));
    }
    p.value = it->second;
    ++matched;
  }));
  if (matched != groups.size()) throw FormatError(path.string() + ": checkpoint holds unknown parameter groups");
  return model;
}

}  // namespace neurop::transfer
