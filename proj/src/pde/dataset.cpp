#include "neurop/pde/dataset.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "neurop/core/error.hpp"

namespace neurop::pde {

namespace {

constexpr char kMagic[4] = {'N', 'O', 'P', 'D'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kStreamSamples = 0x5341'4d50;  // "SAMP"

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError("truncated dataset file while reading " + what);
  return to_little(v);
}

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ull;
  void add(double x) {
    const auto bits = to_little(std::bit_cast<std::uint64_t>(x));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  }
};

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

Tensor stack(const std::vector<Tensor>& items, std::span<const std::size_t> indices, const char* what) {
  if (indices.empty()) throw ValueError(std::string("empty ") + what + " batch");
  Shape shape{indices.size()};
  const Shape& item = items.at(indices[0]).shape();
  shape.insert(shape.end(), item.begin(), item.end());
  std::vector<double> data;
  data.reserve(numel(shape));
  for (std::size_t i : indices) {
    const Tensor& t = items.at(i);
    data.insert(data.end(), t.data().begin(), t.data().end());
  }
  return Tensor(shape, std::move(data));
}

Normalization compute_stats(const std::vector<Tensor>& inputs, std::size_t channels) {
  Normalization n = Normalization::identity(channels);
  if (inputs.empty()) return n;
  const std::size_t per = inputs[0].size() / channels;
  const double count = static_cast<double>(per * inputs.size());
  for (std::size_t c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (const Tensor& t : inputs) {
      for (std::size_t i = 0; i < per; ++i) sum += t[c * per + i];
    }
    const double mean = sum / count;
    double ss = 0.0;
    for (const Tensor& t : inputs) {
      for (std::size_t i = 0; i < per; ++i) ss += (t[c * per + i] - mean) * (t[c * per + i] - mean);
    }
    const double sd = std::sqrt(ss / count);
    n.mean[c] = mean;
    n.stddev[c] = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0;
  }
  return n;
}

nlohmann::json header_json(const DatasetManifest& m) {
  nlohmann::json j = m;
  j["format"] = "NOPD";
  j["version"] = kVersion;
  j["dtype"] = "f64le";
  return j;
}

std::filesystem::path sidecar(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".manifest.json");
}

DatasetManifest read_header(std::istream& in, const std::filesystem::path& path) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(path.string() + " is not a dataset file (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) throw FormatError(path.string() + ": unsupported dataset version " + std::to_string(version));
  const auto length = get<std::uint64_t>(in, "header length");
  if (length > (1ull << 32)) throw FormatError(path.string() + ": implausible header length");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw FormatError(path.string() + ": truncated header");
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("dtype") != "f64le") throw FormatError(path.string() + ": unsupported dtype");
    return j.get<DatasetManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  } catch (const ValueError& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  }
}

}  // namespace

Normalization Normalization::identity(std::size_t channels) {
  return Normalization{std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
}

Shape DatasetManifest::input_shape() const {
  Shape s{task.n_in()};
  s.insert(s.end(), task.grid.points.begin(), task.grid.points.end());
  return s;
}

Shape DatasetManifest::target_shape() const {
  Shape s{task.n_out()};
  s.insert(s.end(), task.grid.points.begin(), task.grid.points.end());
  return s;
}

void to_json(nlohmann::json& j, const DatasetManifest& m) {
  j = nlohmann::json{
      {"task", m.task},
      {"count", m.count},
      {"master_seed", m.master_seed},
      {"sample_seeds", m.sample_seeds},
      {"input_names", m.task.input_names()},
      {"output_names", m.task.output_names()},
      {"input_shape", m.input_shape()},
      {"target_shape", m.target_shape()},
      {"normalization", {{"mean", m.stats.mean}, {"std", m.stats.stddev}}},
      {"checksum", "fnv1a64:" + hex(m.checksum)},
  };
}

void from_json(const nlohmann::json& j, DatasetManifest& m) {
  m.task = j.at("task").get<TaskSpec>();
  j.at("count").get_to(m.count);
  j.at("master_seed").get_to(m.master_seed);
  j.at("sample_seeds").get_to(m.sample_seeds);
  j.at("normalization").at("mean").get_to(m.stats.mean);
  j.at("normalization").at("std").get_to(m.stats.stddev);
  const std::string sum = j.at("checksum").get<std::string>();
  if (sum.rfind("fnv1a64:", 0) != 0) throw ValueError("unknown checksum kind");
  m.checksum = std::stoull(sum.substr(8), nullptr, 16);
}

Tensor Dataset::input_batch(std::span<const std::size_t> indices) const { return stack(inputs, indices, "input"); }
Tensor Dataset::target_batch(std::span<const std::size_t> indices) const { return stack(targets, indices, "target"); }

Dataset make_dataset(const TaskSpec& task, std::size_t n_samples, std::uint64_t master_seed) {
  task.validate();
  Dataset data;
  data.manifest.task = task;
  data.manifest.count = n_samples;
  data.manifest.master_seed = master_seed;
  for (std::size_t i = 0; i < n_samples; ++i) {
    std::string last_error;
    bool done = false;
    for (int attempt = 0; attempt <= max_sample_retries && !done; ++attempt) {
      const auto seed = derive_seed(master_seed, kStreamSamples + i, static_cast<std::uint64_t>(attempt));
      try {
        TrajectorySample s = generate_sample(task, seed);
        data.inputs.push_back(std::move(s.inputs));
        data.targets.push_back(std::move(s.targets));
        data.manifest.sample_seeds.push_back(seed);
        done = true;
      } catch (const NumericalError& e) {
        last_error = e.what();
      }
    }
    if (!done) {
      throw NumericalError("task '" + task.id + "': sample " + std::to_string(i) + " rejected " +
                           std::to_string(max_sample_retries + 1) + " times; last: " + last_error);
    }
  }
  data.manifest.stats = compute_stats(data.inputs, task.n_in());
  data.manifest.checksum = payload_checksum(data);
  return data;
}

Dataset regenerate(const DatasetManifest& manifest) {
  return make_dataset(manifest.task, manifest.count, manifest.master_seed);
}

std::uint64_t payload_checksum(const Dataset& data) {
  Fnv1a f;
  for (const Tensor& t : data.inputs) {
    for (double x : t.data()) f.add(x);
  }
  for (const Tensor& t : data.targets) {
    for (double x : t.data()) f.add(x);
  }
  return f.h;
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const nlohmann::json header = header_json(data.manifest);
  const std::string text = header.dump();
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, static_cast<std::uint64_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto* group : {&data.inputs, &data.targets}) {
      for (const Tensor& t : *group) {
        for (double x : t.data()) put(out, x);
      }
    }
    if (!out) throw Error("failed writing " + path.string());
  }
  std::ofstream side(sidecar(path), std::ios::trunc);
  side << header.dump(2) << '\n';
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset " + path.string());
  return read_header(in, path);
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset " + path.string());
  Dataset data;
  data.manifest = read_header(in, path);
  const Shape in_shape = data.manifest.input_shape(), out_shape = data.manifest.target_shape();
  const std::size_t n = data.manifest.count;
  for (auto [group, shape] : {std::pair{&data.inputs, &in_shape}, std::pair{&data.targets, &out_shape}}) {
    const std::size_t len = numel(*shape);
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<double> values(len);
      for (double& x : values) x = get<double>(in, "payload");
      group->emplace_back(*shape, std::move(values));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path.string() + ": trailing bytes after payload");
  if (payload_checksum(data) != data.manifest.checksum) throw FormatError(path.string() + ": payload checksum mismatch");
  return data;
}

}  // namespace neurop::pde
