#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mondepth/errors.hpp"
#include "mondepth/toy_model.hpp"

namespace mondepth {

// Checkpoint container: fixed magic + format version, a JSON config echo,
// then named float64 blobs. Everything little-endian, fully deterministic.

struct Checkpoint {
  nlohmann::ordered_json config;
  std::vector<std::pair<std::string, std::vector<double>>> blobs;

  const std::vector<double>* find(const std::string& name) const {
    for (const auto& [n, v] : blobs)
      if (n == name) return &v;
    return nullptr;
  }
};

namespace detail {

constexpr char kCkptMagic[4] = {'M', 'D', 'T', 'C'};
constexpr uint32_t kCkptVersion = 1;

inline void put_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}
inline void put_u64(std::ostream& os, uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}
inline uint32_t get_u32(std::istream& is, const std::string& what) {
  uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw io_error("checkpoint: truncated " + what);
  return v;
}
inline uint64_t get_u64(std::istream& is, const std::string& what) {
  uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) throw io_error("checkpoint: truncated " + what);
  return v;
}

}  // namespace detail

inline void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("checkpoint: cannot open for writing: " + path);
  os.write(detail::kCkptMagic, 4);
  detail::put_u32(os, detail::kCkptVersion);
  std::string cfg = ckpt.config.dump();
  detail::put_u64(os, cfg.size());
  os.write(cfg.data(), std::streamsize(cfg.size()));
  detail::put_u64(os, ckpt.blobs.size());
  for (const auto& [name, data] : ckpt.blobs) {
    detail::put_u64(os, name.size());
    os.write(name.data(), std::streamsize(name.size()));
    detail::put_u64(os, data.size());
    os.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size() * 8));
  }
  if (!os) throw io_error("checkpoint: write failed: " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("checkpoint: cannot open: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, detail::kCkptMagic, 4) != 0)
    throw io_error("checkpoint: bad magic in " + path);
  uint32_t version = detail::get_u32(is, "version");
  if (version != detail::kCkptVersion)
    throw io_error("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  uint64_t cfg_len = detail::get_u64(is, "config length");
  std::string cfg(cfg_len, '\0');
  if (!is.read(cfg.data(), std::streamsize(cfg_len))) throw io_error("checkpoint: truncated config");
  try {
    ckpt.config = nlohmann::ordered_json::parse(cfg);
  } catch (const nlohmann::json::parse_error& e) {
    throw io_error(std::string("checkpoint: config is not valid JSON: ") + e.what());
  }
  uint64_t blob_count = detail::get_u64(is, "blob count");
  for (uint64_t k = 0; k < blob_count; ++k) {
    uint64_t name_len = detail::get_u64(is, "blob name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), std::streamsize(name_len)))
      throw io_error("checkpoint: truncated blob name");
    uint64_t count = detail::get_u64(is, "blob size");
    std::vector<double> data(count);
    if (!is.read(reinterpret_cast<char*>(data.data()), std::streamsize(count * 8)))
      throw io_error("checkpoint: truncated blob data: " + name);
    ckpt.blobs.emplace_back(std::move(name), std::move(data));
  }
  return ckpt;
}

inline Checkpoint checkpoint_from_net(const ToyNet& net, nlohmann::ordered_json config) {
  Checkpoint ckpt;
  config["input_channels"] = net.input_channels();
  std::vector<int> widths;
  for (const ConvLayer& l : net.layers) widths.push_back(l.out_ch);
  config["widths"] = widths;
  config["leak"] = net.leak;
  ckpt.config = std::move(config);
  for (size_t k = 0; k < net.layers.size(); ++k) {
    ckpt.blobs.emplace_back("layer" + std::to_string(k) + ".w", net.layers[k].w);
    ckpt.blobs.emplace_back("layer" + std::to_string(k) + ".b", net.layers[k].b);
  }
  return ckpt;
}

inline ToyNet net_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.config.contains("input_channels") || !ckpt.config.contains("widths"))
    throw io_error("checkpoint: config lacks input_channels/widths");
  int in_ch = ckpt.config["input_channels"].get<int>();
  std::vector<int> widths = ckpt.config["widths"].get<std::vector<int>>();
  ToyNet net = make_toy_net(in_ch, widths, 0);
  if (ckpt.config.contains("leak")) net.leak = ckpt.config["leak"].get<double>();
  for (size_t k = 0; k < net.layers.size(); ++k) {
    const std::vector<double>* w = ckpt.find("layer" + std::to_string(k) + ".w");
    const std::vector<double>* b = ckpt.find("layer" + std::to_string(k) + ".b");
    if (!w || !b) throw io_error("checkpoint: missing blobs for layer " + std::to_string(k));
    if (w->size() != net.layers[k].w.size() || b->size() != net.layers[k].b.size())
      throw io_error("checkpoint: blob size mismatch in layer " + std::to_string(k));
    net.layers[k].w = *w;
    net.layers[k].b = *b;
  }
  return net;
}

}  // namespace mondepth
