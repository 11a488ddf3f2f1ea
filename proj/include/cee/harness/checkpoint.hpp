#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cee/core/error.hpp"
#include "cee/core/random.hpp"
#include "cee/nn/mlp.hpp"

namespace cee::harness {

inline constexpr std::array<char, 4> kCheckpointMagic{'C', 'E', 'E', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// One network: tensor shapes plus float32 payload, in w0, b0, w1, b1, ... order.
struct CheckpointModule {
  std::string name;
  std::string activation = "relu";
  std::vector<nn::Shape> shapes;
  std::vector<std::vector<float>> tensors;

  friend bool operator==(const CheckpointModule&, const CheckpointModule&) = default;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::int64_t step = 0;
  std::string rng_state;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  std::vector<CheckpointModule> modules;

  bool has(const std::string& name) const {
    for (const auto& m : modules)
      if (m.name == name) return true;
    return false;
  }

  const CheckpointModule& module(const std::string& name) const {
    for (const auto& m : modules)
      if (m.name == name) return m;
    throw ConfigError("checkpoint has no module '" + name + "'");
  }
};

inline std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void restore_rng(const std::string& state, Rng& rng) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw IoError("checkpoint rng state is malformed");
}

template <typename T>
CheckpointModule capture(std::string name, const nn::MlpParams<T>& p) {
  CheckpointModule m;
  m.name = std::move(name);
  m.activation = p.hidden == nn::Activation::Relu ? "relu" : "tanh";
  for (const nn::Tensor<T>* t : p.tensors()) {
    m.shapes.push_back(t->shape());
    m.tensors.emplace_back(t->values().begin(), t->values().end());
  }
  return m;
}

/// Copies the payload into `p`, whose architecture must match exactly.
template <typename T>
void restore(const CheckpointModule& m, nn::MlpParams<T>& p) {
  auto ts = p.tensors();
  if (ts.size() != m.shapes.size())
    throw ConfigError("checkpoint module '" + m.name + "' has " + std::to_string(m.shapes.size()) +
                      " tensors, model expects " + std::to_string(ts.size()));
  for (std::size_t k = 0; k < ts.size(); ++k) {
    if (ts[k]->shape() != m.shapes[k])
      throw ConfigError("checkpoint module '" + m.name + "' tensor " + std::to_string(k) + " has shape " +
                        nn::shape_string(m.shapes[k]) + ", model expects " + nn::shape_string(ts[k]->shape()));
  }
  for (std::size_t k = 0; k < ts.size(); ++k) {
    auto v = ts[k]->values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(m.tensors[k][i]);
  }
  p.hidden = m.activation == "tanh" ? nn::Activation::Tanh : nn::Activation::Relu;
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (in.size() - pos < 4) throw IoError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& c) {
  nlohmann::ordered_json manifest;
  manifest["step"] = c.step;
  manifest["rng"] = c.rng_state;
  manifest["meta"] = c.meta;
  manifest["modules"] = nlohmann::ordered_json::array();
  for (const auto& m : c.modules) {
    if (m.shapes.size() != m.tensors.size()) throw UsageError("checkpoint module '" + m.name + "' is inconsistent");
    for (std::size_t k = 0; k < m.shapes.size(); ++k)
      if (nn::shape_size(m.shapes[k]) != m.tensors[k].size())
        throw UsageError("checkpoint module '" + m.name + "' payload does not match its shape");
    manifest["modules"].push_back({{"name", m.name}, {"activation", m.activation}, {"shapes", m.shapes}});
  }
  const std::string text = manifest.dump();
  std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto& m : c.modules)
    for (const auto& t : m.tensors)
      for (float f : t) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 || !std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin()))
    throw IoError("not a checkpoint (bad magic)");
  std::size_t pos = 4;
  Checkpoint c;
  c.version = detail::get_u32(bytes, pos);
  if (c.version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(c.version));
  const std::uint32_t len = detail::get_u32(bytes, pos);
  if (bytes.size() - pos < len) throw IoError("checkpoint truncated in manifest");
  nlohmann::ordered_json manifest;
  try {
    manifest = nlohmann::ordered_json::parse(bytes.substr(pos, len));
    pos += len;
    c.step = manifest.at("step").get<std::int64_t>();
    c.rng_state = manifest.at("rng").get<std::string>();
    c.meta = manifest.at("meta");
    for (const auto& jm : manifest.at("modules")) {
      CheckpointModule m;
      m.name = jm.at("name").get<std::string>();
      m.activation = jm.at("activation").get<std::string>();
      m.shapes = jm.at("shapes").get<std::vector<nn::Shape>>();
      c.modules.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint manifest is malformed: ") + e.what());
  }
  for (auto& m : c.modules) {
    for (const auto& s : m.shapes) {
      const std::size_t n = nn::shape_size(s);
      if ((bytes.size() - pos) / 4 < n) throw IoError("checkpoint truncated in module '" + m.name + "'");
      std::vector<float> t(n);
      for (float& f : t) f = std::bit_cast<float>(detail::get_u32(bytes, pos));
      m.tensors.push_back(std::move(t));
    }
  }
  if (pos != bytes.size()) throw IoError("checkpoint has trailing bytes");
  return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  const std::string bytes = encode_checkpoint(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace cee::harness
