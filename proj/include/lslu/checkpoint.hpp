// Copyright 2026 The LSLU Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "lslu/autodiff.hpp"
#include "lslu/backbone.hpp"
#include "lslu/bio.hpp"
#include "lslu/clm_data.hpp"
#include "lslu/error.hpp"
#include "lslu/kvconfig.hpp"
#include "lslu/light_encoder.hpp"

namespace lslu {

// Container layout (all integers little-endian):
//   "LSLU" | u32 version | u64 config_len | config text
//   u32 n_tensors | directory | payloads
// directory entry:
//   u32 name_len | name | u8 dtype (0 = f64) | u8 trainable | u32 ndim |
//   u64 dims[ndim] | u64 offset (from payload start) | u64 bytes | u32 crc32

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
  bool trainable = true;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
  std::string config;  // key = value text
  std::vector<NamedTensor> tensors;
};

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(const std::string& s) { out_ += s; }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& in) : in_(in) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::string bytes(std::uint64_t n) {
    need(n);
    std::string s = in_.substr(pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_)
      throw IntegrityError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const std::string& s) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

inline std::string tensor_payload(const Tensor& t) {
  std::string out;
  out.reserve(t.size() * 8);
  for (double v : t.vec()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(bits >> (8 * i)));
  }
  return out;
}

inline Tensor tensor_from_payload(Shape shape, const std::string& payload) {
  std::vector<double> data(payload.size() / 8);
  for (std::size_t k = 0; k < data.size(); ++k) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(payload[8 * k + i])) << (8 * i);
    std::memcpy(&data[k], &bits, 8);
  }
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ck) {
  detail::ByteWriter w;
  w.bytes("LSLU");
  w.u32(kCheckpointVersion);
  w.u64(ck.config.size());
  w.bytes(ck.config);
  w.u32(static_cast<std::uint32_t>(ck.tensors.size()));
  std::vector<std::string> payloads;
  std::uint64_t offset = 0;
  for (const auto& t : ck.tensors) {
    payloads.push_back(detail::tensor_payload(t.value));
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name);
    w.u8(0);
    w.u8(t.trainable ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(t.value.shape().size()));
    for (auto d : t.value.shape()) w.u64(d);
    w.u64(offset);
    w.u64(payloads.back().size());
    w.u32(detail::crc32_of(payloads.back()));
    offset += payloads.back().size();
  }
  for (const auto& p : payloads) w.bytes(p);
  return std::move(w.str());
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  detail::ByteReader r(bytes);
  if (bytes.size() < 4 || bytes.compare(0, 4, "LSLU") != 0)
    throw IoError("not a checkpoint (bad magic)");
  r.bytes(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                  std::to_string(kCheckpointVersion) + ")");
  Checkpoint ck;
  ck.config = r.bytes(r.u64());
  const std::uint32_t n = r.u32();
  struct Entry {
    NamedTensor meta;
    Shape shape;
    std::uint64_t offset, size;
    std::uint32_t crc;
  };
  std::vector<Entry> entries;
  for (std::uint32_t i = 0; i < n; ++i) {
    Entry e;
    e.meta.name = r.bytes(r.u32());
    if (const auto dtype = r.u8(); dtype != 0)
      throw IoError("tensor '" + e.meta.name + "': unknown dtype " + std::to_string(dtype));
    e.meta.trainable = r.u8() != 0;
    const std::uint32_t nd = r.u32();
    if (nd == 0 || nd > 8) throw IntegrityError("tensor '" + e.meta.name + "': bad rank");
    std::uint64_t numel = 1;
    for (std::uint32_t k = 0; k < nd; ++k) {
      const std::uint64_t d = r.u64();
      if (d == 0 || d > bytes.size()) throw IntegrityError("tensor '" + e.meta.name + "': bad dimension");
      e.shape.push_back(static_cast<std::size_t>(d));
      numel *= d;
    }
    e.offset = r.u64();
    e.size = r.u64();
    e.crc = r.u32();
    if (e.size != numel * 8)
      throw IntegrityError("tensor '" + e.meta.name + "': payload size does not match shape");
    entries.push_back(std::move(e));
  }
  const std::size_t base = r.pos();
  std::uint64_t expected_end = 0;
  for (auto& e : entries) {
    if (e.offset > bytes.size() - base || e.size > bytes.size() - base - e.offset)
      throw IntegrityError("checkpoint truncated in payload of '" + e.meta.name + "'");
    const std::string payload =
        bytes.substr(base + static_cast<std::size_t>(e.offset), static_cast<std::size_t>(e.size));
    if (detail::crc32_of(payload) != e.crc)
      throw IntegrityError("checksum mismatch in tensor '" + e.meta.name + "'");
    e.meta.value = detail::tensor_from_payload(std::move(e.shape), payload);
    expected_end = std::max(expected_end, e.offset + e.size);
    ck.tensors.push_back(std::move(e.meta));
  }
  if (base + expected_end != bytes.size())
    throw IntegrityError("checkpoint has " + std::to_string(bytes.size() - base - expected_end) +
                         " unexpected trailing bytes");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const std::string bytes = encode_checkpoint(ck);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint " + path);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

// ---------------------------------------------------------------------------
// Model <-> checkpoint

inline void put_backbone_config(KvConfig& kv, const BackboneConfig& c, const std::string& prefix) {
  kv.set(prefix + "n_layers", std::to_string(c.n_layers));
  kv.set(prefix + "d_model", std::to_string(c.d_model));
  kv.set(prefix + "n_heads", std::to_string(c.n_heads));
  kv.set(prefix + "d_ff", std::to_string(c.d_ff));
  kv.set(prefix + "vocab_size", std::to_string(c.vocab_size));
  kv.set(prefix + "max_positions", std::to_string(c.max_positions));
  kv.set(prefix + "n_type_ids", std::to_string(c.n_type_ids));
  std::ostringstream d;
  d.precision(17);
  d << c.dropout;
  kv.set(prefix + "dropout", d.str());
}

inline BackboneConfig get_backbone_config(const KvConfig& kv, const std::string& prefix) {
  BackboneConfig c;
  c.n_layers = kv.get_size(prefix + "n_layers", c.n_layers);
  c.d_model = kv.get_size(prefix + "d_model", c.d_model);
  c.n_heads = kv.get_size(prefix + "n_heads", c.n_heads);
  c.d_ff = kv.get_size(prefix + "d_ff", c.d_ff);
  c.vocab_size = kv.get_size(prefix + "vocab_size", c.vocab_size);
  c.max_positions = kv.get_size(prefix + "max_positions", c.max_positions);
  c.n_type_ids = kv.get_size(prefix + "n_type_ids", c.n_type_ids);
  c.dropout = kv.get_double(prefix + "dropout", c.dropout);
  return c;
}

/// Fingerprint of the architecture-defining backbone fields.
inline std::string backbone_fingerprint(const BackboneConfig& c) {
  return std::to_string(c.n_layers) + "x" + std::to_string(c.d_model) + "x" +
         std::to_string(c.n_heads) + "x" + std::to_string(c.d_ff) + "/v" +
         std::to_string(c.vocab_size) + "/p" + std::to_string(c.max_positions) + "/t" +
         std::to_string(c.n_type_ids);
}

inline std::vector<NamedTensor> tensors_of(const ParameterStore& s) {
  std::vector<NamedTensor> out;
  for (const auto& p : s) out.push_back({p.name, p.value, p.trainable});
  return out;
}

inline ParameterStore store_of(const std::vector<NamedTensor>& ts) {
  ParameterStore s;
  for (const auto& t : ts) s.add(t.name, t.value, t.trainable);
  return s;
}

// '#' would start a comment in the config text
inline std::string escape_value(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '%') out += "%25";
    else if (c == '#') out += "%23";
    else out += c;
  }
  return out;
}

inline std::string unescape_value(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && s.compare(i, 3, "%25") == 0) {
      out += '%';
      i += 2;
    } else if (s[i] == '%' && s.compare(i, 3, "%23") == 0) {
      out += '#';
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

inline Checkpoint backbone_checkpoint(const Backbone& b, const Vocab& vocab) {
  if (vocab.size() != b.config().vocab_size)
    throw ConfigError("vocab size does not match backbone vocab_size");
  KvConfig kv;
  kv.set("kind", "backbone");
  put_backbone_config(kv, b.config(), "backbone.");
  kv.set("vocab", escape_value(vocab.serialize()));
  return {kv.serialize(), tensors_of(b.params())};
}

struct LoadedBackbone {
  Backbone backbone;
  Vocab vocab;
};

inline LoadedBackbone backbone_from_checkpoint(const Checkpoint& ck) {
  const auto kv = KvConfig::parse_string(ck.config, "checkpoint config");
  if (kv.get("kind", "") != "backbone")
    throw ConfigError("checkpoint is a '" + kv.get("kind", "?") + "' checkpoint, not a backbone");
  const auto cfg = get_backbone_config(kv, "backbone.");
  cfg.validate();
  LoadedBackbone out{Backbone::from_parameters(cfg, store_of(ck.tensors)),
                     Vocab::deserialize(unescape_value(kv.require("vocab")))};
  if (out.vocab.size() != cfg.vocab_size)
    throw ConfigError("checkpoint vocab has " + std::to_string(out.vocab.size()) +
                      " entries, config says " + std::to_string(cfg.vocab_size));
  return out;
}

inline std::string join_labels(const std::vector<std::string>& v) { return escape_value(join(v, ",")); }

inline std::vector<std::string> split_labels(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(unescape_value(text));
  for (std::string item; std::getline(is, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

inline Checkpoint light_checkpoint(const LightEncoder& light, const BackboneConfig& backbone) {
  const auto& c = light.config();
  KvConfig kv;
  kv.set("kind", "light");
  kv.set("light.pooling", to_string(c.pooling));
  kv.set("light.use_bilstm", c.use_bilstm ? "true" : "false");
  kv.set("light.lstm_hidden", std::to_string(c.lstm_hidden));
  kv.set("light.lstm_layers", std::to_string(c.lstm_layers));
  kv.set("light.dense_out", std::to_string(c.dense_out));
  std::ostringstream d;
  d.precision(17);
  d << c.dropout;
  kv.set("light.dropout", d.str());
  kv.set("light.utterance_rep", c.utterance_rep == UtteranceRep::cls ? "cls" : "mean");
  kv.set("backbone.fingerprint", backbone_fingerprint(backbone));
  put_backbone_config(kv, backbone, "backbone.");
  kv.set("schema.domain", escape_value(light.schema().domain));
  kv.set("schema.intents", join_labels(light.schema().intents));
  kv.set("schema.slots", join_labels(light.schema().slot_labels));
  auto tensors = tensors_of(light.encoder());
  for (auto& t : tensors_of(light.heads())) tensors.push_back(std::move(t));
  return {kv.serialize(), std::move(tensors)};
}

/// Rebuilds a light encoder for `backbone`; refuses before touching any
/// weights if the checkpoint was made against a different backbone shape.
inline LightEncoder light_from_checkpoint(const Checkpoint& ck, const BackboneConfig& backbone) {
  const auto kv = KvConfig::parse_string(ck.config, "checkpoint config");
  if (kv.get("kind", "") != "light")
    throw ConfigError("checkpoint is a '" + kv.get("kind", "?") + "' checkpoint, not a light encoder");
  const auto trained_for = get_backbone_config(kv, "backbone.");
  for (auto [field, want, got] :
       {std::tuple{"n_layers", trained_for.n_layers, backbone.n_layers},
        std::tuple{"d_model", trained_for.d_model, backbone.d_model},
        std::tuple{"vocab_size", trained_for.vocab_size, backbone.vocab_size}})
    if (want != got)
      throw ConfigError(std::string("light encoder was trained against a backbone with ") + field +
                        "=" + std::to_string(want) + ", but this backbone has " + field + "=" +
                        std::to_string(got));
  if (kv.require("backbone.fingerprint") != backbone_fingerprint(backbone))
    throw ConfigError("light encoder backbone fingerprint " + kv.require("backbone.fingerprint") +
                      " does not match " + backbone_fingerprint(backbone));
  LightEncoderConfig c;
  c.pooling = parse_pooling(kv.require("light.pooling"));
  c.use_bilstm = kv.get_bool("light.use_bilstm", true);
  c.lstm_hidden = kv.get_size("light.lstm_hidden", c.lstm_hidden);
  c.lstm_layers = kv.get_size("light.lstm_layers", c.lstm_layers);
  c.dense_out = kv.get_size("light.dense_out", c.dense_out);
  c.dropout = kv.get_double("light.dropout", c.dropout);
  c.utterance_rep = kv.get("light.utterance_rep", "cls") == "mean" ? UtteranceRep::mean : UtteranceRep::cls;
  DomainSchema schema{unescape_value(kv.get("schema.domain", "")), split_labels(kv.require("schema.intents")),
                      split_labels(kv.require("schema.slots"))};
  LightEncoder light(c, backbone.n_layers, backbone.d_model, schema, 0);
  ParameterStore enc, heads;
  for (const auto& t : ck.tensors) {
    const bool is_head = t.name.rfind("ic.", 0) == 0 || t.name.rfind("crf.", 0) == 0;
    (is_head ? heads : enc).add(t.name, t.value, t.trainable);
  }
  light.load_weights(enc, &heads);
  return light;
}

inline void save_backbone(const std::string& path, const Backbone& b, const Vocab& vocab) {
  save_checkpoint(path, backbone_checkpoint(b, vocab));
}

inline LoadedBackbone load_backbone(const std::string& path) {
  return backbone_from_checkpoint(load_checkpoint(path));
}

inline void save_light(const std::string& path, const LightEncoder& light, const BackboneConfig& backbone) {
  save_checkpoint(path, light_checkpoint(light, backbone));
}

inline LightEncoder load_light(const std::string& path, const BackboneConfig& backbone) {
  return light_from_checkpoint(load_checkpoint(path), backbone);
}

}  // namespace lslu
