#pragma once

// Binary checkpoint container: magic, version, a kind tag, a JSON metadata
// blob, and named double tensors written raw (little-endian hosts assumed,
// which covers every machine this targets). Save/load round-trips
// bit-exactly. Files are written atomically via temp + rename.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "kgdiff/core/mat.hpp"
#include "kgdiff/diffusion/train.hpp"
#include "kgdiff/kge/embedding.hpp"
#include "kgdiff/mol/graph.hpp"
#include "kgdiff/pin/network.hpp"

namespace kgdiff::io {

constexpr uint32_t kMagic = 0x4644474b;  // "KGDF"
constexpr uint32_t kVersion = 1;

struct Container {
  std::string kind;
  nlohmann::json meta;
  std::map<std::string, Mat> tensors;
};

namespace detail_io {

inline void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
inline uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
inline void write_str(std::ostream& out, const std::string& s) {
  write_u32(out, uint32_t(s.size()));
  out.write(s.data(), std::streamsize(s.size()));
}
inline std::string read_str(std::istream& in) {
  const uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), std::streamsize(n));
  return s;
}

}  // namespace detail_io

// write to <path>.tmp then rename, so readers never see partial files
inline void save_container(const std::string& path, const Container& c) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + tmp.string());
    detail_io::write_u32(out, kMagic);
    detail_io::write_u32(out, kVersion);
    detail_io::write_str(out, c.kind);
    detail_io::write_str(out, c.meta.dump());
    detail_io::write_u32(out, uint32_t(c.tensors.size()));
    for (const auto& [name, t] : c.tensors) {
      detail_io::write_str(out, name);
      detail_io::write_u32(out, uint32_t(t.rows));
      detail_io::write_u32(out, uint32_t(t.cols));
      out.write(reinterpret_cast<const char*>(t.a.data()), std::streamsize(t.a.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("short write on checkpoint: " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline Container load_container(const std::string& path, const std::string& expect_kind = "") {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  if (detail_io::read_u32(in) != kMagic) throw std::runtime_error("not a checkpoint file: " + path);
  const uint32_t version = detail_io::read_u32(in);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  Container c;
  c.kind = detail_io::read_str(in);
  if (!expect_kind.empty() && c.kind != expect_kind)
    throw std::runtime_error("checkpoint kind '" + c.kind + "' where '" + expect_kind + "' expected: " + path);
  c.meta = nlohmann::json::parse(detail_io::read_str(in));
  const uint32_t count = detail_io::read_u32(in);
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = detail_io::read_str(in);
    const int rows = int(detail_io::read_u32(in));
    const int cols = int(detail_io::read_u32(in));
    Mat t(rows, cols);
    in.read(reinterpret_cast<char*>(t.a.data()), std::streamsize(t.a.size() * sizeof(double)));
    c.tensors.emplace(name, std::move(t));
  }
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return c;
}

inline uint64_t vocab_hash(const mol::AtomVocabulary& vocab) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (int i = 0; i < vocab.size(); ++i) {
    h = detail::fnv1a64(vocab.symbol(i), h);
    h = detail::fnv1a64(std::to_string(vocab.max_valence(i)), h);
  }
  return h;
}

// ---- embedding checkpoints ----

inline void save_embedding(const std::string& path, const kge::EmbeddingTable& emb, uint64_t dict_hash,
                           nlohmann::json extra = {}) {
  Container c;
  c.kind = "kge-embedding";
  c.meta = {{"model", emb.kind == kge::ModelKind::TransE ? "transe" : "rotate"},
            {"dim", emb.dim},
            {"dict_hash", dict_hash}};
  if (!extra.is_null()) c.meta["extra"] = std::move(extra);
  c.tensors["entities"] = emb.entities;
  c.tensors["relations"] = emb.relations;
  save_container(path, c);
}

struct EmbeddingCheckpoint {
  kge::EmbeddingTable table;
  uint64_t dict_hash = 0;
  nlohmann::json meta;
};

inline EmbeddingCheckpoint load_embedding(const std::string& path) {
  Container c = load_container(path, "kge-embedding");
  EmbeddingCheckpoint out;
  out.table.kind = c.meta.at("model") == "transe" ? kge::ModelKind::TransE : kge::ModelKind::RotatE;
  out.table.dim = c.meta.at("dim").get<int>();
  out.table.entities = c.tensors.at("entities");
  out.table.relations = c.tensors.at("relations");
  out.dict_hash = c.meta.at("dict_hash").get<uint64_t>();
  out.meta = c.meta;
  return out;
}

// ---- score network checkpoints ----

inline void save_score_net(const std::string& path, const diffusion::ScoreNet& net,
                           const diffusion::DiffusionSchedule& sched, uint64_t vocab_h,
                           nlohmann::json extra = {}) {
  Container c;
  c.kind = "score-net";
  c.meta = {{"atom_types", net.cfg.atom_types}, {"hidden", net.cfg.hidden},
            {"layers", net.cfg.layers},         {"time_dim", net.cfg.time_dim},
            {"edge_hidden", net.cfg.edge_hidden}, {"T", sched.T},
            {"vocab_hash", vocab_h}};
  if (!extra.is_null()) c.meta["extra"] = std::move(extra);
  c.tensors["beta"] = Mat(1, sched.T);
  for (int t = 1; t <= sched.T; ++t) c.tensors["beta"](0, t - 1) = sched.beta_at(t);
  auto tables = net.param_tables();
  for (size_t i = 0; i < tables.size(); ++i) c.tensors["p" + std::to_string(i)] = *tables[i];
  save_container(path, c);
}

struct ScoreNetCheckpoint {
  diffusion::ScoreNet net;
  diffusion::DiffusionSchedule schedule;
  uint64_t vocab_hash = 0;
  nlohmann::json meta;
};

inline ScoreNetCheckpoint load_score_net(const std::string& path) {
  Container c = load_container(path, "score-net");
  ScoreNetCheckpoint out;
  diffusion::ScoreNetConfig cfg;
  cfg.atom_types = c.meta.at("atom_types").get<int>();
  cfg.hidden = c.meta.at("hidden").get<int>();
  cfg.layers = c.meta.at("layers").get<int>();
  cfg.time_dim = c.meta.at("time_dim").get<int>();
  cfg.edge_hidden = c.meta.at("edge_hidden").get<int>();
  Rng dummy(0);
  out.net = diffusion::ScoreNet::init(cfg, dummy);
  auto tables = out.net.param_tables();
  for (size_t i = 0; i < tables.size(); ++i) *tables[i] = c.tensors.at("p" + std::to_string(i));

  const Mat& beta = c.tensors.at("beta");
  out.schedule.T = c.meta.at("T").get<int>();
  out.schedule.beta.assign(beta.a.begin(), beta.a.end());
  out.schedule.alpha_bar.resize(size_t(out.schedule.T) + 1);
  out.schedule.alpha_bar[0] = 1.0;
  for (int t = 1; t <= out.schedule.T; ++t)
    out.schedule.alpha_bar[size_t(t)] = out.schedule.alpha_bar[size_t(t - 1)] * (1.0 - beta(0, t - 1));
  out.vocab_hash = c.meta.at("vocab_hash").get<uint64_t>();
  out.meta = c.meta;
  return out;
}

// ---- PIN checkpoints ----

inline void save_pin(const std::string& path, const pin::PinNet& net, uint64_t vocab_h,
                     nlohmann::json extra = {}) {
  Container c;
  c.kind = "pin";
  c.meta = {{"atom_types", net.cfg.atom_types},
            {"hidden", net.cfg.hidden},
            {"attention_layers", net.cfg.attention_layers},
            {"context_dim", net.cfg.context_dim},
            {"leaky_slope", net.cfg.leaky_slope},
            {"vocab_hash", vocab_h}};
  if (!extra.is_null()) c.meta["extra"] = std::move(extra);
  auto tables = net.param_tables();
  for (size_t i = 0; i < tables.size(); ++i) c.tensors["p" + std::to_string(i)] = *tables[i];
  save_container(path, c);
}

struct PinCheckpoint {
  pin::PinNet net;
  uint64_t vocab_hash = 0;
  nlohmann::json meta;
};

inline PinCheckpoint load_pin(const std::string& path) {
  Container c = load_container(path, "pin");
  PinCheckpoint out;
  pin::PinConfig cfg;
  cfg.atom_types = c.meta.at("atom_types").get<int>();
  cfg.hidden = c.meta.at("hidden").get<int>();
  cfg.attention_layers = c.meta.at("attention_layers").get<int>();
  cfg.context_dim = c.meta.at("context_dim").get<int>();
  cfg.leaky_slope = c.meta.at("leaky_slope").get<double>();
  Rng dummy(0);
  out.net = pin::PinNet::init(cfg, dummy);
  auto tables = out.net.param_tables();
  for (size_t i = 0; i < tables.size(); ++i) *tables[i] = c.tensors.at("p" + std::to_string(i));
  out.vocab_hash = c.meta.at("vocab_hash").get<uint64_t>();
  out.meta = c.meta;
  return out;
}

// content hash for manifest bookkeeping
inline uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash missing file: " + path);
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!in) break;
  }
  return h;
}

// atomic text write for reports and generated files
inline void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("short write: " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace kgdiff::io
