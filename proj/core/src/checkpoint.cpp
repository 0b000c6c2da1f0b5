#include "fpref/io/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "fpref/core/error.hpp"

namespace fpref::io {
namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in, const char* what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    throw IoError(std::string("truncated checkpoint: ") + what);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t parse_hex(const std::string& s) {
  std::uint64_t v = 0;
  if (s.empty() || s.size() > 16) throw IoError("bad vocab_hash in checkpoint");
  for (char ch : s) {
    v <<= 4;
    if (ch >= '0' && ch <= '9') {
      v |= static_cast<std::uint64_t>(ch - '0');
    } else if (ch >= 'a' && ch <= 'f') {
      v |= static_cast<std::uint64_t>(ch - 'a' + 10);
    } else {
      throw IoError("bad vocab_hash in checkpoint");
    }
  }
  return v;
}

nlohmann::json dims_json(const model::ModelDims& d) {
  return {{"vocab_size", d.vocab_size},
          {"context_len", d.context_len},
          {"embed_dim", d.embed_dim},
          {"hidden_dim", d.hidden_dim},
          {"n_layers", d.n_layers}};
}

nlohmann::json common_header(const model::BaseModel& m, CheckpointKind kind,
                             const std::string& layout_id) {
  nlohmann::json h;
  h["kind"] = kind == CheckpointKind::kBase ? "base" : "adapters";
  h["layout_id"] = layout_id;
  h["dims"] = dims_json(m.dims());
  h["lora"] = {{"rank", m.lora().rank}, {"alpha", m.lora().alpha}};
  h["vocab_hash"] = vocab_hash_hex(m.vocab().fingerprint());
  return h;
}

void write_container(std::ostream& out, const nlohmann::json& header, const ParamVector& v) {
  const std::string h = header.dump();
  out.write(kMagic, 8);
  put_u64(out, h.size());
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  put_u64(out, v.size());
  for (double x : v.values()) put_u64(out, std::bit_cast<std::uint64_t>(x));
  if (!out) throw IoError("checkpoint write failed");
}

struct Container {
  CheckpointInfo info;
  std::vector<double> values;
};

Container read_container(std::istream& in, bool with_values) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw IoError("not a checkpoint (bad magic)");
  }
  const auto hlen = get_u64(in, "header length");
  if (hlen > (1ull << 32)) throw IoError("checkpoint header too large");
  std::string h(hlen, '\0');
  if (!in.read(h.data(), static_cast<std::streamsize>(hlen))) {
    throw IoError("truncated checkpoint: header");
  }
  Container c;
  auto& info = c.info;
  try {
    info.header = nlohmann::json::parse(h);
    const auto kind = info.header.at("kind").get<std::string>();
    if (kind == "base") {
      info.kind = CheckpointKind::kBase;
    } else if (kind == "adapters") {
      info.kind = CheckpointKind::kAdapters;
    } else {
      throw IoError("unknown checkpoint kind: " + kind);
    }
    info.layout_id = info.header.at("layout_id").get<std::string>();
    const auto& d = info.header.at("dims");
    info.dims.vocab_size = d.at("vocab_size").get<int>();
    info.dims.context_len = d.at("context_len").get<int>();
    info.dims.embed_dim = d.at("embed_dim").get<int>();
    info.dims.hidden_dim = d.at("hidden_dim").get<int>();
    info.dims.n_layers = d.at("n_layers").get<int>();
    info.lora.rank = info.header.at("lora").at("rank").get<int>();
    info.lora.alpha = info.header.at("lora").at("alpha").get<double>();
    info.vocab_hash = parse_hex(info.header.at("vocab_hash").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed checkpoint header: ") + e.what());
  }
  info.value_count = get_u64(in, "value count");
  if (with_values) {
    c.values.resize(info.value_count);
    for (auto& x : c.values) x = std::bit_cast<double>(get_u64(in, "payload"));
  } else {
    in.seekg(static_cast<std::streamoff>(info.value_count * 8), std::ios::cur);
    if (!in) throw IoError("truncated checkpoint: payload");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError("trailing bytes after checkpoint payload");
  }
  return c;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

}  // namespace

std::string vocab_hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void save_base(std::ostream& out, const model::BaseModel& model) {
  auto h = common_header(model, CheckpointKind::kBase, model.weights().layout_id());
  h["vocab"] = model.vocab().tokens();
  write_container(out, h, model.weights());
}

void save_base(const std::string& path, const model::BaseModel& model) {
  auto out = open_out(path);
  save_base(out, model);
}

model::BaseModel load_base(std::istream& in) {
  auto c = read_container(in, true);
  if (c.info.kind != CheckpointKind::kBase) throw IoError("checkpoint holds adapters, not a base model");
  std::vector<std::string> tokens;
  try {
    tokens = c.info.header.at("vocab").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("base checkpoint lacks a vocabulary: ") + e.what());
  }
  model::Vocab vocab(std::move(tokens));
  if (vocab.fingerprint() != c.info.vocab_hash) throw IoError("vocabulary hash mismatch");
  return model::BaseModel(std::move(vocab), c.info.dims, c.info.lora,
                          ParamVector(c.info.layout_id, std::move(c.values)));
}

model::BaseModel load_base(const std::string& path) {
  auto in = open_in(path);
  return load_base(in);
}

void save_adapters(std::ostream& out, const model::BaseModel& model,
                   const ParamVector& adapters) {
  if (adapters.layout_id() != model.adapter_layout_id()) {
    throw LayoutMismatch(model.adapter_layout_id(), adapters.layout_id());
  }
  write_container(out, common_header(model, CheckpointKind::kAdapters, adapters.layout_id()),
                  adapters);
}

void save_adapters(const std::string& path, const model::BaseModel& model,
                   const ParamVector& adapters) {
  auto out = open_out(path);
  save_adapters(out, model, adapters);
}

ParamVector load_adapters(std::istream& in, const model::BaseModel& model) {
  auto c = read_container(in, true);
  if (c.info.kind != CheckpointKind::kAdapters) throw IoError("checkpoint holds a base model, not adapters");
  if (c.info.layout_id != model.adapter_layout_id()) {
    throw LayoutMismatch(model.adapter_layout_id(), c.info.layout_id);
  }
  if (c.info.vocab_hash != model.vocab().fingerprint()) {
    throw LayoutMismatch("vocab " + vocab_hash_hex(model.vocab().fingerprint()),
                         "vocab " + vocab_hash_hex(c.info.vocab_hash));
  }
  if (c.values.size() != model.adapter_size()) throw IoError("adapter payload size mismatch");
  ParamVector v(c.info.layout_id, std::move(c.values));
  if (!v.all_finite()) throw IoError("adapter checkpoint holds non-finite values");
  return v;
}

ParamVector load_adapters(const std::string& path, const model::BaseModel& model) {
  auto in = open_in(path);
  return load_adapters(in, model);
}

CheckpointInfo inspect(std::istream& in) { return read_container(in, false).info; }

CheckpointInfo inspect(const std::string& path) {
  auto in = open_in(path);
  return inspect(in);
}

nlohmann::ordered_json to_json(const CheckpointInfo& info) {
  nlohmann::ordered_json j;
  j["kind"] = info.kind == CheckpointKind::kBase ? "base" : "adapters";
  j["layout_id"] = info.layout_id;
  j["dims"] = {{"vocab_size", info.dims.vocab_size},
               {"context_len", info.dims.context_len},
               {"embed_dim", info.dims.embed_dim},
               {"hidden_dim", info.dims.hidden_dim},
               {"n_layers", info.dims.n_layers}};
  j["lora"] = {{"rank", info.lora.rank}, {"alpha", info.lora.alpha}};
  j["vocab_hash"] = vocab_hash_hex(info.vocab_hash);
  j["value_count"] = info.value_count;
  return j;
}

}  // namespace fpref::io
