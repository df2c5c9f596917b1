#pragma once

// Self-describing checkpoint file.
//
// A text header (LF-terminated lines) followed by a binary tensor payload:
//
//   C2W2S4PT-CHECKPOINT
//   format_version 1
//   model_kind <average|bigru-char|bigru-word|c2w2s4pt>
//   trait <ext|sta|agr|con|opn>
//   dims char_dim=<n> word_dim=<n> char_hidden=<n> word_hidden=<n> mlp_hidden=<n> vocab_size=<n>
//   average <decimal>
//   vocab_kind <none|char|word>
//   vocab_entries <n>
//   vocab <id> <hex code point> [<hex code point> ...]     (n lines, ids 1..n; id 0 is UNK)
//   config_begin
//   <key = value lines of the training config>
//   config_end
//   tensors <m>
//   end_header
//
// Payload, per tensor in canonical order: u32 name length, name bytes,
// u64 rows, u64 cols, rows*cols IEEE-754 doubles; all integers and doubles
// little-endian. The file ends with the line "end_checkpoint".

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "c2w/train.hpp"

namespace c2w {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kCheckpointMagic = "C2W2S4PT-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  std::string line() {
    const auto nl = data_.find('\n', pos_);
    if (nl == std::string::npos) throw CheckpointError("checkpoint truncated in header");
    std::string out = data_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return out;
  }

  std::uint64_t u64() {
    need(8, "integer");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  std::uint32_t u32() {
    need(4, "integer");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n, "bytes");
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (data_.size() - pos_ < n) {
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what +
                            " at byte " + std::to_string(pos_));
    }
  }
  std::string data_;
  std::size_t pos_ = 0;
};

inline std::string expect_field(const std::string& line, std::string_view key) {
  if (line.size() < key.size() + 1 || line.compare(0, key.size(), key) != 0 || line[key.size()] != ' ') {
    throw CheckpointError("checkpoint header: expected '" + std::string(key) + "', got '" + line + "'");
  }
  return line.substr(key.size() + 1);
}

inline std::size_t parse_size(const std::string& s, std::string_view what) {
  std::size_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw CheckpointError("checkpoint header: bad " + std::string(what) + " '" + s + "'");
  }
  return v;
}

inline std::string hex_cp(char32_t c) {
  char buf[16];
  auto res = std::to_chars(buf, buf + sizeof buf, static_cast<std::uint32_t>(c), 16);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline std::string serialize_checkpoint(const TrainedModel& m) {
  std::string out;
  auto line = [&](const std::string& s) { out.append(s).push_back('\n'); };
  const ModelDims d = m.kind == ModelKind::average ? m.config.dims(0) : m.params.dims();
  line(std::string(kCheckpointMagic));
  line("format_version " + std::to_string(kCheckpointVersion));
  line("model_kind " + std::string(model_kind_name(m.kind)));
  line("trait " + std::string(trait_name(m.trait)));
  line("dims char_dim=" + std::to_string(d.char_dim) + " word_dim=" + std::to_string(d.word_dim) +
       " char_hidden=" + std::to_string(d.char_hidden) + " word_hidden=" +
       std::to_string(d.word_hidden) + " mlp_hidden=" + std::to_string(d.mlp_hidden) +
       " vocab_size=" + std::to_string(d.vocab_size));
  line("average " + format_double(m.average));
  if (m.kind == ModelKind::average) {
    line("vocab_kind none");
    line("vocab_entries 0");
  } else if (uses_word_vocab(m.kind)) {
    line("vocab_kind word");
    line("vocab_entries " + std::to_string(m.words.size() - 1));
    for (std::size_t id = 1; id < m.words.size(); ++id) {
      std::string l = "vocab " + std::to_string(id);
      for (char32_t c : m.words.symbol(id)) l += " " + detail::hex_cp(c);
      line(l);
    }
  } else {
    line("vocab_kind char");
    line("vocab_entries " + std::to_string(m.chars.size() - 1));
    for (std::size_t id = 1; id < m.chars.size(); ++id) {
      line("vocab " + std::to_string(id) + " " + detail::hex_cp(m.chars.symbol(id)));
    }
  }
  line("config_begin");
  out += format_train_config(m.config);
  line("config_end");
  std::size_t n_tensors = 0;
  if (m.kind != ModelKind::average) {
    m.params.for_each_tensor([&](std::string_view, std::span<const double>, std::size_t, std::size_t) {
      ++n_tensors;
    });
  }
  line("tensors " + std::to_string(n_tensors));
  line("end_header");
  if (m.kind != ModelKind::average) {
    m.params.for_each_tensor(
        [&](std::string_view name, std::span<const double> v, std::size_t rows, std::size_t cols) {
          detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
          out.append(name);
          detail::put_u64(out, rows);
          detail::put_u64(out, cols);
          for (double x : v) detail::put_u64(out, std::bit_cast<std::uint64_t>(x));
        });
  }
  line("end_checkpoint");
  return out;
}

inline TrainedModel deserialize_checkpoint(std::string data) {
  detail::Reader r(std::move(data));
  if (r.line() != kCheckpointMagic) throw CheckpointError("not a checkpoint file (bad magic)");
  const auto version = detail::parse_size(detail::expect_field(r.line(), "format_version"), "version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint format version " + std::to_string(version));
  }
  TrainedModel m;
  try {
    m.kind = parse_model_kind(detail::expect_field(r.line(), "model_kind"));
    m.trait = parse_trait(detail::expect_field(r.line(), "trait"));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint header: ") + e.what());
  }
  ModelDims d;
  {
    std::istringstream dims(detail::expect_field(r.line(), "dims"));
    std::string kv;
    std::map<std::string, std::size_t> vals;
    while (dims >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw CheckpointError("checkpoint header: bad dims entry '" + kv + "'");
      vals[kv.substr(0, eq)] = detail::parse_size(kv.substr(eq + 1), kv.substr(0, eq));
    }
    auto get = [&](const char* k) {
      auto it = vals.find(k);
      if (it == vals.end()) throw CheckpointError(std::string("checkpoint header: missing dim ") + k);
      return it->second;
    };
    d = ModelDims{get("char_dim"), get("word_dim"), get("char_hidden"),
                  get("word_hidden"), get("mlp_hidden"), get("vocab_size")};
  }
  {
    auto avg = parse_double(detail::expect_field(r.line(), "average"));
    if (!avg) throw CheckpointError("checkpoint header: bad average");
    m.average = *avg;
  }
  const std::string vocab_kind = detail::expect_field(r.line(), "vocab_kind");
  const std::size_t entries = detail::parse_size(detail::expect_field(r.line(), "vocab_entries"), "vocab_entries");
  for (std::size_t i = 1; i <= entries; ++i) {
    std::istringstream vl(detail::expect_field(r.line(), "vocab"));
    std::string id_s, cp_s;
    vl >> id_s;
    if (detail::parse_size(id_s, "vocab id") != i) throw CheckpointError("checkpoint header: vocab ids out of order");
    std::u32string sym;
    while (vl >> cp_s) {
      std::uint32_t cp = 0;
      auto res = std::from_chars(cp_s.data(), cp_s.data() + cp_s.size(), cp, 16);
      if (res.ec != std::errc() || res.ptr != cp_s.data() + cp_s.size() || cp > 0x10FFFF) {
        throw CheckpointError("checkpoint header: bad code point '" + cp_s + "'");
      }
      sym.push_back(static_cast<char32_t>(cp));
    }
    if (sym.empty()) throw CheckpointError("checkpoint header: empty vocab entry");
    if (vocab_kind == "word") {
      if (m.words.add(sym) != i) throw CheckpointError("checkpoint header: duplicate vocab entry");
    } else if (vocab_kind == "char") {
      if (sym.size() != 1 || m.chars.add(sym[0]) != i) {
        throw CheckpointError("checkpoint header: bad character vocab entry");
      }
    } else {
      throw CheckpointError("checkpoint header: vocab entries for vocab_kind " + vocab_kind);
    }
  }
  if (r.line() != "config_begin") throw CheckpointError("checkpoint header: expected config_begin");
  std::string cfg_text;
  for (std::string l = r.line(); l != "config_end"; l = r.line()) cfg_text += l + "\n";
  try {
    m.config = parse_train_config(cfg_text);
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  const std::size_t n_tensors = detail::parse_size(detail::expect_field(r.line(), "tensors"), "tensor count");
  if (r.line() != "end_header") throw CheckpointError("checkpoint header: expected end_header");

  if (m.kind != ModelKind::average) {
    const std::size_t vocab_size = vocab_kind == "word" ? m.words.size() : m.chars.size();
    if (d.vocab_size != vocab_size) throw CheckpointError("checkpoint: vocab_size disagrees with vocabulary");
    try {
      m.params = ModelParams::zeros(m.kind, d);
    } catch (const std::exception& e) {
      throw CheckpointError(std::string("checkpoint dims: ") + e.what());
    }
    std::size_t seen = 0;
    m.params.for_each_tensor([&](std::string_view name, std::span<double> v, std::size_t rows, std::size_t cols) {
      const std::string got = r.bytes(r.u32());
      if (got != name) throw CheckpointError("checkpoint: expected tensor '" + std::string(name) + "', found '" + got + "'");
      const auto rr = r.u64();
      const auto cc = r.u64();
      if (rr != rows || cc != cols) {
        throw CheckpointError("checkpoint: tensor '" + got + "' has shape " + std::to_string(rr) + "x" +
                              std::to_string(cc) + ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
      }
      for (double& x : v) {
        x = std::bit_cast<double>(r.u64());
        if (!std::isfinite(x)) throw CheckpointError("checkpoint: non-finite value in '" + got + "'");
      }
      ++seen;
    });
    if (seen != n_tensors) throw CheckpointError("checkpoint: tensor count mismatch");
  } else if (n_tensors != 0) {
    throw CheckpointError("checkpoint: average model with tensors");
  }
  if (r.line() != "end_checkpoint") throw CheckpointError("checkpoint: missing end marker");
  if (!r.at_end()) throw CheckpointError("checkpoint: trailing bytes after end marker");
  return m;
}

inline void save_checkpoint(const TrainedModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  const std::string bytes = serialize_checkpoint(m);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed for checkpoint '" + path + "'");
}

inline TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace c2w
