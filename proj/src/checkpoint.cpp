#include "parasent/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>
#include <zlib.h>

namespace parasent {
namespace {

constexpr std::string_view kMagic = "PARA1";

class Writer {
 public:
  void bytes(std::string_view s) { out_.append(s); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }
  std::string take() { return std::move(out_); }
  const std::string& buffer() const { return out_; }

 private:
  std::string out_;
};

struct Truncated {};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  std::string_view bytes(std::size_t n) {
    if (data_.size() - pos_ < n) throw Truncated{};
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
  std::uint32_t u32() {
    auto b = bytes(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }
  std::string str() {
    const auto n = u32();
    return std::string(bytes(n));
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::string_view s) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t n = std::min<std::size_t>(s.size() - pos, 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(s.data() + pos), static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

struct Header {
  EncoderKind kind;
  std::uint32_t dim, hidden, vocab;
  std::vector<std::string> tokens;
  nlohmann::json options;
};

Header read_header(Reader& r) {
  Header h;
  if (r.bytes(kMagic.size()) != kMagic)
    throw CheckpointError(CheckpointErrorKind::bad_magic, "not a checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError(CheckpointErrorKind::version_mismatch,
                          "checkpoint version " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
  const auto kind = r.u8();
  if (kind > 1) throw CheckpointError(CheckpointErrorKind::malformed, "unknown encoder kind");
  h.kind = static_cast<EncoderKind>(kind);
  h.dim = r.u32();
  h.hidden = r.u32();
  h.vocab = r.u32();
  if (h.vocab == 0) throw CheckpointError(CheckpointErrorKind::malformed, "empty vocabulary");
  h.tokens.reserve(std::min<std::uint32_t>(h.vocab, 1u << 24));
  for (std::uint32_t i = 0; i < h.vocab; ++i) h.tokens.push_back(r.str());
  const auto json_text = r.str();
  h.options = nlohmann::json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (h.options.is_discarded() || !h.options.is_object())
    throw CheckpointError(CheckpointErrorKind::malformed, "bad options block");
  return h;
}

EncoderConfig config_from(const Header& h) {
  EncoderConfig c;
  c.kind = h.kind;
  c.dim = h.dim;
  c.hidden = h.kind == EncoderKind::gran ? h.hidden : 0;
  c.leaky_slope = h.options.value("leaky_slope", kDefaultLeakySlope);
  c.gate_biases = h.options.value("gate_biases", false);
  c.max_length = h.options.value("max_length", std::size_t{512});
  return c;
}

// Canonical parameter shapes for a header.
std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> shapes_for(
    const EncoderConfig& c, std::size_t vocab) {
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> s;
  const std::size_t d = c.dim, H = c.hidden;
  s.push_back({"embedding", {vocab, d}});
  if (c.kind == EncoderKind::wa) return s;
  s.push_back({"W_r", {H, d}});
  s.push_back({"W_z", {H, d}});
  s.push_back({"W_h_cand", {H, d}});
  s.push_back({"U_r", {H, H}});
  s.push_back({"U_z", {H, H}});
  s.push_back({"U_h", {H, H}});
  s.push_back({"b_h", {H, 1}});
  s.push_back({"W_x", {d, d}});
  s.push_back({"W_h_gate", {d, H}});
  s.push_back({"b", {d, 1}});
  if (c.gate_biases) {
    s.push_back({"b_r", {H, 1}});
    s.push_back({"b_z", {H, 1}});
  }
  return s;
}

}  // namespace

std::string serialize_checkpoint(const EncoderModel& model) {
  const auto& cfg = model.config();
  Writer w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(cfg.kind));
  w.u32(static_cast<std::uint32_t>(cfg.dim));
  w.u32(static_cast<std::uint32_t>(cfg.kind == EncoderKind::gran ? cfg.hidden : 0));
  w.u32(static_cast<std::uint32_t>(model.vocab().size()));
  for (std::size_t i = 0; i < model.vocab().size(); ++i) w.str(model.vocab().token(TokenId(i)));

  nlohmann::json opts;
  opts["leaky_slope"] = cfg.leaky_slope;
  opts["gate_biases"] = cfg.gate_biases;
  opts["max_length"] = cfg.max_length;
  if (!model.provenance().empty()) {
    auto prov = nlohmann::json::parse(model.provenance(), nullptr, false);
    opts["provenance"] = prov.is_discarded() ? nlohmann::json(model.provenance()) : prov;
  }
  w.str(opts.dump());

  const auto& params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i)
    for (float f : params[i].values()) w.f32(f);
  w.u32(crc_of(w.buffer()));
  return w.take();
}

EncoderModel parse_checkpoint(std::string_view bytes, std::optional<EncoderKind> expected) {
  // Header first so magic/version problems are reported as such.
  Header h;
  std::size_t payload_bytes = 0;
  try {
    Reader r(bytes);
    h = read_header(r);
    const auto cfg = config_from(h);
    for (const auto& [name, shape] : shapes_for(cfg, h.vocab))
      payload_bytes += 4 * shape.first * shape.second;
    const std::size_t need = payload_bytes + 4;
    if (r.remaining() < need) {
      // Could be genuine truncation or a corrupted length field.
      if (bytes.size() >= 4) {
        const auto stored = Reader(bytes.substr(bytes.size() - 4)).u32();
        if (stored != crc_of(bytes.substr(0, bytes.size() - 4)))
          throw CheckpointError(CheckpointErrorKind::truncated,
                                "checkpoint truncated or corrupted (" +
                                    std::to_string(r.remaining()) + " of " +
                                    std::to_string(need) + " payload bytes present)");
      }
      throw CheckpointError(CheckpointErrorKind::truncated, "checkpoint truncated");
    }
    if (r.remaining() > need)
      throw CheckpointError(CheckpointErrorKind::checksum,
                            "checkpoint has unexpected trailing bytes or corrupted header");
  } catch (const Truncated&) {
    throw CheckpointError(CheckpointErrorKind::truncated, "checkpoint truncated in header");
  }

  const auto stored = Reader(bytes.substr(bytes.size() - 4)).u32();
  if (stored != crc_of(bytes.substr(0, bytes.size() - 4)))
    throw CheckpointError(CheckpointErrorKind::checksum, "checkpoint checksum mismatch");

  if (expected && *expected != h.kind)
    throw CheckpointError(CheckpointErrorKind::kind_mismatch,
                          std::string("checkpoint holds a ") + to_string(h.kind) +
                              " encoder, expected " + to_string(*expected));

  const auto cfg = config_from(h);
  Reader r(bytes.substr(bytes.size() - 4 - payload_bytes, payload_bytes));
  ParameterSet<float> params;
  for (const auto& [name, shape] : shapes_for(cfg, h.vocab)) {
    Matrix m(shape.first, shape.second);
    for (auto& f : m.values()) f = r.f32();
    params.add(name, std::move(m));
  }
  if (!h.tokens.empty() && !h.tokens[0].empty())
    throw CheckpointError(CheckpointErrorKind::malformed, "vocabulary slot 0 must be empty");
  try {
    Vocabulary vocab(std::vector<std::string>(h.tokens.begin() + 1, h.tokens.end()));
    EncoderModel::Network net = cfg.kind == EncoderKind::wa
                                    ? EncoderModel::Network(WaEncoder<float>(std::move(params)))
                                    : EncoderModel::Network(GranEncoder<float>(
                                          std::move(params), {cfg.leaky_slope, cfg.gate_biases}));
    EncoderModel model(cfg, std::move(vocab), std::move(net));
    if (h.options.contains("provenance")) model.set_provenance(h.options["provenance"].dump());
    return model;
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(CheckpointErrorKind::malformed, e.what());
  }
}

void save_checkpoint(const EncoderModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(CheckpointErrorKind::io, "cannot write " + path.string());
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw CheckpointError(CheckpointErrorKind::io, "write failed: " + path.string());
}

EncoderModel load_checkpoint(const std::filesystem::path& path, std::optional<EncoderKind> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrorKind::io, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes, expected);
}

}  // namespace parasent
