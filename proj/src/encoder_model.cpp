#include "parasent/encoder_model.hpp"

#include <atomic>
#include <iostream>

#include "parasent/loss.hpp"

namespace parasent {
namespace {
std::atomic<std::uint64_t> g_truncated{0};
std::atomic<std::uint64_t> g_degenerate{0};
}  // namespace

std::uint64_t truncated_sequence_count() { return g_truncated.load(); }
std::uint64_t degenerate_cosine_count() { return g_degenerate.load(); }
void note_degenerate_cosine() { g_degenerate.fetch_add(1, std::memory_order_relaxed); }

const char* to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::wa:
      return "wa";
    case EncoderKind::gran:
      return "gran";
  }
  return "?";
}

EncoderKind parse_encoder_kind(const std::string& s) {
  if (s == "wa" || s == "WA") return EncoderKind::wa;
  if (s == "gran" || s == "GRAN") return EncoderKind::gran;
  throw std::invalid_argument("unknown encoder kind '" + s + "' (expected wa or gran)");
}

EncoderModel::EncoderModel(EncoderConfig config, Vocabulary vocab, Network net)
    : config_(config), vocab_(std::move(vocab)), net_(std::move(net)) {
  const bool is_wa = std::holds_alternative<WaEncoder<float>>(net_);
  if (is_wa != (config_.kind == EncoderKind::wa))
    throw std::invalid_argument("encoder kind does not match network");
  std::visit(
      [&](const auto& n) {
        if (n.dim() != config_.dim) throw std::invalid_argument("network dimension mismatch");
        if (n.vocab_size() != vocab_.size())
          throw std::invalid_argument("embedding rows do not match vocabulary size");
      },
      net_);
  if (auto* g = std::get_if<GranEncoder<float>>(&net_)) {
    if (g->hidden() != config_.hidden) throw std::invalid_argument("hidden size mismatch");
  }
  if (config_.max_length == 0) throw std::invalid_argument("max_length must be >= 1");
}

EncoderModel EncoderModel::initialize(const EncoderConfig& config, Vocabulary vocab, Rng& rng) {
  if (config.dim == 0) throw std::invalid_argument("dimension must be >= 1");
  const std::size_t v = vocab.size();
  if (config.kind == EncoderKind::wa) {
    return EncoderModel(config, std::move(vocab), WaEncoder<float>::init(v, config.dim, rng));
  }
  if (config.hidden == 0) throw std::invalid_argument("hidden size must be >= 1");
  GranOptions opts{config.leaky_slope, config.gate_biases};
  return EncoderModel(config, std::move(vocab),
                      GranEncoder<float>::init(v, config.dim, config.hidden, opts, rng));
}

ParameterSet<float>& EncoderModel::params() {
  return std::visit([](auto& n) -> ParameterSet<float>& { return n.params(); }, net_);
}

const ParameterSet<float>& EncoderModel::params() const {
  return std::visit([](const auto& n) -> const ParameterSet<float>& { return n.params(); }, net_);
}

std::vector<TokenId> EncoderModel::token_ids(const Sentence& s) const {
  auto ids = vocab_.encode(s);
  if (ids.size() > config_.max_length) {
    if (g_truncated.fetch_add(1) == 0)
      std::cerr << "warning: truncating sequence of " << ids.size() << " units to "
                << config_.max_length << " (further truncations are counted silently)\n";
    ids.resize(config_.max_length);
  }
  return ids;
}

std::vector<float> EncoderModel::embed_ids(std::span<const TokenId> ids) const {
  return std::visit([&](const auto& n) { return n.forward(ids); }, net_);
}

std::vector<float> EncoderModel::embed(const Sentence& s) const {
  const auto ids = token_ids(s);
  return embed_ids(ids);
}

}  // namespace parasent
