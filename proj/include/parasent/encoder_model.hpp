#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "parasent/corpus.hpp"
#include "parasent/encoders.hpp"
#include "parasent/vocabulary.hpp"

namespace parasent {

struct EncoderConfig {
  EncoderKind kind = EncoderKind::gran;
  std::size_t dim = 300;
  std::size_t hidden = 300;
  double leaky_slope = kDefaultLeakySlope;
  bool gate_biases = false;
  std::size_t max_length = 512;
};

// Number of sequences cut to max_length since process start.
std::uint64_t truncated_sequence_count();

// A trained (or freshly initialized) encoder bound to its vocabulary.
class EncoderModel {
 public:
  using Network = std::variant<WaEncoder<float>, GranEncoder<float>>;

  EncoderModel(EncoderConfig config, Vocabulary vocab, Network net);

  static EncoderModel initialize(const EncoderConfig& config, Vocabulary vocab, Rng& rng);

  EncoderKind kind() const { return config_.kind; }
  std::size_t dim() const { return config_.dim; }
  const EncoderConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  Network& network() { return net_; }
  const Network& network() const { return net_; }
  ParameterSet<float>& params();
  const ParameterSet<float>& params() const;

  // Free-form JSON describing how the model was produced; stored in checkpoints.
  const std::string& provenance() const { return provenance_; }
  void set_provenance(std::string json) { provenance_ = std::move(json); }

  // Ids for a sentence, truncated to max_length (with a one-time warning).
  std::vector<TokenId> token_ids(const Sentence& s) const;

  // Inference path: no dropout.
  std::vector<float> embed(const Sentence& s) const;
  std::vector<float> embed_ids(std::span<const TokenId> ids) const;

 private:
  EncoderConfig config_;
  Vocabulary vocab_;
  Network net_;
  std::string provenance_;
};

}  // namespace parasent
