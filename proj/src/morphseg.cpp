#include "parasent/morphseg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace parasent::morphseg {
namespace {

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

// ---------------------------------------------------------------------------

void WordCountTable::add(std::string_view word, std::uint64_t n) {
  if (word.empty()) throw std::invalid_argument("empty word");
  if (n == 0) return;
  counts[std::string(word)] += n;
}

WordCountTable WordCountTable::from_corpus(const RankedPairCorpus& corpus) {
  WordCountTable t;
  for (const auto& p : corpus.pairs) {
    for (const auto& w : p.a.tokens) t.add(w);
    for (const auto& w : p.b.tokens) t.add(w);
  }
  return t;
}

WordCountTable WordCountTable::from_sentences(const std::vector<Sentence>& sentences) {
  WordCountTable t;
  for (const auto& s : sentences)
    for (const auto& w : s.tokens) t.add(w);
  return t;
}

WordCountTable read_word_counts(std::istream& in, const std::string& source) {
  WordCountTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || line.find('\t', tab + 1) != std::string::npos)
      throw ParseError(source, lineno, "expected word<TAB>count");
    std::uint64_t n = 0;
    const char* b = line.data() + tab + 1;
    const char* e = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(b, e, n);
    if (ec != std::errc() || ptr != e || n == 0) throw ParseError(source, lineno, "bad count");
    t.add(std::string_view(line).substr(0, tab), n);
  }
  if (t.empty()) throw ParseError(source, 0, "no word counts");
  return t;
}

WordCountTable load_word_counts(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_word_counts(in, path.string());
}

std::vector<std::size_t> codepoint_offsets(std::string_view word) {
  std::vector<std::size_t> offs;
  for (std::size_t i = 0; i < word.size(); ++i) {
    const auto c = static_cast<unsigned char>(word[i]);
    if ((c & 0xC0) != 0x80) offs.push_back(i);
  }
  offs.push_back(word.size());
  return offs;
}

std::size_t codepoint_length(std::string_view s) { return codepoint_offsets(s).size() - 1; }

std::size_t alphabet_size_of(const WordCountTable& table) {
  std::set<std::string> chars;
  for (const auto& [w, n] : table.counts) {
    const auto offs = codepoint_offsets(w);
    for (std::size_t i = 0; i + 1 < offs.size(); ++i)
      chars.insert(w.substr(offs[i], offs[i + 1] - offs[i]));
  }
  return chars.size();
}

Cost cost_of_counts(const std::map<std::string, std::uint64_t>& counts, std::size_t alphabet) {
  double total = 0.0;
  double sum_clogc = 0.0;
  double units = 0.0;
  for (const auto& [m, c] : counts) {
    if (c == 0) continue;
    total += double(c);
    sum_clogc += xlogx(double(c));
    units += double(codepoint_length(m) + 1);
  }
  return {xlogx(total) - sum_clogc, units * std::log(double(alphabet) + 1.0)};
}

// ---------------------------------------------------------------------------

SegmentationModel::SegmentationModel(std::map<std::string, std::uint64_t> morph_counts,
                                     std::size_t alphabet_size)
    : morph_counts_(std::move(morph_counts)), alphabet_size_(alphabet_size) {
  for (const auto& [m, c] : morph_counts_) {
    if (m.empty() || c == 0) throw std::invalid_argument("morphs need non-empty text and count >= 1");
    total_ += c;
  }
}

SegmentationModel SegmentationModel::from_analyses(
    std::map<std::string, std::vector<std::string>> analyses, const WordCountTable& table,
    bool type_based) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& [w, n] : table.counts) {
    auto it = analyses.find(w);
    if (it == analyses.end()) throw std::invalid_argument("no analysis for word " + w);
    for (const auto& m : it->second) counts[m] += type_based ? 1 : n;
  }
  SegmentationModel model(std::move(counts), alphabet_size_of(table));
  model.type_based_ = type_based;
  model.analyses_ = std::move(analyses);
  return model;
}

Cost SegmentationModel::cost() const { return cost_of_counts(morph_counts_, alphabet_size_); }

std::vector<std::string> SegmentationModel::segment(std::string_view word) const {
  if (word.empty()) throw std::invalid_argument("cannot segment an empty word");
  const std::string key(word);
  if (auto it = analyses_.find(key); it != analyses_.end()) return it->second;
  if (morph_counts_.count(key)) return {key};

  // Viterbi over code-point boundaries. Known morphs cost -log p(m); an
  // unknown single character costs about as much as coding it as a new morph.
  const auto offs = codepoint_offsets(word);
  const std::size_t n = offs.size() - 1;
  const double log_total = std::log(double(std::max<std::uint64_t>(total_, 1)));
  const double new_char_cost = log_total + 2.0 * std::log(double(alphabet_size_) + 2.0);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> best(n + 1, kInf);
  std::vector<std::size_t> back(n + 1, 0);
  best[0] = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      if (best[i] == kInf) continue;
      const std::string piece(word.substr(offs[i], offs[j] - offs[i]));
      double c = kInf;
      if (auto it = morph_counts_.find(piece); it != morph_counts_.end()) {
        c = log_total - std::log(double(it->second));
      } else if (j == i + 1) {
        c = new_char_cost;
      }
      if (best[i] + c < best[j]) {
        best[j] = best[i] + c;
        back[j] = i;
      }
    }
  }
  std::vector<std::string> morphs;
  for (std::size_t j = n; j > 0; j = back[j])
    morphs.emplace_back(word.substr(offs[back[j]], offs[j] - offs[back[j]]));
  std::reverse(morphs.begin(), morphs.end());
  return morphs;
}

// ---------------------------------------------------------------------------

// Shared construction trees. Every word and every intermediate piece is a
// node holding its total count and, unless it is a morph, a split offset;
// resplitting a node moves all of its occurrences at once. Leaf counts feed
// an incrementally maintained two-part cost.
class Trainer {
 public:
  explicit Trainer(std::size_t alphabet) : log_alpha_(std::log(double(alphabet) + 1.0)) {}

  double cost() const { return xlogx(acc_.total) - acc_.sum_clogc + acc_.units * log_alpha_; }

  // Adds delta occurrences of s along its current tree (a new node is a leaf).
  void add(const std::string& s, std::int64_t delta) {
    auto it = nodes_.find(s);
    Node node = it == nodes_.end() ? Node{} : it->second;
    const Node old = node;
    const std::int64_t count = std::int64_t(node.count) + delta;
    if (count < 0) throw std::logic_error("negative construction count for " + s);
    node.count = std::uint64_t(count);
    set(s, it == nodes_.end() ? std::nullopt : std::optional<Node>(old),
        count == 0 ? std::nullopt : std::optional<Node>(node));
    if (node.split) {
      add(s.substr(0, node.split), delta);
      add(s.substr(node.split), delta);
    }
  }

  // Greedy recursive binary splitting of the node s over all its occurrences.
  // Short constructions score each candidate split after recursively
  // optimizing both halves; longer ones score a split with its halves as
  // morphs, which keeps the search polynomial in word length.
  void resplit(const std::string& s) {
    const auto it = nodes_.find(s);
    if (it == nodes_.end() || it->second.count == 0) return;
    const std::int64_t n = std::int64_t(it->second.count);
    const auto offs = codepoint_offsets(s);
    const bool lookahead = offs.size() - 1 <= kLookaheadLength;
    add(s, -n);

    add(s, n);  // as a morph
    double best = cost();
    std::size_t best_split = 0;
    add(s, -n);
    for (std::size_t k = 1; k + 1 < offs.size(); ++k) {
      const Mark mark = this->mark();
      make_split(s, offs[k], n);
      if (lookahead) {
        resplit(s.substr(0, offs[k]));
        resplit(s.substr(offs[k]));
      }
      const double c = cost();
      rollback_to(mark);
      if (c < best - 1e-12) {
        best = c;
        best_split = offs[k];
      }
    }
    if (best_split == 0) {
      add(s, n);
      return;
    }
    make_split(s, best_split, n);
    resplit(s.substr(0, best_split));
    resplit(s.substr(best_split));
  }

  std::vector<std::string> expand(const std::string& s) const {
    const auto& node = nodes_.at(s);
    if (!node.split) return {s};
    auto out = expand(s.substr(0, node.split));
    auto rest = expand(s.substr(node.split));
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
  }

  std::map<std::string, std::uint64_t> morph_counts() const {
    std::map<std::string, std::uint64_t> out;
    for (const auto& [s, node] : nodes_)
      if (!node.split) out[s] = node.count;
    return out;
  }

  static constexpr std::size_t kLookaheadLength = 8;

  struct Accumulators {
    double total = 0.0;
    double sum_clogc = 0.0;
    double units = 0.0;
  };
  // Journal position plus cost state; rolling back restores both exactly.
  struct Mark {
    std::size_t journal = 0;
    Accumulators acc;
  };
  Mark mark() const { return {journal_.size(), acc_}; }
  void rollback_to(const Mark& m) {
    while (journal_.size() > m.journal) {
      auto& [key, old] = journal_.back();
      if (old)
        nodes_[key] = *old;
      else
        nodes_.erase(key);
      journal_.pop_back();
    }
    acc_ = m.acc;
  }
  void clear_journal() { journal_.clear(); }

 private:
  struct Node {
    std::uint64_t count = 0;
    std::size_t split = 0;  // byte offset; 0 marks a morph
  };

  void make_split(const std::string& s, std::size_t at, std::int64_t n) {
    set(s, std::nullopt, Node{std::uint64_t(n), at});
    add(s.substr(0, at), n);
    add(s.substr(at), n);
  }

  void set(const std::string& s, std::optional<Node> old, std::optional<Node> now) {
    if (!old) {
      if (auto it = nodes_.find(s); it != nodes_.end()) old = it->second;
    }
    journal_.emplace_back(s, old);
    if (old && !old->split) leaf(s, double(old->count), -1.0);
    if (now && !now->split) leaf(s, double(now->count), 1.0);
    if (now)
      nodes_[s] = *now;
    else
      nodes_.erase(s);
  }

  void leaf(const std::string& s, double c, double sign) {
    if (c <= 0.0) return;
    acc_.total += sign * c;
    acc_.sum_clogc += sign * xlogx(c);
    acc_.units += sign * double(codepoint_length(s) + 1);
  }

  std::unordered_map<std::string, Node> nodes_;
  std::vector<std::pair<std::string, std::optional<Node>>> journal_;
  Accumulators acc_;
  double log_alpha_;
};

SegmentationModel train_segmenter(const WordCountTable& table, const TrainOptions& opts,
                                  TrainStats* stats) {
  if (table.empty()) throw std::invalid_argument("train_segmenter: empty word table");
  const std::size_t alphabet = alphabet_size_of(table);
  Trainer trainer(alphabet);

  std::vector<std::string> words;
  for (const auto& [w, n] : table.counts) {
    words.push_back(w);
    trainer.add(w, opts.type_based ? 1 : std::int64_t(n));
  }

  TrainStats local;
  local.initial_cost = trainer.cost();
  const double threshold = opts.convergence_threshold.value_or(0.005 * local.initial_cost);

  std::mt19937_64 rng(opts.seed);
  double epoch_start = local.initial_cost;
  for (std::size_t epoch = 0; epoch < opts.max_epochs; ++epoch) {
    std::shuffle(words.begin(), words.end(), rng);
    for (const auto& w : words) {
      const double before = trainer.cost();
      trainer.clear_journal();
      const auto mark = trainer.mark();
      trainer.resplit(w);
      // Accept only non-increasing moves.
      if (trainer.cost() > before + 1e-9 * std::max(1.0, std::abs(before))) {
        trainer.rollback_to(mark);
        ++local.rejected_steps;
      }
    }
    const double epoch_end = trainer.cost();
    local.epoch_costs.push_back(epoch_end);
    local.epochs = epoch + 1;
    const double improvement = epoch_start - epoch_end;
    epoch_start = epoch_end;
    if (improvement < threshold) break;
  }

  std::map<std::string, std::vector<std::string>> analyses;
  for (const auto& [w, n] : table.counts) analyses[w] = trainer.expand(w);
  SegmentationModel model(trainer.morph_counts(), alphabet);
  model.type_based_ = opts.type_based;
  model.analyses_ = std::move(analyses);
  // Recomputed from the final counts so the reported cost carries no drift
  // from incremental updates.
  local.final_cost = model.cost().total();
  if (!local.epoch_costs.empty()) local.epoch_costs.back() = local.final_cost;
  if (stats) *stats = std::move(local);
  return model;
}

Cost model_cost_breakdown(const SegmentationModel& model, const WordCountTable& table) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& [w, n] : table.counts) {
    auto it = model.analyses().find(w);
    if (it == model.analyses().end())
      throw std::invalid_argument("model has no analysis for word '" + w + "'");
    std::string joined;
    for (const auto& m : it->second) {
      joined += m;
      counts[m] += model.type_based() ? 1 : n;
    }
    if (joined != w)
      throw std::invalid_argument("analysis of '" + w + "' does not concatenate to the word");
  }
  if (counts != model.morph_counts())
    throw std::invalid_argument("morph counts are inconsistent with the word table");
  return cost_of_counts(counts, model.alphabet_size());
}

double model_cost(const SegmentationModel& model, const WordCountTable& table) {
  return model_cost_breakdown(model, table).total();
}

std::vector<std::string> segment_word(const SegmentationModel& model, std::string_view word) {
  return model.segment(word);
}

// ---------------------------------------------------------------------------

namespace {

class CachedSegmenter {
 public:
  explicit CachedSegmenter(const SegmentationModel& model) : model_(model) {}

  Sentence operator()(const Sentence& s) {
    std::vector<std::string> out;
    out.reserve(s.tokens.size() * 2);
    for (const auto& t : s.tokens) {
      auto it = cache_.find(t);
      if (it == cache_.end()) it = cache_.emplace(t, model_.segment(t)).first;
      out.insert(out.end(), it->second.begin(), it->second.end());
    }
    return Sentence::from_tokens(std::move(out));
  }

 private:
  const SegmentationModel& model_;
  std::unordered_map<std::string, std::vector<std::string>> cache_;
};

}  // namespace

Sentence apply_segmentation(const Sentence& s, const SegmentationModel& model) {
  return CachedSegmenter(model)(s);
}

RankedPairCorpus apply_segmentation(const RankedPairCorpus& corpus,
                                    const SegmentationModel& model) {
  CachedSegmenter seg(model);
  RankedPairCorpus out;
  out.pairs.reserve(corpus.size());
  for (const auto& p : corpus.pairs) out.pairs.push_back({seg(p.a), seg(p.b), p.rank_score});
  return out;
}

AnnotatedPairSet apply_segmentation(const AnnotatedPairSet& set, const SegmentationModel& model) {
  CachedSegmenter seg(model);
  AnnotatedPairSet out;
  out.pairs.reserve(set.size());
  for (const auto& p : set.pairs) out.pairs.push_back({seg(p.a), seg(p.b), p.grade});
  return out;
}

LabeledPairSet apply_segmentation(const LabeledPairSet& set, const SegmentationModel& model) {
  CachedSegmenter seg(model);
  LabeledPairSet out;
  out.pairs.reserve(set.size());
  for (const auto& p : set.pairs) out.pairs.push_back({seg(p.a), seg(p.b), p.label});
  return out;
}

// ---------------------------------------------------------------------------

void save_model(std::ostream& out, const SegmentationModel& model) {
  out << "#morphseg v1 total=" << model.total_morph_tokens()
      << " alphabet=" << model.alphabet_size() << '\n';
  for (const auto& [m, c] : model.morph_counts()) out << m << '\t' << c << '\n';
}

void save_model(const std::filesystem::path& path, const SegmentationModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save_model(out, model);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

SegmentationModel read_model(std::istream& in, const std::string& source) {
  std::string header;
  if (!std::getline(in, header)) throw ParseError(source, 1, "missing header");
  std::uint64_t total = 0;
  std::size_t alphabet = 0;
  {
    std::istringstream hs(header);
    std::string magic, version, total_kv, alpha_kv;
    hs >> magic >> version >> total_kv >> alpha_kv;
    if (magic != "#morphseg" || version != "v1" || total_kv.rfind("total=", 0) != 0 ||
        alpha_kv.rfind("alphabet=", 0) != 0)
      throw ParseError(source, 1, "bad header, expected '#morphseg v1 total=<N> alphabet=<K>'");
    try {
      total = std::stoull(total_kv.substr(6));
      alphabet = std::stoull(alpha_kv.substr(9));
    } catch (const std::exception&) {
      throw ParseError(source, 1, "bad header numbers");
    }
  }
  std::map<std::string, std::uint64_t> counts;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError(source, lineno, "expected morph<TAB>count");
    std::uint64_t c = 0;
    const char* b = line.data() + tab + 1;
    const char* e = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(b, e, c);
    if (ec != std::errc() || ptr != e || c == 0) throw ParseError(source, lineno, "bad count");
    if (!counts.emplace(line.substr(0, tab), c).second)
      throw ParseError(source, lineno, "duplicate morph");
  }
  SegmentationModel model(std::move(counts), alphabet);
  if (model.total_morph_tokens() != total)
    throw ParseError(source, 1, "header total does not match the sum of morph counts");
  return model;
}

SegmentationModel load_model(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_model(in, path.string());
}

}  // namespace parasent::morphseg
