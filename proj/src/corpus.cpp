#include "parasent/corpus.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace parasent {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::optional<double> parse_real(std::string_view s) {
  while (!s.empty() && (s.front() == ' ')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

// Reads lines, stripping a trailing CR. Calls fn(line, lineno) for non-empty lines.
template <class Fn>
std::size_t for_each_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  std::size_t records = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(std::string_view(line), lineno);
    ++records;
  }
  return records;
}

Sentence parse_sentence_field(std::string_view field, const std::string& source,
                              std::size_t lineno) {
  try {
    return Sentence::parse(field);
  } catch (const std::invalid_argument&) {
    throw ParseError(source, lineno, "empty sentence");
  }
}

std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Shared negative sampler over the sentences of the first n pairs.
void append_negatives(const RankedPairCorpus& corpus, std::size_t n, std::uint64_t seed,
                      LabeledPairSet& out) {
  const std::size_t pool = 2 * n;
  auto sentence_at = [&](std::size_t i) -> const Sentence& {
    const auto& p = corpus.pairs[i / 2];
    return (i % 2 == 0) ? p.a : p.b;
  };
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = pick(rng);
    std::size_t j = pick(rng);
    while (j == i) j = pick(rng);
    out.pairs.push_back({sentence_at(i), sentence_at(j), Label::negative});
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Sentence Sentence::parse(std::string_view raw) {
  Sentence s;
  s.raw = std::string(raw);
  std::size_t i = 0;
  while (i < raw.size()) {
    while (i < raw.size() && (raw[i] == ' ' || raw[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < raw.size() && raw[j] != ' ' && raw[j] != '\t') ++j;
    if (j > i) s.tokens.emplace_back(raw.substr(i, j - i));
    i = j;
  }
  if (s.tokens.empty()) throw std::invalid_argument("sentence has no tokens");
  return s;
}

Sentence Sentence::from_tokens(std::vector<std::string> tokens) {
  if (tokens.empty()) throw std::invalid_argument("sentence has no tokens");
  Sentence s;
  s.tokens = std::move(tokens);
  s.raw = s.joined();
  return s;
}

std::string Sentence::joined() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

bool is_valid_grade(double grade) {
  for (double g : kGradeValues)
    if (grade == g) return true;
  return false;
}

std::size_t LabeledPairSet::count(Label label) const {
  std::size_t n = 0;
  for (const auto& p : pairs) n += (p.label == label);
  return n;
}

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " +
                         what),
      line_(line) {}

// ---------------------------------------------------------------------------

RankedPairCorpus read_pair_corpus(std::istream& in, const std::string& source) {
  RankedPairCorpus corpus;
  std::optional<double> last_score;
  for_each_line(in, [&](std::string_view line, std::size_t lineno) {
    auto f = split_tabs(line);
    if (f.size() < 2 || f.size() > 3)
      throw ParseError(source, lineno,
                       "expected 2 or 3 tab-separated fields, got " + std::to_string(f.size()));
    RankedPair pair{parse_sentence_field(f[0], source, lineno),
                    parse_sentence_field(f[1], source, lineno), std::nullopt};
    if (f.size() == 3) {
      pair.rank_score = parse_real(f[2]);
      if (!pair.rank_score) throw ParseError(source, lineno, "bad rank_score");
      if (last_score && *pair.rank_score > *last_score)
        throw ParseError(source, lineno, "rank_score increases; corpus must be best-first");
      last_score = pair.rank_score;
    }
    corpus.pairs.push_back(std::move(pair));
  });
  if (corpus.pairs.empty()) throw ParseError(source, 0, "empty corpus");
  return corpus;
}

RankedPairCorpus load_pair_corpus(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_pair_corpus(in, path.string());
}

void write_pair_corpus(std::ostream& out, const RankedPairCorpus& corpus) {
  for (const auto& p : corpus.pairs) {
    out << p.a.joined() << '\t' << p.b.joined();
    if (p.rank_score) out << '\t' << format_real(*p.rank_score);
    out << '\n';
  }
}

AnnotatedPairSet read_annotated_set(std::istream& in, const std::string& source,
                                    bool strict_grades) {
  AnnotatedPairSet set;
  for_each_line(in, [&](std::string_view line, std::size_t lineno) {
    auto f = split_tabs(line);
    if (f.size() != 3)
      throw ParseError(source, lineno,
                       "expected 3 tab-separated fields, got " + std::to_string(f.size()));
    auto grade = parse_real(f[2]);
    if (!grade) throw ParseError(source, lineno, "bad grade");
    if (strict_grades && !is_valid_grade(*grade))
      throw ParseError(source, lineno, "grade must be one of 1.0, 1.5, ..., 4.0");
    set.pairs.push_back({parse_sentence_field(f[0], source, lineno),
                         parse_sentence_field(f[1], source, lineno), *grade});
  });
  if (set.pairs.empty()) throw ParseError(source, 0, "empty annotated set");
  return set;
}

AnnotatedPairSet load_annotated_set(const std::filesystem::path& path, bool strict_grades) {
  auto in = open_input(path);
  return read_annotated_set(in, path.string(), strict_grades);
}

void write_annotated_set(std::ostream& out, const AnnotatedPairSet& set) {
  for (const auto& p : set.pairs)
    out << p.a.joined() << '\t' << p.b.joined() << '\t' << format_real(p.grade) << '\n';
}

LabeledPairSet read_labeled_set(std::istream& in, const std::string& source) {
  LabeledPairSet set;
  for_each_line(in, [&](std::string_view line, std::size_t lineno) {
    auto f = split_tabs(line);
    if (f.size() != 3)
      throw ParseError(source, lineno,
                       "expected 3 tab-separated fields, got " + std::to_string(f.size()));
    Label label;
    if (f[0] == "1") {
      label = Label::positive;
    } else if (f[0] == "0") {
      label = Label::negative;
    } else {
      throw ParseError(source, lineno, "label must be 0 or 1");
    }
    set.pairs.push_back({parse_sentence_field(f[1], source, lineno),
                         parse_sentence_field(f[2], source, lineno), label});
  });
  if (set.pairs.empty()) throw ParseError(source, 0, "empty labeled set");
  return set;
}

LabeledPairSet load_labeled_set(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_labeled_set(in, path.string());
}

void write_labeled_set(std::ostream& out, const LabeledPairSet& set) {
  for (const auto& p : set.pairs)
    out << (p.label == Label::positive ? '1' : '0') << '\t' << p.a.joined() << '\t'
        << p.b.joined() << '\n';
}

// ---------------------------------------------------------------------------

LabeledPairSet sample_training_set(const RankedPairCorpus& corpus, std::size_t n_positive,
                                   std::uint64_t seed) {
  if (n_positive > corpus.size())
    throw std::invalid_argument("requested " + std::to_string(n_positive) +
                                " positives but corpus has " + std::to_string(corpus.size()) +
                                " pairs");
  if (n_positive == 0) throw std::invalid_argument("n_positive must be >= 1");
  LabeledPairSet out;
  out.pairs.reserve(2 * n_positive);
  for (std::size_t i = 0; i < n_positive; ++i)
    out.pairs.push_back({corpus.pairs[i].a, corpus.pairs[i].b, Label::positive});
  append_negatives(corpus, n_positive, seed, out);
  return out;
}

std::size_t pair_tokens(const RankedPair& pair) { return pair.a.size() + pair.b.size(); }

LabeledPairSet sample_by_token_budget(const RankedPairCorpus& corpus, std::size_t token_budget,
                                      std::uint64_t seed) {
  if (corpus.pairs.empty()) throw std::invalid_argument("empty corpus");
  std::size_t used = 0;
  std::size_t n = 0;
  for (const auto& p : corpus.pairs) {
    const std::size_t t = pair_tokens(p);
    if (used + t > token_budget) break;
    used += t;
    ++n;
  }
  if (n == 0)
    throw std::invalid_argument("token budget " + std::to_string(token_budget) +
                                " is smaller than the first pair (" +
                                std::to_string(pair_tokens(corpus.pairs.front())) + " tokens)");
  return sample_training_set(corpus, n, seed);
}

// ---------------------------------------------------------------------------

QualityCurve::QualityCurve(std::vector<QualityPoint> points) : points_(std::move(points)) {
  if (points_.empty()) throw std::invalid_argument("quality curve has no points");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (!(p.clean_fraction >= 0.0 && p.clean_fraction <= 1.0))
      throw std::invalid_argument("clean fraction outside [0, 1]");
    if (!(p.prefix_size >= 0.0)) throw std::invalid_argument("negative prefix size");
    if (i > 0 && !(p.prefix_size > points_[i - 1].prefix_size))
      throw std::invalid_argument("quality curve prefix sizes must be strictly increasing");
  }
}

double QualityCurve::at(double x) const {
  if (x <= points_.front().prefix_size) return points_.front().clean_fraction;
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const auto& lo = points_[i - 1];
    const auto& hi = points_[i];
    if (x <= hi.prefix_size) {
      const double t = (x - lo.prefix_size) / (hi.prefix_size - lo.prefix_size);
      return lo.clean_fraction + t * (hi.clean_fraction - lo.clean_fraction);
    }
  }
  return points_.back().clean_fraction;
}

double QualityCurve::max_fraction() const {
  double m = 0.0;
  for (const auto& p : points_) m = std::max(m, p.clean_fraction);
  return m;
}

QualityCurve read_quality_curve(std::istream& in, const std::string& source) {
  std::vector<QualityPoint> points;
  for_each_line(in, [&](std::string_view line, std::size_t lineno) {
    if (line.front() == '#') return;
    auto f = split_tabs(line);
    if (f.size() != 2) throw ParseError(source, lineno, "expected prefix_size<TAB>fraction");
    auto x = parse_real(f[0]);
    auto y = parse_real(f[1]);
    if (!x || !y) throw ParseError(source, lineno, "bad number");
    points.push_back({*x, *y});
  });
  try {
    return QualityCurve(std::move(points));
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, 0, e.what());
  }
}

QualityCurve load_quality_curve(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_quality_curve(in, path.string());
}

std::size_t select_prefix_for_quality(const QualityCurve& curve, double target) {
  const auto& pts = curve.points();
  if (target > curve.max_fraction())
    throw UnattainableQuality("unattainable quality: target " + format_real(target) +
                              " exceeds curve maximum " + format_real(curve.max_fraction()));
  // Walk segments from the far end; the first point or crossing at or above
  // the target is the largest qualifying prefix.
  auto floor_size = [](double x) {
    return static_cast<std::size_t>(std::floor(x + 1e-9));
  };
  if (pts.back().clean_fraction >= target) return floor_size(pts.back().prefix_size);
  for (std::size_t i = pts.size() - 1; i > 0; --i) {
    const auto& lo = pts[i - 1];
    const auto& hi = pts[i];
    if (lo.clean_fraction >= target) {
      // hi is below target here, so the crossing lies inside (lo, hi].
      const double t = (target - lo.clean_fraction) / (hi.clean_fraction - lo.clean_fraction);
      return floor_size(lo.prefix_size + t * (hi.prefix_size - lo.prefix_size));
    }
  }
  throw UnattainableQuality("unattainable quality");
}

LabeledPairSet binarize_annotations(const AnnotatedPairSet& set) {
  LabeledPairSet out;
  for (const auto& p : set.pairs) {
    if (p.grade >= 3.0) {
      out.pairs.push_back({p.a, p.b, Label::positive});
    } else if (p.grade <= 2.0) {
      out.pairs.push_back({p.a, p.b, Label::negative});
    }
  }
  return out;
}

}  // namespace parasent
