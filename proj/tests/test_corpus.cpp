#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "parasent/corpus.hpp"
#include "parasent/vocabulary.hpp"

using namespace parasent;

namespace {

RankedPairCorpus numbered_corpus(std::size_t n) {
  RankedPairCorpus c;
  for (std::size_t i = 0; i < n; ++i)
    c.pairs.push_back({Sentence::parse("a" + std::to_string(i) + " x"),
                       Sentence::parse("b" + std::to_string(i) + " y"), std::nullopt});
  return c;
}

std::string serialize(const LabeledPairSet& s) {
  std::ostringstream o;
  write_labeled_set(o, s);
  return o.str();
}

}  // namespace

TEST_CASE("sentence parsing") {
  const auto s = Sentence::parse("okay ,  you   don 't");
  CHECK(s.tokens == std::vector<std::string>{"okay", ",", "you", "don", "'t"});
  CHECK(s.joined() == "okay , you don 't");
  CHECK_THROWS_AS(Sentence::parse("   "), std::invalid_argument);
}

TEST_CASE("pair corpus reading") {
  std::istringstream in("a b\tc d\t0.9\ne\tf\t0.8\ng h\ti\t0.7\n");
  const auto c = read_pair_corpus(in);
  REQUIRE(c.size() == 3);
  CHECK(c.pairs[0].a.joined() == "a b");
  CHECK(c.pairs[2].b.joined() == "i");
  CHECK(*c.pairs[1].rank_score == 0.8);

  std::istringstream bad("a\tb\nonlyone\n");
  try {
    read_pair_corpus(bad, "bad.tsv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream empty("");
  CHECK_THROWS_AS(read_pair_corpus(empty), ParseError);
  std::istringstream rising("a\tb\t0.1\nc\td\t0.5\n");
  CHECK_THROWS_AS(read_pair_corpus(rising), ParseError);
}

TEST_CASE("labeled set round trip") {
  LabeledPairSet s;
  s.pairs.push_back({Sentence::parse("a b"), Sentence::parse("c"), Label::positive});
  s.pairs.push_back({Sentence::parse("d"), Sentence::parse("e f"), Label::negative});
  std::istringstream in(serialize(s));
  CHECK(read_labeled_set(in) == s);
  std::istringstream bad("2\ta\tb\n");
  CHECK_THROWS_AS(read_labeled_set(bad), ParseError);
}

TEST_CASE("annotated grades") {
  std::istringstream in("a\tb\t4.0\nc\td\t2.5\n");
  CHECK(read_annotated_set(in).size() == 2);
  std::istringstream bad("a\tb\t3.2\n");
  CHECK_THROWS_AS(read_annotated_set(bad), ParseError);
  std::istringstream loose("a\tb\t3.2\n");
  CHECK(read_annotated_set(loose, "<s>", false).pairs[0].grade == 3.2);
}

TEST_CASE("sample_training_set") {
  const auto c = numbered_corpus(10);
  const auto s = sample_training_set(c, 5, 42);
  REQUIRE(s.size() == 10);
  CHECK(s.count(Label::positive) == 5);
  CHECK(s.count(Label::negative) == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(s.pairs[i].label == Label::positive);
    CHECK(s.pairs[i].a == c.pairs[i].a);
    CHECK(s.pairs[i].b == c.pairs[i].b);
  }
  // Negatives use sentences of the sampled prefix only.
  for (std::size_t i = 5; i < 10; ++i) {
    for (const auto* side : {&s.pairs[i].a, &s.pairs[i].b}) {
      const auto& tok = side->tokens[0];
      CHECK(std::stoi(tok.substr(1)) < 5);
    }
  }
  CHECK(serialize(sample_training_set(c, 5, 42)) == serialize(s));
  CHECK(serialize(sample_training_set(c, 5, 43)) != serialize(s));
  CHECK_THROWS(sample_training_set(c, 11, 1));
}

TEST_CASE("quality curve prefix selection") {
  const QualityCurve constant({{100, 0.7}});
  CHECK(select_prefix_for_quality(constant, 0.7) == 100);

  const QualityCurve en({{5e6, 0.80}, {20e6, 0.70}, {34e6, 0.60}});
  CHECK(select_prefix_for_quality(en, 0.70) == 20000000);
  CHECK(select_prefix_for_quality(en, 0.80) == 5000000);

  const QualityCurve two({{10, 0.9}, {20, 0.5}});
  CHECK(select_prefix_for_quality(two, 0.7) == 15);
  CHECK_THROWS_AS(select_prefix_for_quality(two, 0.95), UnattainableQuality);

  std::size_t last = 0;
  for (double t = 0.9; t >= 0.5; t -= 0.05) {
    const auto n = select_prefix_for_quality(two, t);
    CHECK(n >= last);
    last = n;
  }
  CHECK_THROWS(QualityCurve({{10, 0.9}, {10, 0.5}}));
}

TEST_CASE("token budget sampling") {
  RankedPairCorpus c;
  for (int i = 0; i < 3; ++i) c.pairs.push_back({Sentence::parse("a b"), Sentence::parse("c d"), {}});
  CHECK(pair_tokens(c.pairs[0]) == 4);
  CHECK(sample_by_token_budget(c, 10, 1).count(Label::positive) == 2);
  CHECK(sample_by_token_budget(c, 12, 1).count(Label::positive) == 3);
  CHECK(sample_by_token_budget(c, 4, 1).count(Label::positive) == 1);
  CHECK_THROWS(sample_by_token_budget(c, 3, 1));
}

TEST_CASE("binarize annotations") {
  AnnotatedPairSet set;
  for (double g : kGradeValues) set.pairs.push_back({Sentence::parse("a"), Sentence::parse("b"), g});
  const auto b = binarize_annotations(set);
  CHECK(b.size() == 6);
  CHECK(b.count(Label::positive) == 3);
  CHECK(b.count(Label::negative) == 3);
  CHECK(b.pairs.front().label == Label::negative);
  CHECK(b.pairs.back().label == Label::positive);
}

TEST_CASE("vocabulary construction") {
  VocabularyBuilder vb;
  vb.add(Sentence::parse("a b"));
  vb.add(Sentence::parse("a"));
  const auto v1 = vb.build(1);
  CHECK(v1.size() == 3);
  CHECK(v1.id("a") != Vocabulary::kUnknown);
  CHECK(v1.id("zzz") == Vocabulary::kUnknown);
  const auto v2 = vb.build(2);
  CHECK(v2.size() == 2);
  CHECK(v2.contains("a"));
  CHECK_FALSE(v2.contains("b"));
  const auto ids = v2.encode(Sentence::parse("a b"));
  CHECK(ids == std::vector<TokenId>{v2.id("a"), Vocabulary::kUnknown});
}
