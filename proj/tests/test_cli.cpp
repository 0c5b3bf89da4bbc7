#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "parasent/checkpoint.hpp"
#include "parasent/cli.hpp"

namespace fs = std::filesystem;
using namespace parasent;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> v;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);)
    if (!l.empty()) v.push_back(l);
  return v;
}

// Shared scratch directory with a small synthetic corpus and trained models.
struct Workspace {
  fs::path dir, previous;
  Workspace() {
    dir = fs::temp_directory_path() / "parasent_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    // Commands writing to stdout put their default manifest in the cwd.
    previous = fs::current_path();
    fs::current_path(dir);
    auto r = run({"synth", "paraphrase", "--out-dir", s("syn"), "--pairs", "300", "--dev", "200",
                  "--test", "200", "--seed", "3"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    r = run({"sample", "--input", s("syn/corpus.tsv"), "--output", s("train.tsv"), "--positives",
             "300", "--seed", "1"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    for (std::string enc : {"wa", "gran"}) {
      r = run({"train", "--data", s("train.tsv"), "--output", s(enc + ".ckpt"), "--encoder", enc,
               "--dim", "16", "--hidden", "16", "--epochs", "2"});
      REQUIRE_MESSAGE(r.code == 0, r.err);
    }
    std::ofstream sents(dir / "sentences.txt");
    std::ifstream corpus(dir / "syn/corpus.tsv");
    int n = 0;
    for (std::string l; std::getline(corpus, l) && n < 50; ++n) sents << l.substr(0, l.find('\t')) << '\n';
  }
  ~Workspace() {
    fs::current_path(previous);
    fs::remove_all(dir);
  }
  std::string s(const std::string& rel) const { return (dir / rel).string(); }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("version and usage errors") {
  CHECK(run({"--version"}).code == 0);
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"no-such-command"}).code == cli::kUsage);
  CHECK(run({"train"}).code == cli::kUsage);
}

TEST_CASE("missing input names the path") {
  auto& w = ws();
  const auto missing = w.s("nope.tsv");
  const auto r = run({"segment", "train", "--input", missing, "--output", w.s("m.txt")});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find(missing) != std::string::npos);
}

TEST_CASE("sample modes are exclusive") {
  auto& w = ws();
  const auto r = run({"sample", "--input", w.s("syn/corpus.tsv"), "--output", w.s("x.tsv"), "--positives",
                      "10", "--token-budget", "100"});
  CHECK(r.code == cli::kUsage);
  CHECK(run({"sample", "--input", w.s("syn/corpus.tsv"), "--output", w.s("x.tsv")}).code == cli::kUsage);
}

TEST_CASE("sample writes 2N lines and records the mode") {
  auto& w = ws();
  CHECK(lines_of(slurp(w.dir / "train.tsv")).size() == 600);
  const auto m = nlohmann::json::parse(slurp(w.dir / "train.tsv.manifest.json"));
  CHECK(m["details"]["mode"] == "positives");
  CHECK(m["seeds"]["seed"] == 1);
  CHECK(m["inputs"].size() == 1);
}

TEST_CASE("train manifest echoes defaults") {
  auto& w = ws();
  const auto m = nlohmann::json::parse(slurp(w.dir / "gran.ckpt.manifest.json"));
  CHECK(m["flags"]["lr"] == "0.001");
  CHECK(m["flags"]["batch"] == "128");
  CHECK(m["flags"]["margin"] == "0.4");
  CHECK(m["details"]["config"]["lr"] == 0.001);
  CHECK(m["details"]["config"]["batch"] == 128);
  CHECK(m["version"] == cli::kVersion);
  CHECK(m.contains("wall_seconds"));
}

TEST_CASE("WA checkpoint has no recurrent parameters") {
  auto& w = ws();
  const auto wa = load_checkpoint(w.dir / "wa.ckpt");
  CHECK(wa.kind() == EncoderKind::wa);
  CHECK(wa.params().size() == 1);
  CHECK_THROWS_AS(load_checkpoint(w.dir / "wa.ckpt", EncoderKind::gran), CheckpointError);
  const auto r = run({"eval", "nn", "--model", w.s("wa.ckpt"), "--sentences", w.s("sentences.txt"),
                      "--query", "hello there", "--k", "3"});
  CHECK(r.code == 0);
}

TEST_CASE("eval classify prints accuracy and the baseline") {
  auto& w = ws();
  const auto r = run({"eval", "classify", "--model", w.s("gran.ckpt"), "--dev", w.s("syn/dev.tsv"),
                      "--test", w.s("syn/test.tsv")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto ls = lines_of(r.out);
  REQUIRE(ls.size() == 2);
  CHECK(ls[0].find("accuracy") != std::string::npos);
  CHECK(ls[0].find("AP") != std::string::npos);
  CHECK(ls[1].rfind("gran\t", 0) == 0);
}

TEST_CASE("eval nn returns k rows in descending order") {
  auto& w = ws();
  const auto r = run({"eval", "nn", "--model", w.s("gran.ckpt"), "--sentences", w.s("sentences.txt"),
                      "--query", "okay , you don 't get it , man .", "--k", "10"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  auto ls = lines_of(r.out);
  REQUIRE(ls.size() == 11);
  CHECK(ls[0] == "rank\tsimilarity\tsentence");
  double prev = 2.0;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    std::istringstream is(ls[i]);
    int rank;
    double sim;
    is >> rank >> sim;
    CHECK(rank == int(i));
    CHECK(sim <= prev);
    prev = sim;
  }
}

TEST_CASE("eval hist has 200 rows summing to the index size") {
  auto& w = ws();
  const auto r = run({"eval", "hist", "--model", w.s("gran.ckpt"), "--sentences", w.s("sentences.txt"),
                      "--query", "a query"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto ls = lines_of(r.out);
  REQUIRE(ls.size() == 201);
  CHECK(ls[0] == "bin_low,bin_high,count");
  long total = 0;
  for (std::size_t i = 1; i < ls.size(); ++i) total += std::stol(ls[i].substr(ls[i].rfind(',') + 1));
  CHECK(total == 50);
  CHECK(run({"eval", "hist", "--model", w.s("gran.ckpt"), "--sentences", w.s("sentences.txt"), "--query",
             "q", "--bins", "10", "--bin-width", "0.2"})
            .code == cli::kUsage);
}

TEST_CASE("eval grades and corr") {
  auto& w = ws();
  auto r = run({"eval", "grades", "--model", w.s("wa.ckpt"), "--dev", w.s("syn/dev.tsv")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.rfind("grade,count,mean,std", 0) == 0);
  r = run({"eval", "corr", "--model", w.s("wa.ckpt"), "--input", w.s("syn/dev.tsv")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.rfind("pearson\tspearman\tpairs", 0) == 0);
}

TEST_CASE("segment apply with a never-split model is the identity") {
  auto& w = ws();
  {
    std::ofstream m(w.dir / "identity.model");
    m << "#morphseg v1 total=4 alphabet=6\nhello\t2\nworld\t2\n";
    std::ofstream t(w.dir / "plain.txt");
    t << "hello world\nworld hello hello\n";
  }
  const auto r = run({"segment", "apply", "--model", w.s("identity.model"), "--input", w.s("plain.txt"),
                      "--output", w.s("seg.txt")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(slurp(w.dir / "seg.txt") == slurp(w.dir / "plain.txt"));
}

TEST_CASE("segment train writes a model with a header") {
  auto& w = ws();
  const auto r = run({"segment", "train", "--input", w.s("sentences.txt"), "--output", w.s("seg.model")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(slurp(w.dir / "seg.model").rfind("#morphseg v1 total=", 0) == 0);
}

TEST_CASE("replay reproduces outputs and detects changes") {
  auto& w = ws();
  const auto r = run({"--manifest", w.s("t.manifest.json"), "train", "--data", w.s("train.tsv"), "--output",
                      w.s("replayed.ckpt"), "--encoder", "gran", "--dim", "8", "--hidden", "8", "--epochs",
                      "1"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  auto rp = run({"replay", w.s("t.manifest.json")});
  CHECK_MESSAGE(rp.code == 0, rp.out << rp.err);
  CHECK(rp.out.find("identical") != std::string::npos);

  // Changing an input makes replay refuse.
  fs::copy_file(w.dir / "train.tsv", w.dir / "train.bak");
  { std::ofstream(w.dir / "train.tsv", std::ios::app) << "1\tx y\tx y\n"; }
  CHECK(run({"replay", w.s("t.manifest.json")}).code == cli::kUsage);
  fs::rename(w.dir / "train.bak", w.dir / "train.tsv");
}
