#include "parasent/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "parasent/checkpoint.hpp"
#include "parasent/corpus.hpp"
#include "parasent/morphseg.hpp"
#include "parasent/probe.hpp"
#include "parasent/search.hpp"
#include "parasent/stats.hpp"
#include "parasent/synthetic.hpp"
#include "parasent/trainer.hpp"

namespace parasent::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

namespace {

// Bad flags or unusable input files: exit 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Records what a command read and wrote.
class RunRecord {
 public:
  json inputs = json::array();
  json outputs = json::array();
  json seeds = json::object();
  json extra = json::object();

  const std::string& input(const std::string& path) {
    if (!fs::exists(path)) throw InputError("input file not found: " + path);
    inputs.push_back({{"path", path}, {"sha256", sha256_file(path)}});
    return path;
  }

  void write(const std::string& path, const std::string& bytes, bool deterministic = true) {
    std::ofstream o(path, std::ios::binary | std::ios::trunc);
    if (!o) throw InputError("cannot write " + path);
    o.write(bytes.data(), std::streamsize(bytes.size()));
    o.close();
    if (!o) throw InputError("write failed: " + path);
    outputs.push_back({{"path", path}, {"sha256", sha256_hex(bytes)}, {"deterministic", deterministic}});
  }

  // Report text: to the file when given, else to the output stream.
  void report(const std::string& path, const std::string& text, std::ostream& out) {
    if (!path.empty()) {
      write(path, text);
      return;
    }
    out << text;
    outputs.push_back({{"path", "-"}, {"sha256", sha256_hex(text)}, {"deterministic", true}});
  }
};

// ---------------------------------------------------------------------------
// Input helpers

enum class Format { auto_detect, counts, pairs, labeled, annotated, text };

Format parse_format(const std::string& s) {
  if (s == "auto") return Format::auto_detect;
  if (s == "counts") return Format::counts;
  if (s == "pairs") return Format::pairs;
  if (s == "labeled") return Format::labeled;
  if (s == "annotated") return Format::annotated;
  if (s == "text") return Format::text;
  throw InputError("unknown format: " + s);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> f;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find('\t', start);
    f.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return f;
}

bool is_unsigned_integer(const std::string& s) {
  return !s.empty() && s.find_first_not_of("0123456789") == std::string::npos;
}

// Guesses from the first non-empty line. Three-column files other than
// labeled ones are ambiguous (rank score vs. grade) and need --format.
Format detect_format(const std::string& path, bool allow_counts) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() == 1) return Format::text;
    if (f.size() == 2) return allow_counts && is_unsigned_integer(f[1]) ? Format::counts : Format::pairs;
    if (f.size() == 3 && (f[0] == "0" || f[0] == "1")) return Format::labeled;
    break;
  }
  throw InputError("cannot infer the format of " + path + "; pass --format");
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

// One sentence per non-empty line.
std::vector<Sentence> load_sentences(const std::string& path) {
  std::vector<Sentence> out;
  std::size_t n = 0;
  for (const auto& line : read_lines(path)) {
    ++n;
    try {
      out.push_back(Sentence::parse(line));
    } catch (const std::invalid_argument& e) {
      throw ParseError(path, n, e.what());
    }
  }
  if (out.empty()) throw InputError("no sentences in " + path);
  return out;
}

std::size_t resolve_threads(std::optional<std::size_t> flag) {
  if (flag) return std::max<std::size_t>(1, *flag);
  if (const char* env = std::getenv("PARA_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return std::size_t(v);
    throw InputError(std::string("PARA_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

// Options of one (sub)command as name -> value strings.
void collect_flags(const CLI::App* app, json& flags) {
  for (const CLI::Option* opt : app->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      if (opt->get_type_size() == 0)
        flags[name] = true;
      else
        flags[name] = r.size() == 1 ? json(r.front()) : json(r);
    } else if (!opt->get_default_str().empty()) {
      flags[name] = opt->get_default_str();
    } else if (opt->get_type_size() == 0) {
      flags[name] = false;
    }
  }
}

// ---------------------------------------------------------------------------
// Command options

struct Common {
  std::optional<std::size_t> threads;
  std::string manifest;
};

struct SegmentTrainOpts {
  std::string input, output, format = "auto";
  std::uint64_t seed = 42;
  std::optional<double> threshold;
  bool type_based = false;
  std::size_t max_epochs = 100;
};

struct SegmentApplyOpts {
  std::string model, input, output, format = "auto";
};

struct SampleOpts {
  std::string input, output, quality_curve;
  std::optional<std::size_t> positives, token_budget;
  std::optional<double> clean_target;
  std::uint64_t seed = 42;
};

struct TrainOpts {
  std::string data, dev, output, log, segmenter, encoder = "gran";
  double margin = kDefaultMargin, lr = 0.001, keep_prob = 0.8;
  std::size_t batch = 128, epochs = 10, dim = 300, hidden = 300, min_count = 1, patience = 2,
              max_length = 512;
  bool gate_biases = false;
  std::uint64_t seed = 42;
};

struct EvalOpts {
  std::string model, segmenter, output, dev, test, sentences, query, input;
  std::size_t k = 10;
  std::optional<std::size_t> bins;
  std::optional<double> bin_width;
  double alpha = 0.01;
  std::uint64_t seed = 42;
};

std::optional<morphseg::SegmentationModel> maybe_segmenter(RunRecord& rec, const std::string& path) {
  if (path.empty()) return std::nullopt;
  return morphseg::load_model(rec.input(path));
}

template <class Set>
Set segmented(Set set, const std::optional<morphseg::SegmentationModel>& seg) {
  if (!seg) return set;
  return morphseg::apply_segmentation(set, *seg);
}

Sentence segmented(const Sentence& s, const std::optional<morphseg::SegmentationModel>& seg) {
  return seg ? morphseg::apply_segmentation(s, *seg) : s;
}

// ---------------------------------------------------------------------------
// Commands

void cmd_segment_train(const SegmentTrainOpts& o, RunRecord& rec, std::ostream& out) {
  rec.input(o.input);
  Format fmt = parse_format(o.format);
  if (fmt == Format::auto_detect) fmt = detect_format(o.input, true);
  morphseg::WordCountTable table;
  switch (fmt) {
    case Format::counts: table = morphseg::load_word_counts(o.input); break;
    case Format::pairs: table = morphseg::WordCountTable::from_corpus(load_pair_corpus(o.input)); break;
    case Format::text: table = morphseg::WordCountTable::from_sentences(load_sentences(o.input)); break;
    default: throw InputError("segment train reads counts, pairs or text input");
  }
  morphseg::TrainOptions topt;
  topt.seed = o.seed;
  topt.convergence_threshold = o.threshold;
  topt.type_based = o.type_based;
  topt.max_epochs = o.max_epochs;
  rec.seeds["seed"] = o.seed;
  morphseg::TrainStats stats;
  const auto model = morphseg::train_segmenter(table, topt, &stats);
  std::ostringstream ms;
  morphseg::save_model(ms, model);
  rec.write(o.output, ms.str());

  std::ostringstream rep;
  rep << "word_types\t" << table.counts.size() << "\n"
      << "morph_types\t" << model.morph_counts().size() << "\n"
      << "initial_cost\t" << fixed(stats.initial_cost, 3) << "\n"
      << "final_cost\t" << fixed(stats.final_cost, 3) << "\n"
      << "epochs\t" << stats.epochs << "\n";
  rec.report("", rep.str(), out);
}

void cmd_segment_apply(const SegmentApplyOpts& o, RunRecord& rec) {
  const auto model = morphseg::load_model(rec.input(o.model));
  rec.input(o.input);
  Format fmt = parse_format(o.format);
  if (fmt == Format::auto_detect) fmt = detect_format(o.input, false);
  std::ostringstream os;
  switch (fmt) {
    case Format::pairs: write_pair_corpus(os, morphseg::apply_segmentation(load_pair_corpus(o.input), model)); break;
    case Format::labeled: write_labeled_set(os, morphseg::apply_segmentation(load_labeled_set(o.input), model)); break;
    case Format::annotated:
      write_annotated_set(os, morphseg::apply_segmentation(load_annotated_set(o.input, false), model));
      break;
    case Format::text:
      for (const auto& s : load_sentences(o.input)) os << morphseg::apply_segmentation(s, model).joined() << '\n';
      break;
    default: throw InputError("segment apply reads pairs, labeled, annotated or text input");
  }
  rec.write(o.output, os.str());
}

void cmd_sample(const SampleOpts& o, RunRecord& rec, std::ostream& err) {
  const int modes = int(o.positives.has_value()) + int(o.clean_target.has_value()) +
                    int(o.token_budget.has_value());
  if (modes != 1)
    throw CLI::ValidationError("sample", "exactly one of --positives, --clean-target, --token-budget is required");
  if (o.clean_target && o.quality_curve.empty())
    throw CLI::ValidationError("sample", "--clean-target needs --quality-curve");
  if (!o.clean_target && !o.quality_curve.empty())
    throw CLI::ValidationError("sample", "--quality-curve is only used with --clean-target");

  const auto corpus = load_pair_corpus(rec.input(o.input));
  rec.seeds["seed"] = o.seed;
  LabeledPairSet set;
  if (o.positives) {
    rec.extra["mode"] = "positives";
    set = sample_training_set(corpus, *o.positives, o.seed);
  } else if (o.clean_target) {
    rec.extra["mode"] = "clean_target";
    const auto curve = load_quality_curve(rec.input(o.quality_curve));
    const std::size_t n = select_prefix_for_quality(curve, *o.clean_target);
    rec.extra["selected_positives"] = n;
    err << "clean target " << *o.clean_target << " selects " << n << " positives\n";
    if (n > corpus.size())
      throw InputError("quality target selects " + std::to_string(n) + " positives but " + o.input +
                       " has only " + std::to_string(corpus.size()) + " pairs");
    set = sample_training_set(corpus, n, o.seed);
  } else {
    rec.extra["mode"] = "token_budget";
    set = sample_by_token_budget(corpus, *o.token_budget, o.seed);
    rec.extra["selected_positives"] = set.count(Label::positive);
  }
  std::ostringstream os;
  write_labeled_set(os, set);
  rec.write(o.output, os.str());
}

void cmd_train(const TrainOpts& o, RunRecord& rec, std::ostream& out, std::ostream& err) {
  const auto seg = maybe_segmenter(rec, o.segmenter);
  const auto data = segmented(load_labeled_set(rec.input(o.data)), seg);
  std::optional<AnnotatedPairSet> dev;
  if (!o.dev.empty()) dev = segmented(load_annotated_set(rec.input(o.dev)), seg);

  TrainConfig cfg;
  cfg.encoder.kind = parse_encoder_kind(o.encoder);
  cfg.encoder.dim = o.dim;
  cfg.encoder.hidden = o.hidden;
  cfg.encoder.gate_biases = o.gate_biases;
  cfg.encoder.max_length = o.max_length;
  cfg.margin = o.margin;
  cfg.adam.learning_rate = o.lr;
  cfg.batch_size = o.batch;
  cfg.epochs = o.epochs;
  cfg.keep_prob = o.keep_prob;
  cfg.seed = o.seed;
  cfg.min_count = o.min_count;
  cfg.patience = o.patience;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw CLI::ValidationError("train", e.what());
  }
  rec.seeds["seed"] = o.seed;
  rec.extra["config"] = json::parse(cfg.to_json());

  auto result = train(cfg, data, dev ? &*dev : nullptr, [&](const EpochLog& e) {
    err << "epoch " << e.epoch << " loss " << fixed(e.mean_loss, 6);
    if (e.dev_accuracy) err << " dev_acc " << fixed(*e.dev_accuracy);
    err << " (" << fixed(e.seconds, 1) << "s)\n";
  });
  rec.write(o.output, serialize_checkpoint(result.model));
  std::ostringstream log;
  result.log.write_csv(log);
  rec.write(o.log.empty() ? o.output + ".log.csv" : o.log, log.str(), false);

  const auto& last = result.log.epochs.back();
  std::ostringstream rep;
  rep << "encoder\t" << to_string(cfg.encoder.kind) << "\n"
      << "vocabulary\t" << result.model.vocab().size() << "\n"
      << "epochs\t" << result.log.epochs.size() << "\n"
      << "best_epoch\t" << result.log.best_epoch << "\n"
      << "final_loss\t" << fixed(last.mean_loss, 6) << "\n";
  rec.report("", rep.str(), out);
}

EncoderModel load_model_input(RunRecord& rec, const std::string& path) {
  return load_checkpoint(rec.input(path));
}

void cmd_classify(const EvalOpts& o, RunRecord& rec, std::ostream& out) {
  const auto model = load_model_input(rec, o.model);
  const auto seg = maybe_segmenter(rec, o.segmenter);
  const auto dev = binarize_annotations(segmented(load_annotated_set(rec.input(o.dev)), seg));
  const auto test = binarize_annotations(segmented(load_annotated_set(rec.input(o.test)), seg));
  ProbeConfig pc;
  pc.seed = o.seed;
  rec.seeds["seed"] = o.seed;
  rec.extra["probe"] = json::parse(pc.to_json());
  const auto probe = train_probe(dev, model, pc);
  const double acc = classify_accuracy(probe, test, model);
  const double ap = majority_baseline(test);
  std::ostringstream rep;
  rep << "encoder\taccuracy\tAP\ttest_pairs\n"
      << to_string(model.kind()) << '\t' << fixed(acc * 100.0, 1) << '\t' << fixed(ap * 100.0, 1)
      << '\t' << test.size() << '\n';
  rec.report(o.output, rep.str(), out);
}

EmbeddingIndex build_index(const EncoderModel& model, const std::vector<Sentence>& sentences,
                           const std::optional<morphseg::SegmentationModel>& seg) {
  EmbeddingIndex index(model.dim());
  index.reserve(sentences.size());
  for (const auto& s : sentences) index.add(model.embed(segmented(s, seg)));
  return index;
}

std::vector<float> embed_query(const EncoderModel& model, const std::string& query,
                               const std::optional<morphseg::SegmentationModel>& seg) {
  try {
    return model.embed(segmented(Sentence::parse(query), seg));
  } catch (const std::invalid_argument&) {
    throw CLI::ValidationError("--query", "query sentence is empty");
  }
}

void cmd_nn(const EvalOpts& o, RunRecord& rec, std::size_t threads, std::ostream& out) {
  if (o.k == 0) throw CLI::ValidationError("--k", "k must be >= 1");
  const auto model = load_model_input(rec, o.model);
  const auto seg = maybe_segmenter(rec, o.segmenter);
  const auto sentences = load_sentences(rec.input(o.sentences));
  const auto index = build_index(model, sentences, seg);
  const auto hits = topk_similar(index, embed_query(model, o.query, seg), o.k, {threads});
  std::ostringstream rep;
  rep << "rank\tsimilarity\tsentence\n";
  for (std::size_t i = 0; i < hits.size(); ++i)
    rep << i + 1 << '\t' << fixed(hits[i].similarity, 6) << '\t' << sentences[hits[i].id].raw << '\n';
  rec.report(o.output, rep.str(), out);
}

void cmd_hist(const EvalOpts& o, RunRecord& rec, std::size_t threads, std::ostream& out) {
  if (o.bins && o.bin_width) throw CLI::ValidationError("hist", "--bins and --bin-width are exclusive");
  const auto model = load_model_input(rec, o.model);
  const auto seg = maybe_segmenter(rec, o.segmenter);
  const auto index = build_index(model, load_sentences(rec.input(o.sentences)), seg);
  const auto q = embed_query(model, o.query, seg);
  Histogram h;
  try {
    h = o.bin_width ? similarity_histogram(index, q, *o.bin_width, {threads})
                    : similarity_histogram_bins(index, q, o.bins.value_or(200), {threads});
  } catch (const std::invalid_argument& e) {
    throw CLI::ValidationError("hist", e.what());
  }
  std::ostringstream rep;
  h.write_csv(rep);
  rec.report(o.output, rep.str(), out);
}

void cmd_grades(const EvalOpts& o, RunRecord& rec, std::ostream& out) {
  const auto model = load_model_input(rec, o.model);
  const auto seg = maybe_segmenter(rec, o.segmenter);
  const auto dev = segmented(load_annotated_set(rec.input(o.dev)), seg);
  const auto stats = grade_similarity_stats(dev, model, o.alpha);
  rec.extra["test"] = "welch_two_sided";
  std::ostringstream rep;
  stats.write_csv(rep);
  rec.report(o.output, rep.str(), out);
}

void cmd_corr(const EvalOpts& o, RunRecord& rec, std::ostream& out) {
  const auto model = load_model_input(rec, o.model);
  const auto seg = maybe_segmenter(rec, o.segmenter);
  const auto set = segmented(load_annotated_set(rec.input(o.input), false), seg);
  std::vector<double> gold;
  for (const auto& p : set.pairs) gold.push_back(p.grade);
  const auto sims = pair_similarities(set, model);
  std::ostringstream rep;
  rep << "pearson\tspearman\tpairs\n"
      << fixed(pearson_r(sims, gold), 6) << '\t' << fixed(spearman_rho(sims, gold), 6) << '\t'
      << set.size() << '\n';
  rec.report(o.output, rep.str(), out);
}

struct SynthOpts {
  std::string out_dir, output;
  std::size_t pairs = 2000, dev = 1000, test = 1000, sentences = 10000;
  double noise = 0.0, test_positive = 0.5;
  std::uint64_t seed = 42;
};

void cmd_synth_paraphrase(const SynthOpts& o, RunRecord& rec) {
  fs::create_directories(o.out_dir);
  synthetic::ParaphraseOptions po;
  po.seed = o.seed;
  rec.seeds["seed"] = o.seed;
  synthetic::ParaphraseGenerator gen(po);
  auto corpus = gen.training_corpus(o.pairs);
  if (o.noise > 0.0) corpus = synthetic::corrupt_pairs(corpus, o.noise, o.seed + 1);
  const auto dev = gen.annotated_set(o.dev);
  const auto test = gen.annotated_set(o.test, o.test_positive);
  const auto dir = fs::path(o.out_dir);
  std::ostringstream a, b, c;
  write_pair_corpus(a, corpus);
  write_annotated_set(b, dev);
  write_annotated_set(c, test);
  rec.write((dir / "corpus.tsv").string(), a.str());
  rec.write((dir / "dev.tsv").string(), b.str());
  rec.write((dir / "test.tsv").string(), c.str());
}

void cmd_synth_morph(const SynthOpts& o, RunRecord& rec) {
  synthetic::CompositionalOptions co;
  co.seed = o.seed;
  rec.seeds["seed"] = o.seed;
  std::ostringstream os;
  for (const auto& s : synthetic::compositional_corpus(o.sentences, co)) os << s.joined() << '\n';
  rec.write(o.output, os.str());
}

// ---------------------------------------------------------------------------
// Replay

std::vector<std::string> strip_run_flags(const std::vector<std::string>& argv) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    const auto& a = argv[i];
    if (a == "--threads" || a == "--manifest") {
      ++i;
      continue;
    }
    if (a.rfind("--threads=", 0) == 0 || a.rfind("--manifest=", 0) == 0) continue;
    out.push_back(a);
  }
  return out;
}

int replay(const std::string& manifest_path, std::ostream& out, std::ostream& err);

int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  CLI::App app{"Paraphrase sentence embeddings: segmentation, sampling, training, evaluation"};
  app.set_version_flag("--version", std::string("parasent ") + kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--threads", common.threads, "worker threads for index scans (env PARA_THREADS)");
  app.add_option("--manifest", common.manifest, "run manifest path");

  // segment / morphseg
  auto* seg = app.add_subcommand("segment", "unsupervised morphological segmentation");
  seg->alias("morphseg");
  seg->require_subcommand(1);
  SegmentTrainOpts st;
  auto* seg_train = seg->add_subcommand("train", "train a segmentation model");
  seg_train->add_option("--input", st.input, "word counts, pair corpus or text")->required();
  seg_train->add_option("--output", st.output, "model file")->required();
  seg_train->add_option("--format", st.format, "auto|counts|pairs|text")->capture_default_str();
  seg_train->add_option("--seed", st.seed)->capture_default_str();
  seg_train->add_option("--threshold", st.threshold, "stop when an epoch improves cost by less (nats)");
  seg_train->add_flag("--type-based", st.type_based, "count each word type once");
  seg_train->add_option("--max-epochs", st.max_epochs)->capture_default_str();
  SegmentApplyOpts sa;
  auto* seg_apply = seg->add_subcommand("apply", "segment a corpus with a trained model");
  seg_apply->add_option("--model", sa.model)->required();
  seg_apply->add_option("--input", sa.input)->required();
  seg_apply->add_option("--output", sa.output)->required();
  seg_apply->add_option("--format", sa.format, "auto|pairs|labeled|annotated|text")->capture_default_str();

  // sample
  SampleOpts so;
  auto* sample = app.add_subcommand("sample", "build a labeled training set from a ranked corpus");
  sample->add_option("--input", so.input, "ranked pair corpus")->required();
  sample->add_option("--output", so.output, "labeled pairs")->required();
  sample->add_option("--positives", so.positives, "take this many top pairs");
  sample->add_option("--clean-target", so.clean_target, "estimated clean fraction to reach");
  sample->add_option("--quality-curve", so.quality_curve, "prefix_size<TAB>clean_fraction file");
  sample->add_option("--token-budget", so.token_budget, "largest prefix within this many tokens");
  sample->add_option("--seed", so.seed)->capture_default_str();

  // train
  TrainOpts to;
  auto* tr = app.add_subcommand("train", "train a sentence encoder");
  tr->add_option("--data", to.data, "labeled pairs")->required();
  tr->add_option("--dev", to.dev, "annotated dev pairs for early stopping");
  tr->add_option("--output", to.output, "checkpoint")->required();
  tr->add_option("--log", to.log, "training log CSV (default <output>.log.csv)");
  tr->add_option("--segmenter", to.segmenter, "segmentation model applied to all inputs");
  tr->add_option("--encoder", to.encoder, "wa|gran")->capture_default_str();
  tr->add_option("--margin", to.margin)->capture_default_str();
  tr->add_option("--lr", to.lr)->capture_default_str();
  tr->add_option("--batch", to.batch)->capture_default_str();
  tr->add_option("--epochs", to.epochs)->capture_default_str();
  tr->add_option("--keep-prob", to.keep_prob)->capture_default_str();
  tr->add_option("--dim", to.dim)->capture_default_str();
  tr->add_option("--hidden", to.hidden)->capture_default_str();
  tr->add_option("--min-count", to.min_count)->capture_default_str();
  tr->add_option("--patience", to.patience, "dev early stopping; 0 disables")->capture_default_str();
  tr->add_option("--max-length", to.max_length)->capture_default_str();
  tr->add_flag("--gate-biases", to.gate_biases, "add reset/update gate biases");
  tr->add_option("--seed", to.seed)->capture_default_str();

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a trained encoder");
  ev->require_subcommand(1);
  EvalOpts eo;
  auto add_common = [&](CLI::App* c) {
    c->add_option("--model", eo.model, "checkpoint")->required();
    c->add_option("--segmenter", eo.segmenter, "segmentation model applied to all inputs");
    c->add_option("--output", eo.output, "report file (default stdout)");
  };
  auto* classify = ev->add_subcommand("classify", "MLP probe accuracy next to the all-paraphrase baseline");
  add_common(classify);
  classify->add_option("--dev", eo.dev, "annotated dev pairs")->required();
  classify->add_option("--test", eo.test, "annotated test pairs")->required();
  classify->add_option("--seed", eo.seed)->capture_default_str();
  auto* nn = ev->add_subcommand("nn", "most similar sentences to a query");
  add_common(nn);
  nn->add_option("--sentences", eo.sentences, "one sentence per line")->required();
  nn->add_option("--query", eo.query)->required();
  nn->add_option("--k", eo.k)->capture_default_str();
  auto* hist = ev->add_subcommand("hist", "histogram of similarities to a query");
  add_common(hist);
  hist->add_option("--sentences", eo.sentences, "one sentence per line")->required();
  hist->add_option("--query", eo.query)->required();
  hist->add_option("--bins", eo.bins, "number of bins (default 200)");
  hist->add_option("--bin-width", eo.bin_width, "bin width dividing 2");
  auto* grades = ev->add_subcommand("grades", "cosine similarity per annotation grade");
  add_common(grades);
  grades->add_option("--dev", eo.dev, "annotated pairs")->required();
  grades->add_option("--alpha", eo.alpha)->capture_default_str();
  auto* corr = ev->add_subcommand("corr", "Pearson and Spearman against graded similarity");
  add_common(corr);
  corr->add_option("--input", eo.input, "sentence_a<TAB>sentence_b<TAB>score")->required();

  // synth
  SynthOpts sy;
  auto* synth = app.add_subcommand("synth", "write seeded synthetic corpora");
  synth->require_subcommand(1);
  auto* synth_para = synth->add_subcommand("paraphrase", "templated synonym paraphrases: corpus.tsv, dev.tsv, test.tsv");
  synth_para->add_option("--out-dir", sy.out_dir)->required();
  synth_para->add_option("--pairs", sy.pairs)->capture_default_str();
  synth_para->add_option("--dev", sy.dev, "annotated dev pairs")->capture_default_str();
  synth_para->add_option("--test", sy.test, "annotated test pairs")->capture_default_str();
  synth_para->add_option("--test-positive", sy.test_positive, "fraction of test paraphrases")->capture_default_str();
  synth_para->add_option("--noise", sy.noise, "fraction of corpus pairs replaced by non-paraphrases")->capture_default_str();
  synth_para->add_option("--seed", sy.seed)->capture_default_str();
  auto* synth_morph = synth->add_subcommand("morph", "sentences over compositional words, one per line");
  synth_morph->add_option("--output", sy.output)->required();
  synth_morph->add_option("--sentences", sy.sentences)->capture_default_str();
  synth_morph->add_option("--seed", sy.seed)->capture_default_str();

  // replay
  std::string replay_path;
  auto* rp = app.add_subcommand("replay", "re-run a manifest and compare output digests");
  rp->add_option("manifest", replay_path)->required();

  std::vector<std::string> argv_store{"parasent"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  if (rp->parsed()) return replay(replay_path, out, err);

  RunRecord rec;
  std::string command;
  const CLI::App* leaf = nullptr;
  std::string default_manifest;
  try {
    const std::size_t threads = resolve_threads(common.threads);
    if (seg_train->parsed()) {
      command = "segment train", leaf = seg_train, default_manifest = st.output;
      cmd_segment_train(st, rec, out);
    } else if (seg_apply->parsed()) {
      command = "segment apply", leaf = seg_apply, default_manifest = sa.output;
      cmd_segment_apply(sa, rec);
    } else if (sample->parsed()) {
      command = "sample", leaf = sample, default_manifest = so.output;
      cmd_sample(so, rec, err);
    } else if (synth_para->parsed()) {
      command = "synth paraphrase", leaf = synth_para, default_manifest = (fs::path(sy.out_dir) / "synth").string();
      cmd_synth_paraphrase(sy, rec);
    } else if (synth_morph->parsed()) {
      command = "synth morph", leaf = synth_morph, default_manifest = sy.output;
      cmd_synth_morph(sy, rec);
    } else if (tr->parsed()) {
      command = "train", leaf = tr, default_manifest = to.output;
      cmd_train(to, rec, out, err);
    } else {
      default_manifest = eo.output;
      if (classify->parsed()) {
        command = "eval classify", leaf = classify;
        cmd_classify(eo, rec, out);
      } else if (nn->parsed()) {
        command = "eval nn", leaf = nn;
        cmd_nn(eo, rec, threads, out);
      } else if (hist->parsed()) {
        command = "eval hist", leaf = hist;
        cmd_hist(eo, rec, threads, out);
      } else if (grades->parsed()) {
        command = "eval grades", leaf = grades;
        cmd_grades(eo, rec, out);
      } else {
        command = "eval corr", leaf = corr;
        cmd_corr(eo, rec, out);
      }
    }

    json flags = json::object();
    collect_flags(leaf, flags);
    flags["threads"] = threads;
    json m;
    m["tool"] = "parasent";
    m["version"] = kVersion;
    m["command"] = command;
    m["argv"] = args;
    m["flags"] = flags;
    m["seeds"] = rec.seeds;
    m["inputs"] = rec.inputs;
    m["outputs"] = rec.outputs;
    if (!rec.extra.empty()) m["details"] = rec.extra;
    m["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string path = common.manifest;
    if (path.empty()) {
      path = default_manifest.empty() ? "parasent-" + command.substr(command.rfind(' ') + 1) + ".manifest.json"
                                      : default_manifest + ".manifest.json";
    }
    std::ofstream mo(path);
    if (!mo) throw InputError("cannot write manifest " + path);
    mo << m.dump(2) << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

int replay(const std::string& manifest_path, std::ostream& out, std::ostream& err) {
  json m;
  try {
    m = json::parse(read_bytes(manifest_path));
  } catch (const std::exception& e) {
    err << "error: cannot read manifest " << manifest_path << ": " << e.what() << '\n';
    return kUsage;
  }
  if (!m.contains("argv") || !m.contains("outputs")) {
    err << "error: " << manifest_path << " is not a run manifest\n";
    return kUsage;
  }
  for (const auto& in : m["inputs"]) {
    const std::string path = in["path"];
    if (!fs::exists(path) || sha256_file(path) != in["sha256"].get<std::string>()) {
      err << "error: input changed since the recorded run: " << path << '\n';
      return kUsage;
    }
  }
  auto args = strip_run_flags(m["argv"].get<std::vector<std::string>>());
  args.insert(args.end(), {"--threads", "1", "--manifest", manifest_path + ".replay.json"});
  std::ostringstream captured;
  const int code = execute(args, captured, err);
  if (code != kOk) return code;

  std::size_t compared = 0, mismatched = 0;
  for (const auto& o : m["outputs"]) {
    if (!o.value("deterministic", true)) continue;
    const std::string path = o["path"];
    const std::string digest = path == "-" ? sha256_hex(captured.str()) : sha256_file(path);
    ++compared;
    if (digest != o["sha256"].get<std::string>()) {
      ++mismatched;
      out << "differs\t" << path << '\n';
    } else {
      out << "identical\t" << path << '\n';
    }
  }
  if (mismatched) {
    err << mismatched << " of " << compared << " artifacts differ\n";
    return kReplayMismatch;
  }
  return kOk;
}

}  // namespace

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_bytes(path)); }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  return execute(args, out, err);
}

}  // namespace parasent::cli
