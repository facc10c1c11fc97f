#include "udparse/cli.h"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "udparse/bilm.h"
#include "udparse/error.h"
#include "udparse/eval.h"
#include "udparse/parser.h"
#include "udparse/segment.h"
#include "udparse/tagger.h"
#include "udparse/utf8.h"
#include "udparse/xlingual.h"

namespace udparse::cli {

namespace fs = std::filesystem;

std::vector<std::string> ExpandConfig(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::set<std::string> given;
  for (const std::string& a : args) {
    if (a.rfind("--", 0) != 0 || a == "--config") continue;
    given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos
                                                               : a.find('=') - 2));
  }
  for (size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw Error("--config needs a file name");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
      continue;
    }
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file " + path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      const std::string_view trimmed = utf8::Trim(line);
      if (trimmed.empty()) continue;
      const size_t eq = trimmed.find('=');
      if (eq == std::string_view::npos) {
        throw ParseError(line_no, path + ": expected 'key = value'");
      }
      const std::string key(utf8::Trim(trimmed.substr(0, eq)));
      const std::string value(utf8::Trim(trimmed.substr(eq + 1)));
      if (key.empty()) throw ParseError(line_no, path + ": empty key");
      if (given.count(key)) continue;
      out.push_back("--" + key + "=" + value);
    }
  }
  return out;
}

namespace {

constexpr uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr uint64_t kFnvPrime = 1099511628211ULL;

void FnvUpdate(uint64_t& h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
}

void FnvFile(uint64_t& h, const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  char buf[1 << 14];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    FnvUpdate(h, std::string_view(buf, static_cast<size_t>(in.gcount())));
  }
}

}  // namespace

uint64_t HashPath(const std::string& path) {
  uint64_t h = kFnvOffset;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(path))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      FnvUpdate(h, fs::relative(f, path).generic_string());
      FnvFile(h, f);
    }
  } else {
    FnvFile(h, path);
  }
  return h;
}

std::string DocumentText(const Treebank& tb) {
  std::string doc;
  for (const Sentence& s : tb.sentences) {
    std::string text;
    if (s.text) {
      text = *s.text;
    } else {
      for (size_t i = 0; i < s.tokens.size();) {
        const int id = s.tokens[i].id;
        auto mwt = std::find_if(s.mwts.begin(), s.mwts.end(),
                                [id](const MultiwordRange& r) { return r.start == id; });
        if (!text.empty()) text += ' ';
        if (mwt != s.mwts.end()) {
          text += mwt->form;
          i += static_cast<size_t>(mwt->end - mwt->start + 1);
        } else {
          text += s.tokens[i].form;
          ++i;
        }
      }
    }
    if (text.empty()) continue;
    if (!doc.empty()) doc += ' ';
    doc += text;
  }
  return doc;
}

ConcatDecision SelectConcat(const Treebank& train, const Treebank* dev,
                            const std::vector<Treebank>& extra, const ParserConfig& config,
                            const ConcatOptions& options) {
  auto with_extra = [&](const Treebank& base) {
    std::vector<Treebank> parts = {base};
    parts.insert(parts.end(), extra.begin(), extra.end());
    return ConcatTreebanks(parts, base.name + "+concat");
  };
  ConcatDecision d;
  if (dev) {
    const ParserModel single = TrainParser(train, *dev, config);
    const ParserModel joint = TrainParser(with_extra(train), *dev, config);
    d.single_las = 100.0 * DevLas(single, *dev);
    d.concat_las = 100.0 * DevLas(joint, *dev);
  } else {
    if (options.folds < 2) throw Error("select-concat: needs a dev set or at least 2 folds");
    double single = 0.0, joint = 0.0;
    for (size_t f = 0; f < options.folds; ++f) {
      const Split split = KFoldSplit(train, options.folds, f, options.seed);
      single += DevLas(TrainParser(split.train, split.heldout, config), split.heldout);
      joint += DevLas(TrainParser(with_extra(split.train), split.heldout, config), split.heldout);
    }
    d.single_las = 100.0 * single / static_cast<double>(options.folds);
    d.concat_las = 100.0 * joint / static_cast<double>(options.folds);
  }
  d.concat = d.gain() > options.min_gain;
  return d;
}

SplitterDecision SelectSplitter(const Treebank& gold, std::string_view raw_text,
                                SplitMode baseline, const SplitThreshold& split_threshold,
                                double threshold) {
  Segmenter seg;
  seg.split = baseline;
  seg.threshold = split_threshold;
  seg.tokenizer = TokenizerKind::kWhitespace;
  const Treebank system = SegmentText(raw_text, seg, "system");
  SplitterDecision d;
  d.baseline_f1 = 100.0 * Evaluate(gold, system).sentences.f1();
  d.use_alternative = d.baseline_f1 < threshold;
  return d;
}

namespace {

// Long option names whose values are input files or model directories; their
// contents are hashed into run manifests.
const std::set<std::string> kInputOptions = {
    "train",        "dev",       "concat",        "pretrained",      "lm",
    "unlabeled",    "char-lm",   "source",        "target",          "dict",
    "source-treebank", "source-emb", "target-emb", "map",            "target-train",
    "input",        "conllu",    "tokenizer-model", "lexicon",       "tagger",
    "parser",       "gold",      "system",        "text",            "extra",
    "target-sample", "dev-tagger"};

std::string Hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void WriteManifest(const std::string& dir, const CLI::App& sub) {
  if (dir.empty()) return;
  fs::create_directories(dir);
  std::ostringstream inputs, values;
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames()[0];
    if (name == "help" || name == "config" || name == "verbose") continue;
    std::vector<std::string> results = opt->results();
    if (results.empty()) {
      if (opt->get_items_expected_max() > 1 || opt->get_default_str().empty()) continue;
      results.push_back(opt->get_default_str());
    }
    for (const std::string& v : results) {
      values << name << " = " << v << "\n";
      if (kInputOptions.count(name) && !v.empty() && fs::exists(v)) {
        inputs << "# input " << name << " = " << v << " fnv1a64=" << Hex(HashPath(v)) << "\n";
      }
    }
  }
  std::ofstream out(dir + "/manifest.txt");
  out << "# udparse run manifest; reusable with --config\n"
      << "# command = " << sub.get_name() << "\n"
      << inputs.str() << values.str();
  if (!out) throw DataError("cannot write " + dir + "/manifest.txt");
}

Treebank ReadTreebank(const std::string& path) { return ReadConlluFile(path); }

Treebank ReadWithConcat(const std::string& path, const std::vector<std::string>& extra) {
  Treebank tb = ReadTreebank(path);
  if (extra.empty()) return tb;
  std::vector<Treebank> parts = {std::move(tb)};
  for (const std::string& p : extra) parts.push_back(ReadTreebank(p));
  return ConcatTreebanks(parts, parts[0].name + "+concat");
}

std::vector<std::string> ReadLines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool EndsWith(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// LM training corpus: CoNLL-U forms, or whitespace-separated lines.
std::vector<std::vector<std::string>> ReadLmCorpus(const std::string& path,
                                                   const std::string& granularity) {
  std::vector<std::string> lines;
  if (EndsWith(path, ".conllu")) {
    const Treebank tb = ReadTreebank(path);
    if (granularity == "word") {
      std::vector<std::vector<std::string>> corpus;
      for (const Sentence& s : tb.sentences) corpus.push_back(s.Forms());
      return corpus;
    }
    for (const Sentence& s : tb.sentences) {
      Treebank one;
      one.sentences.push_back(s);
      lines.push_back(DocumentText(one));
    }
  } else {
    lines = ReadLines(path);
  }
  if (granularity == "word") return UnitCorpus(lines, UnitKind::kSyllable);
  return UnitCorpus(lines, ParseUnitKind(granularity));
}

void AddTrainOptions(CLI::App* app, TrainOptions& o) {
  app->add_option("--epochs", o.epochs, "Maximum training epochs");
  app->add_option("--batch-size", o.batch_size, "Sentences per update");
  app->add_option("--patience", o.patience, "Dev evaluations without improvement before stopping");
  app->add_option("--target-score", o.target_score, "Stop once the dev score reaches this (ratio)");
  app->add_option("--dropout", o.dropout, "Dropout rate");
  app->add_option("--learning-rate", o.adam.learning_rate, "Adam learning rate");
  app->add_option("--beta1", o.adam.beta1, "Adam beta1");
  app->add_option("--beta2", o.adam.beta2, "Adam beta2");
  app->add_option("--clip-norm", o.adam.clip_norm, "Global gradient norm clip (<= 0 disables)");
  app->add_option("--seed", o.seed, "Random seed");
}

void AddEmbedOptions(CLI::App* app, EmbedderConfig& e, std::string& lm_mode) {
  app->add_option("--word-dim", e.dim, "Word representation width");
  app->add_option("--use-tokens", e.use_tokens, "Trainable token embeddings");
  app->add_option("--use-chars", e.use_chars, "Character BiLSTM word encoder");
  app->add_option("--use-pretrained", e.use_pretrained, "Fixed pretrained embeddings");
  app->add_option("--char-dim", e.char_dim, "Character embedding width");
  app->add_option("--char-hidden", e.char_hidden, "Character BiLSTM width per direction");
  app->add_option("--min-count", e.min_count, "Minimum frequency for the token vocabulary");
  app->add_option("--unk-replace", e.unk_replace, "Training-time <unk> replacement rate");
  app->add_option("--lm-mode", lm_mode, "Contextual vectors: none, layer0 or sum012");
  app->add_option("--elmo-dropout", e.elmo_dropout, "Dropout on projected contextual vectors");
}

struct Resources {
  std::string pretrained;
  double pretrained_keep = 0.1;
  std::string lm;

  void Add(CLI::App* app) {
    app->add_option("--pretrained", pretrained, "Pretrained embeddings (word v1 ... vd)");
    app->add_option("--pretrained-keep", pretrained_keep,
                    "Fraction of the most frequent pretrained words kept");
    app->add_option("--lm", lm, "Trained language model directory");
  }
  std::shared_ptr<const StaticEmbeddings> LoadPretrained() const {
    if (pretrained.empty()) return nullptr;
    return std::make_shared<StaticEmbeddings>(
        StaticEmbeddings::LoadFile(pretrained, pretrained_keep));
  }
  std::shared_ptr<const BiLmModel> LoadLm() const {
    if (lm.empty()) return nullptr;
    return std::make_shared<BiLmModel>(BiLmModel::Load(lm));
  }
};

void AddParserOptions(CLI::App* app, ParserConfig& c, std::string& decoder) {
  app->add_option("--tag-dim", c.tag_dim, "Tag embedding width");
  app->add_option("--hidden", c.hidden, "Sentence BiLSTM width per direction");
  app->add_option("--layers", c.layers, "Sentence BiLSTM depth");
  app->add_option("--arc-mlp", c.arc_mlp, "Arc MLP width");
  app->add_option("--rel-mlp", c.rel_mlp, "Relation MLP width");
  app->add_option("--decoder", decoder, "greedy-fix or cle");
}

SeedFilter ParseFilter(const std::vector<std::string>& names) {
  SeedFilter f;
  for (const std::string& n : names) {
    if (n == "punct" || n == "punctuation") {
      f.punctuation = true;
    } else if (n == "digits") {
      f.digits = true;
    } else if (n == "latin") {
      f.latin = true;
    } else {
      throw Error("unknown seed filter '" + n + "' (expected punct, digits or latin)");
    }
  }
  return f;
}

void PrintHistory(std::ostream& out, const std::string& metric, const TrainHistory& h) {
  out << "best_epoch=" << h.best_epoch << "\n" << metric << "=" << h.best_score << "\n";
  if (h.skipped_sentences) out << "skipped_sentences=" << h.skipped_sentences << "\n";
  if (h.unseen_dev_labels) out << "unseen_dev_labels=" << h.unseen_dev_labels << "\n";
}

}  // namespace

int Run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app("Raw text to Universal Dependencies parsing pipeline", "udparse");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", "udparse 0.1.0");

  std::vector<std::pair<CLI::App*, std::function<void(CLI::App&)>>> commands;
  bool verbose = false;
  std::string run_dir;
  auto log = [&]() -> std::ostream* { return verbose ? &err : nullptr; };
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", "Flat key = value option file");
    sub->add_flag("--verbose", verbose, "Progress on stderr");
    sub->add_option("--run-dir", run_dir, "Directory for the run manifest");
  };

  // train-lm
  BiLmConfig lm_cfg;
  std::string lm_train, lm_out, lm_granularity = "word";
  {
    CLI::App* sub = app.add_subcommand("train-lm", "Train a bidirectional language model");
    common(sub);
    sub->add_option("--train", lm_train, "CoNLL-U or plain text (one sentence per line)")->required();
    sub->add_option("--out", lm_out, "Output model directory")->required();
    sub->add_option("--granularity", lm_granularity, "word, char or syllable units");
    sub->add_option("--char-dim", lm_cfg.char_dim, "Character embedding width");
    sub->add_option("--filter-widths", lm_cfg.filter_widths, "Convolution widths")->delimiter(',');
    sub->add_option("--filters", lm_cfg.filters_per_width, "Filters per width");
    sub->add_option("--hidden", lm_cfg.hidden, "LSTM width per direction");
    sub->add_option("--layers", lm_cfg.layers, "LSTM layers");
    sub->add_option("--max-word-chars", lm_cfg.max_word_chars, "Characters read per word");
    sub->add_option("--sampled-softmax", lm_cfg.sampled_softmax, "Normalize over a rank window");
    sub->add_option("--window", lm_cfg.window, "Sampled softmax window size");
    sub->add_option("--epochs", lm_cfg.epochs, "Training epochs");
    sub->add_option("--batch-size", lm_cfg.batch_size, "Sentences per update");
    sub->add_option("--learning-rate", lm_cfg.learning_rate, "Adam learning rate");
    sub->add_option("--clip-norm", lm_cfg.clip_norm, "Gradient norm clip");
    sub->add_option("--seed", lm_cfg.seed, "Random seed");
    commands.emplace_back(sub, [&](CLI::App& self) {
      lm_cfg.verbose = verbose;
      const auto corpus = ReadLmCorpus(lm_train, lm_granularity);
      const BiLmModel model = TrainBiLm(corpus, lm_cfg);
      model.Save(lm_out);
      out << "train_perplexity=" << model.Perplexity(corpus) << "\n";
      WriteManifest(run_dir.empty() ? lm_out : run_dir, self);
    });
  }

  // train-tagger
  TaggerConfig tagger_cfg;
  std::string tg_train, tg_dev, tg_out, tg_lm_mode = "none";
  std::vector<std::string> tg_concat;
  Resources tg_res;
  {
    CLI::App* sub = app.add_subcommand("train-tagger", "Train a UPOS tagger");
    common(sub);
    sub->add_option("--train", tg_train, "Training treebank")->required();
    sub->add_option("--dev", tg_dev, "Dev treebank (defaults to the training data)");
    sub->add_option("--out", tg_out, "Output model directory")->required();
    sub->add_option("--concat", tg_concat, "Treebanks concatenated to the training data")
        ->delimiter(',');
    tg_res.Add(sub);
    AddEmbedOptions(sub, tagger_cfg.embed, tg_lm_mode);
    sub->add_option("--hidden", tagger_cfg.hidden, "BiLSTM width per direction");
    sub->add_option("--layers", tagger_cfg.layers, "BiLSTM depth");
    sub->add_option("--mlp", tagger_cfg.mlp, "MLP width");
    AddTrainOptions(sub, tagger_cfg.train);
    commands.emplace_back(sub, [&](CLI::App& self) {
      tagger_cfg.embed.lm_mode = ParseLmMode(tg_lm_mode);
      tagger_cfg.train.log = log();
      const Treebank train = ReadWithConcat(tg_train, tg_concat);
      const Treebank dev = tg_dev.empty() ? train : ReadTreebank(tg_dev);
      TrainHistory hist;
      const TaggerModel model =
          TrainTagger(train, dev, tagger_cfg, tg_res.LoadPretrained(), tg_res.LoadLm(), &hist);
      model.Save(tg_out);
      PrintHistory(out, "dev_upos", hist);
      WriteManifest(run_dir.empty() ? tg_out : run_dir, self);
    });
  }

  // train-parser
  ParserConfig parser_cfg;
  std::string pr_train, pr_dev, pr_out, pr_lm_mode = "none", pr_decoder = "greedy-fix",
                                        pr_dev_tagger;
  std::vector<std::string> pr_concat;
  Resources pr_res;
  {
    CLI::App* sub = app.add_subcommand("train-parser", "Train a biaffine dependency parser");
    common(sub);
    sub->add_option("--train", pr_train, "Training treebank")->required();
    sub->add_option("--dev", pr_dev, "Dev treebank (defaults to the training data)");
    sub->add_option("--out", pr_out, "Output model directory")->required();
    sub->add_option("--concat", pr_concat, "Treebanks concatenated to the training data")
        ->delimiter(',');
    sub->add_option("--dev-tagger", pr_dev_tagger, "Tag the dev set with this tagger first");
    pr_res.Add(sub);
    AddEmbedOptions(sub, parser_cfg.embed, pr_lm_mode);
    AddParserOptions(sub, parser_cfg, pr_decoder);
    AddTrainOptions(sub, parser_cfg.train);
    commands.emplace_back(sub, [&](CLI::App& self) {
      parser_cfg.embed.lm_mode = ParseLmMode(pr_lm_mode);
      parser_cfg.decoder = ParseDecoder(pr_decoder);
      parser_cfg.train.log = log();
      const Treebank train = ReadWithConcat(pr_train, pr_concat);
      Treebank dev = pr_dev.empty() ? train : ReadTreebank(pr_dev);
      if (!pr_dev_tagger.empty()) TaggerModel::Load(pr_dev_tagger).Tag(dev);
      TrainHistory hist;
      const ParserModel model =
          TrainParser(train, dev, parser_cfg, pr_res.LoadPretrained(), pr_res.LoadLm(), &hist);
      model.Save(pr_out);
      PrintHistory(out, "dev_las", hist);
      WriteManifest(run_dir.empty() ? pr_out : run_dir, self);
    });
  }

  // train-tokenizer
  BiesConfig bies_cfg;
  std::string tk_train, tk_dev, tk_unlabeled, tk_out, tk_char_lm, tk_unit = "char",
                                                               tk_lm_mode = "sum012";
  {
    CLI::App* sub = app.add_subcommand("train-tokenizer", "Train a BIES tokenizer ensemble");
    common(sub);
    sub->add_option("--train", tk_train, "Treebank with '# text' comments")->required();
    sub->add_option("--dev", tk_dev, "Dev treebank");
    sub->add_option("--unlabeled", tk_unlabeled, "Raw text for PMI statistics");
    sub->add_option("--out", tk_out, "Output directory (one model per member)")->required();
    sub->add_option("--char-lm", tk_char_lm, "Character language model directory");
    sub->add_option("--lm-mode", tk_lm_mode, "Character LM layers: layer0 or sum012");
    sub->add_option("--unit", tk_unit, "char, or syllable for whitespace-separated units");
    sub->add_option("--ensemble", bies_cfg.ensemble, "Number of models");
    sub->add_option("--use-pmi", bies_cfg.use_pmi, "PMI bucket features");
    sub->add_option("--pmi-buckets", bies_cfg.pmi_buckets, "PMI buckets");
    sub->add_option("--unigram-dim", bies_cfg.unigram_dim, "Character embedding width");
    sub->add_option("--bigram-dim", bies_cfg.bigram_dim, "Bigram embedding width");
    sub->add_option("--hidden", bies_cfg.hidden, "BiLSTM width per direction");
    sub->add_option("--layers", bies_cfg.layers, "BiLSTM depth");
    AddTrainOptions(sub, bies_cfg.train);
    commands.emplace_back(sub, [&](CLI::App& self) {
      bies_cfg.unit = ParseUnitKind(tk_unit);
      bies_cfg.lm_mode = ParseLmMode(tk_lm_mode);
      bies_cfg.train.log = log();
      const Treebank train = ReadTreebank(tk_train);
      std::unique_ptr<Treebank> dev;
      if (!tk_dev.empty()) dev = std::make_unique<Treebank>(ReadTreebank(tk_dev));
      const std::vector<std::string> unlabeled =
          tk_unlabeled.empty() ? std::vector<std::string>() : ReadLines(tk_unlabeled);
      std::shared_ptr<const BiLmModel> lm;
      if (!tk_char_lm.empty()) lm = std::make_shared<BiLmModel>(BiLmModel::Load(tk_char_lm));
      const std::vector<BiesModel> models = TrainBies(train, unlabeled, bies_cfg, lm, dev.get());
      for (size_t k = 0; k < models.size(); ++k) {
        models[k].Save(tk_out + "/model" + std::to_string(k));
      }
      out << "models=" << models.size() << "\n";
      WriteManifest(run_dir.empty() ? tk_out : run_dir, self);
    });
  }

  // align-embeddings
  std::string al_source, al_target, al_dict, al_out;
  double al_source_keep = 1.0, al_target_keep = 1.0;
  std::vector<std::string> al_filter;
  {
    CLI::App* sub = app.add_subcommand("align-embeddings", "Learn an orthogonal embedding map");
    common(sub);
    sub->add_option("--source", al_source, "Source-language embeddings")->required();
    sub->add_option("--target", al_target, "Target-language embeddings")->required();
    sub->add_option("--source-keep", al_source_keep, "Fraction of source words kept");
    sub->add_option("--target-keep", al_target_keep, "Fraction of target words kept");
    sub->add_option("--dict", al_dict, "Seed dictionary (two tab-separated words per line)");
    sub->add_option("--filter", al_filter, "Shared-form classes: punct, digits, latin")
        ->delimiter(',');
    sub->add_option("--out", al_out, "Output map file")->required();
    commands.emplace_back(sub, [&](CLI::App& self) {
      const StaticEmbeddings src = StaticEmbeddings::LoadFile(al_source, al_source_keep);
      const StaticEmbeddings tgt = StaticEmbeddings::LoadFile(al_target, al_target_keep);
      const SeedDictionary dict = al_dict.empty()
                                      ? BuildSeedDict(src, tgt, ParseFilter(al_filter))
                                      : ReadSeedDictionaryFile(al_dict);
      const AlignmentMap map = LearnAlignment(dict, src, tgt, &err);
      const fs::path parent = fs::path(al_out).parent_path();
      if (!parent.empty()) fs::create_directories(parent);
      std::ofstream f(al_out);
      map.Save(f);
      if (!f) throw DataError("cannot write " + al_out);
      out << "seed_pairs=" << dict.pairs.size() << "\n"
          << "orthogonality_error=" << map.OrthogonalityError() << "\n";
      WriteManifest(run_dir, self);
    });
  }

  // build-transfer
  ParserConfig tr_cfg;
  std::string tr_source_tb, tr_source_emb, tr_target_emb, tr_map, tr_target_train, tr_dev,
      tr_out, tr_decoder = "greedy-fix", tr_lm_mode = "none";
  double tr_source_keep = 1.0, tr_target_keep = 1.0;
  {
    CLI::App* sub = app.add_subcommand("build-transfer",
                                       "Train a transfer tagger and parser on mapped embeddings");
    common(sub);
    sub->add_option("--source-treebank", tr_source_tb, "Source-language treebank")->required();
    sub->add_option("--source-emb", tr_source_emb, "Source-language embeddings")->required();
    sub->add_option("--target-emb", tr_target_emb, "Target-language embeddings")->required();
    sub->add_option("--source-keep", tr_source_keep, "Fraction of source words kept");
    sub->add_option("--target-keep", tr_target_keep, "Fraction of target words kept");
    sub->add_option("--map", tr_map, "Alignment map from align-embeddings")->required();
    sub->add_option("--target-train", tr_target_train, "Small target treebank added to training");
    sub->add_option("--dev", tr_dev, "Dev treebank for early stopping");
    sub->add_option("--out", tr_out, "Output directory (tagger/ and parser/)")->required();
    AddParserOptions(sub, tr_cfg, tr_decoder);
    AddTrainOptions(sub, tr_cfg.train);
    commands.emplace_back(sub, [&](CLI::App& self) {
      tr_cfg.decoder = ParseDecoder(tr_decoder);
      tr_cfg.train.log = log();
      const Treebank source = ReadTreebank(tr_source_tb);
      const StaticEmbeddings src = StaticEmbeddings::LoadFile(tr_source_emb, tr_source_keep);
      const StaticEmbeddings tgt = StaticEmbeddings::LoadFile(tr_target_emb, tr_target_keep);
      std::ifstream mf(tr_map);
      if (!mf) throw DataError("cannot open " + tr_map);
      const AlignmentMap map = AlignmentMap::Load(mf);
      std::unique_ptr<Treebank> target_train, dev;
      if (!tr_target_train.empty()) target_train = std::make_unique<Treebank>(ReadTreebank(tr_target_train));
      if (!tr_dev.empty()) dev = std::make_unique<Treebank>(ReadTreebank(tr_dev));
      TaggerConfig tc;
      tc.hidden = tr_cfg.hidden;
      tc.layers = std::min<size_t>(tr_cfg.layers, 2);
      tc.train = tr_cfg.train;
      const TransferModels models = BuildTransferModels(source, src, tgt, map, target_train.get(),
                                                        dev.get(), tc, tr_cfg);
      models.tagger.Save(tr_out + "/tagger");
      models.parser.Save(tr_out + "/parser");
      out << "dev_upos=" << models.tagger_history.best_score << "\n"
          << "dev_las=" << models.parser_history.best_score << "\n";
      WriteManifest(run_dir.empty() ? tr_out : run_dir, self);
    });
  }

  // parse
  std::string ps_input, ps_conllu, ps_output, ps_splitter = "rules", ps_tokenizer = "pretokenized",
                                               ps_lexicon, ps_preset = "none", ps_tagger,
                                               ps_ensemble = "average", ps_decoder;
  std::vector<std::string> ps_tokenizer_models, ps_parsers;
  double ps_lexicon_keep = kThaiLexiconFraction;
  SplitThreshold ps_threshold;
  {
    CLI::App* sub = app.add_subcommand("parse", "Raw text or CoNLL-U to parsed CoNLL-U");
    common(sub);
    auto* in_opt = sub->add_option("--input", ps_input, "Raw UTF-8 text");
    auto* conllu_opt = sub->add_option("--conllu", ps_conllu, "Tokenized CoNLL-U input");
    in_opt->excludes(conllu_opt);
    sub->add_option("--output", ps_output, "Output CoNLL-U (default stdout)");
    sub->add_option("--splitter", ps_splitter, "rules or whitespace");
    sub->add_option("--min-spaces", ps_threshold.min_spaces, "Whitespace splitter: spaces per break");
    sub->add_option("--newline-breaks", ps_threshold.newline, "Whitespace splitter: newlines break");
    sub->add_option("--tokenizer", ps_tokenizer, "bies, maxmatch or pretokenized");
    sub->add_option("--tokenizer-model", ps_tokenizer_models, "BIES model directories");
    sub->add_option("--lexicon", ps_lexicon, "Frequency-ordered embeddings for maxmatch");
    sub->add_option("--lexicon-keep", ps_lexicon_keep, "Fraction of lexicon words kept");
    sub->add_option("--preset", ps_preset, "none or thai");
    sub->add_option("--tagger", ps_tagger, "Tagger model directory");
    sub->add_option("--parser", ps_parsers, "Parser model directories (several for an ensemble)");
    sub->add_option("--ensemble-mode", ps_ensemble, "average or vote");
    sub->add_option("--decoder", ps_decoder, "Override the decoder: greedy-fix or cle");
    commands.emplace_back(sub, [&](CLI::App& self) {
      Treebank tb;
      Lexicon lexicon;
      std::vector<BiesModel> bies;
      if (!ps_conllu.empty()) {
        tb = ReadTreebank(ps_conllu);
      } else {
        if (ps_input.empty()) throw Error("parse: give --input or --conllu");
        Segmenter seg;
        if (!ps_lexicon.empty()) {
          lexicon = BuildLexicon(StaticEmbeddings::LoadFile(ps_lexicon), ps_lexicon_keep);
        }
        if (ps_preset == "thai") {
          if (ps_lexicon.empty()) throw Error("parse: the thai preset needs --lexicon");
          seg = ThaiPreset(lexicon);
        } else if (ps_preset == "none") {
          seg.split = ParseSplitMode(ps_splitter);
          seg.threshold = ps_threshold;
          seg.tokenizer = ParseTokenizerKind(ps_tokenizer);
          seg.lexicon = ps_lexicon.empty() ? nullptr : &lexicon;
          for (const std::string& dir : ps_tokenizer_models) bies.push_back(BiesModel::Load(dir));
          for (const BiesModel& m : bies) seg.bies.push_back(&m);
        } else {
          throw Error("parse: unknown preset '" + ps_preset + "'");
        }
        tb = SegmentText(ReadFile(ps_input), seg, fs::path(ps_input).stem().string());
      }
      if (!ps_tagger.empty()) TaggerModel::Load(ps_tagger).Tag(tb);
      if (!ps_parsers.empty()) {
        std::vector<ParserModel> parsers;
        for (const std::string& dir : ps_parsers) {
          parsers.push_back(ParserModel::Load(dir));
          if (!ps_decoder.empty()) parsers.back().set_decoder(ParseDecoder(ps_decoder));
        }
        if (parsers.size() == 1) {
          parsers[0].ParseTreebank(tb);
        } else {
          std::vector<const ParserModel*> ptrs;
          for (const ParserModel& p : parsers) ptrs.push_back(&p);
          EnsembleParseTreebank(ptrs, tb, ParseEnsembleMode(ps_ensemble));
        }
      }
      if (ps_output.empty()) {
        WriteConllu(tb, out);
      } else {
        const fs::path parent = fs::path(ps_output).parent_path();
        if (!parent.empty()) fs::create_directories(parent);
        std::ofstream f(ps_output, std::ios::binary);
        WriteConllu(tb, f);
        if (!f) throw DataError("cannot write " + ps_output);
      }
      WriteManifest(run_dir, self);
    });
  }

  // evaluate
  std::string ev_gold, ev_system, ev_format = "both";
  {
    CLI::App* sub = app.add_subcommand("evaluate", "Score system CoNLL-U against gold");
    common(sub);
    sub->add_option("--gold", ev_gold, "Gold treebank")->required();
    sub->add_option("--system", ev_system, "System treebank")->required();
    sub->add_option("--format", ev_format, "table, kv or both");
    commands.emplace_back(sub, [&](CLI::App& self) {
      const EvalReport report = Evaluate(ReadTreebank(ev_gold), ReadTreebank(ev_system));
      if (ev_format == "table" || ev_format == "both") out << FormatReportTable(report);
      if (ev_format == "kv" || ev_format == "both") out << FormatReportKeyValue(report);
      if (ev_format != "table" && ev_format != "kv" && ev_format != "both") {
        throw Error("evaluate: unknown format '" + ev_format + "'");
      }
      WriteManifest(run_dir, self);
    });
  }

  // select-concat
  ParserConfig sc_cfg;
  std::string sc_train, sc_dev, sc_decoder = "greedy-fix", sc_lm_mode = "none";
  std::vector<std::string> sc_extra;
  ConcatOptions sc_opts;
  {
    CLI::App* sub = app.add_subcommand("select-concat",
                                       "Decide whether treebank concatenation helps");
    common(sub);
    sub->add_option("--train", sc_train, "Target treebank")->required();
    sub->add_option("--dev", sc_dev, "Dev treebank; without it k-fold cross-validation is used");
    sub->add_option("--extra", sc_extra, "Treebanks to concatenate")->required()->delimiter(',');
    sub->add_option("--folds", sc_opts.folds, "Cross-validation folds");
    sub->add_option("--min-gain", sc_opts.min_gain, "LAS points concatenation must add");
    AddEmbedOptions(sub, sc_cfg.embed, sc_lm_mode);
    AddParserOptions(sub, sc_cfg, sc_decoder);
    AddTrainOptions(sub, sc_cfg.train);
    commands.emplace_back(sub, [&](CLI::App& self) {
      sc_cfg.embed.lm_mode = ParseLmMode(sc_lm_mode);
      sc_cfg.decoder = ParseDecoder(sc_decoder);
      sc_cfg.train.log = log();
      sc_opts.seed = sc_cfg.train.seed;
      const Treebank train = ReadTreebank(sc_train);
      std::vector<Treebank> extra;
      for (const std::string& p : sc_extra) extra.push_back(ReadTreebank(p));
      std::unique_ptr<Treebank> dev;
      if (!sc_dev.empty()) dev = std::make_unique<Treebank>(ReadTreebank(sc_dev));
      const ConcatDecision d = SelectConcat(train, dev.get(), extra, sc_cfg, sc_opts);
      out << "single_las=" << d.single_las << "\n"
          << "concat_las=" << d.concat_las << "\n"
          << "gain=" << d.gain() << "\n"
          << "decision=" << d.decision() << "\n";
      WriteManifest(run_dir, self);
    });
  }

  // select-splitter
  std::string ss_gold, ss_text, ss_baseline = "rules", ss_alternative = "joint";
  double ss_threshold = 95.0;
  SplitThreshold ss_split;
  {
    CLI::App* sub = app.add_subcommand("select-splitter",
                                       "Compare a splitter's sentence F1 against a threshold");
    common(sub);
    sub->add_option("--gold", ss_gold, "Gold dev treebank")->required();
    sub->add_option("--text", ss_text, "Raw dev text (default: sentence texts joined by spaces)");
    sub->add_option("--baseline", ss_baseline, "Baseline splitter: rules or whitespace");
    sub->add_option("--alternative", ss_alternative, "Name reported when the baseline is rejected");
    sub->add_option("--threshold", ss_threshold, "Sentence F1 threshold (percent)");
    sub->add_option("--min-spaces", ss_split.min_spaces, "Whitespace splitter: spaces per break");
    commands.emplace_back(sub, [&](CLI::App& self) {
      const Treebank gold = ReadTreebank(ss_gold);
      const std::string text = ss_text.empty() ? DocumentText(gold) : ReadFile(ss_text);
      const SplitterDecision d =
          SelectSplitter(gold, text, ParseSplitMode(ss_baseline), ss_split, ss_threshold);
      out << "baseline_sentence_f1=" << d.baseline_f1 << "\n"
          << "decision=" << (d.use_alternative ? ss_alternative : ss_baseline) << "\n";
      WriteManifest(run_dir, self);
    });
  }

  // select-source
  ParserConfig so_cfg;
  std::string so_sample, so_target_emb, so_decoder = "greedy-fix", so_lm_mode = "none";
  double so_keep = 1.0;
  std::vector<std::string> so_candidates, so_filter;
  {
    CLI::App* sub = app.add_subcommand("select-source", "Rank transfer source languages");
    common(sub);
    sub->add_option("--target-sample", so_sample, "Gold target treebank sample")->required();
    sub->add_option("--target-emb", so_target_emb, "Target embeddings")->required();
    sub->add_option("--target-keep", so_keep, "Fraction of target words kept");
    sub->add_option("--candidate", so_candidates, "name=treebank,embeddings")->required();
    sub->add_option("--filter", so_filter, "Shared-form classes: punct, digits, latin")
        ->delimiter(',');
    AddParserOptions(sub, so_cfg, so_decoder);
    AddTrainOptions(sub, so_cfg.train);
    commands.emplace_back(sub, [&](CLI::App& self) {
      so_cfg.decoder = ParseDecoder(so_decoder);
      so_cfg.train.log = log();
      const Treebank sample = ReadTreebank(so_sample);
      const StaticEmbeddings tgt = StaticEmbeddings::LoadFile(so_target_emb, so_keep);
      std::vector<Treebank> treebanks;
      std::vector<StaticEmbeddings> tables;
      std::vector<std::string> names;
      for (const std::string& c : so_candidates) {
        const size_t eq = c.find('=');
        const size_t comma = c.find(',', eq == std::string::npos ? 0 : eq);
        if (eq == std::string::npos || comma == std::string::npos) {
          throw Error("select-source: candidate must look like name=treebank,embeddings");
        }
        names.push_back(c.substr(0, eq));
        treebanks.push_back(ReadTreebank(c.substr(eq + 1, comma - eq - 1)));
        tables.push_back(StaticEmbeddings::LoadFile(c.substr(comma + 1)));
      }
      std::vector<SourceCandidate> cands;
      for (size_t i = 0; i < names.size(); ++i) cands.push_back({names[i], &treebanks[i], &tables[i]});
      const auto ranked = SelectSource(cands, sample, tgt, so_cfg, ParseFilter(so_filter));
      for (size_t r = 0; r < ranked.size(); ++r) {
        out << "rank=" << r + 1 << " name=" << ranked[r].name << " las=" << 100.0 * ranked[r].las
            << "\n";
      }
      WriteManifest(run_dir, self);
    });
  }

  std::vector<std::string> args;
  try {
    args = ExpandConfig(raw_args);
  } catch (const DataError& e) {
    err << "udparse: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    err << "udparse: " << e.what() << "\n";
    return kExitUsage;
  }
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "udparse: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    for (auto& [sub, fn] : commands) {
      if (sub->parsed()) fn(*sub);
    }
  } catch (const VersionError& e) {
    err << "udparse: " << e.what() << "\n";
    return kExitVersion;
  } catch (const DataError& e) {
    err << "udparse: " << e.what() << "\n";
    return kExitData;
  } catch (const DimensionError& e) {
    err << "udparse: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "udparse: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    err << "udparse: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "udparse: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace udparse::cli
