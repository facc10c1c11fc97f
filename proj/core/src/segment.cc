#include "udparse/segment.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <ostream>

#include "udparse/error.h"
#include "udparse/utf8.h"

namespace udparse {

using json = nlohmann::json;

namespace {

constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();

bool IsTerminal(std::string_view c) {
  return c == "." || c == "!" || c == "?" || c == "\xE2\x80\xA6" || c == "\xE3\x80\x82" ||
         c == "\xEF\xBC\x81" || c == "\xEF\xBC\x9F";
}

// Full-width terminators end a sentence even without following whitespace.
bool IsWideTerminal(std::string_view c) {
  return c == "\xE3\x80\x82" || c == "\xEF\xBC\x81" || c == "\xEF\xBC\x9F";
}

bool IsCloser(std::string_view c) {
  return c == "\"" || c == "'" || c == ")" || c == "]" || c == "\xE2\x80\x9D" ||
         c == "\xE2\x80\x99" || c == "\xE3\x80\x8D" || c == "\xE3\x80\x8F";
}

bool IsLowerAscii(std::string_view c) {
  return c.size() == 1 && std::islower(static_cast<unsigned char>(c[0])) != 0;
}

}  // namespace

SplitMode ParseSplitMode(const std::string& name) {
  if (name == "rules") return SplitMode::kRules;
  if (name == "whitespace") return SplitMode::kWhitespace;
  throw Error("unknown splitter '" + name + "' (expected rules or whitespace)");
}

std::string SplitModeName(SplitMode mode) {
  return mode == SplitMode::kRules ? "rules" : "whitespace";
}

std::vector<TextSpan> SplitSentences(std::string_view text, SplitMode mode,
                                     const SplitThreshold& threshold) {
  const std::vector<utf8::Char> chars = utf8::Split(text);
  std::vector<TextSpan> spans;
  size_t begin = std::string::npos, end = 0;
  auto flush = [&] {
    if (begin != std::string::npos) spans.emplace_back(begin, end);
    begin = std::string::npos;
  };
  size_t i = 0;
  while (i < chars.size()) {
    if (utf8::IsSpace(chars[i].text)) {
      size_t spaces = 0, newlines = 0;
      while (i < chars.size() && utf8::IsSpace(chars[i].text)) {
        if (utf8::IsNewline(chars[i].text)) {
          // "\r\n" counts as one line break.
          if (!(chars[i].text == "\n" && i > 0 && chars[i - 1].text == "\r")) ++newlines;
        } else {
          ++spaces;
        }
        ++i;
      }
      if (mode == SplitMode::kWhitespace) {
        if ((threshold.newline && newlines > 0) || spaces >= threshold.min_spaces) flush();
      } else if (newlines >= 2) {
        flush();  // blank line
      }
      continue;
    }
    if (begin == std::string::npos) begin = chars[i].begin;
    end = chars[i].end;
    if (mode == SplitMode::kRules && IsTerminal(chars[i].text)) {
      bool wide = IsWideTerminal(chars[i].text);
      ++i;
      while (i < chars.size() && (IsTerminal(chars[i].text) || IsCloser(chars[i].text))) {
        wide = wide || IsWideTerminal(chars[i].text);
        end = chars[i].end;
        ++i;
      }
      if (i == chars.size()) break;
      if (wide) {
        flush();
      } else if (utf8::IsSpace(chars[i].text)) {
        size_t j = i;
        while (j < chars.size() && utf8::IsSpace(chars[j].text)) ++j;
        if (j == chars.size() || !IsLowerAscii(chars[j].text)) flush();
      }
      continue;
    }
    ++i;
  }
  flush();
  return spans;
}

char BiesChar(Bies b) { return "BIES"[b]; }

std::vector<Bies> BiesEncode(const std::vector<size_t>& token_lengths) {
  std::vector<Bies> labels;
  for (size_t len : token_lengths) {
    if (len == 0) throw Error("bies_encode: empty token");
    if (len == 1) {
      labels.push_back(kS);
      continue;
    }
    labels.push_back(kB);
    for (size_t k = 1; k + 1 < len; ++k) labels.push_back(kI);
    labels.push_back(kE);
  }
  return labels;
}

namespace {

bool Allowed(int prev, int next) {
  // prev < 0 marks the start of the sequence.
  const bool opens = next == kB || next == kS;
  if (prev < 0 || prev == kE || prev == kS) return opens;
  return !opens;
}

}  // namespace

std::vector<Bies> BiesViterbi(const Tensor& scores, const std::vector<bool>* boundary_after) {
  const size_t n = scores.size() == 0 ? 0 : scores.rows();
  if (n == 0) return {};
  if (scores.cols() != kBiesLabels) throw DimensionError("bies_decode: scores must be n x 4");
  if (boundary_after && boundary_after->size() != n) {
    throw DimensionError("bies_decode: boundary mask length differs from scores");
  }
  auto permitted = [&](size_t i, int label) {
    const bool closes = label == kE || label == kS;
    if (i + 1 == n && !closes) return false;
    if (boundary_after && (*boundary_after)[i] && !closes) return false;
    return true;
  };
  std::vector<std::array<Real, kBiesLabels>> best(n);
  std::vector<std::array<int, kBiesLabels>> back(n);
  for (int l = 0; l < static_cast<int>(kBiesLabels); ++l) {
    best[0][l] = Allowed(-1, l) && permitted(0, l) ? scores.at(0, l) : kNegInf;
    back[0][l] = -1;
  }
  for (size_t i = 1; i < n; ++i) {
    for (int l = 0; l < static_cast<int>(kBiesLabels); ++l) {
      best[i][l] = kNegInf;
      back[i][l] = -1;
      if (!permitted(i, l)) continue;
      for (int p = 0; p < static_cast<int>(kBiesLabels); ++p) {
        if (!Allowed(p, l) || best[i - 1][p] == kNegInf) continue;
        const Real v = best[i - 1][p] + scores.at(i, l);
        if (back[i][l] < 0 || v > best[i][l]) {
          best[i][l] = v;
          back[i][l] = p;
        }
      }
    }
  }
  int last = -1;
  for (int l = 0; l < static_cast<int>(kBiesLabels); ++l) {
    if (best[n - 1][l] == kNegInf) continue;
    if (last < 0 || best[n - 1][l] > best[n - 1][last]) last = l;
  }
  if (last < 0) throw NumericError("bies_decode: no valid label path (non-finite scores?)");
  std::vector<Bies> labels(n);
  for (size_t i = n; i-- > 0;) {
    labels[i] = static_cast<Bies>(last);
    last = back[i][last];
  }
  return labels;
}

bool IsValidBies(const std::vector<Bies>& labels) {
  int prev = -1;
  for (Bies b : labels) {
    if (!Allowed(prev, b)) return false;
    prev = b;
  }
  return labels.empty() || prev == kE || prev == kS;
}

std::vector<TextSpan> BiesDecode(const std::vector<Bies>& labels) {
  std::vector<Bies> valid = labels;
  if (!IsValidBies(labels)) {
    Tensor scores({labels.size(), kBiesLabels}, -1.0);
    for (size_t i = 0; i < labels.size(); ++i) scores.at(i, labels[i]) = 0.0;
    valid = BiesViterbi(scores);
  }
  std::vector<TextSpan> spans;
  size_t start = 0;
  for (size_t i = 0; i < valid.size(); ++i) {
    if (valid[i] == kB || valid[i] == kS) start = i;
    if (valid[i] == kE || valid[i] == kS) spans.emplace_back(start, i + 1);
  }
  return spans;
}

UnitKind ParseUnitKind(const std::string& name) {
  if (name == "char") return UnitKind::kChar;
  if (name == "syllable") return UnitKind::kSyllable;
  throw Error("unknown segmentation unit '" + name + "' (expected char or syllable)");
}

std::string UnitKindName(UnitKind kind) { return kind == UnitKind::kChar ? "char" : "syllable"; }

std::vector<Unit> SplitUnits(std::string_view text, UnitKind kind) {
  const std::vector<utf8::Char> chars = utf8::Split(text);
  std::vector<Unit> units;
  bool after_space = true;
  for (size_t i = 0; i < chars.size(); ++i) {
    if (utf8::IsSpace(chars[i].text)) {
      after_space = true;
      if (!units.empty()) units.back().space_after = true;
      continue;
    }
    if (kind == UnitKind::kSyllable && !after_space) {
      Unit& u = units.back();
      u.end = chars[i].end;
      u.text = std::string(text.substr(u.begin, u.end - u.begin));
      continue;
    }
    Unit u;
    u.text = std::string(chars[i].text);
    u.begin = chars[i].begin;
    u.end = chars[i].end;
    u.space_before = after_space;
    units.push_back(std::move(u));
    after_space = false;
  }
  if (!units.empty()) units.back().space_after = true;
  return units;
}

std::vector<size_t> GoldTokenLengths(const Sentence& s, UnitKind kind) {
  if (!s.text) throw DataError("segmentation: sentence has no raw text, spans cannot be derived");
  const std::vector<Unit> units = SplitUnits(*s.text, kind);
  std::vector<std::string> surface;
  for (size_t i = 0; i < s.tokens.size();) {
    const int id = s.tokens[i].id;
    auto mwt = std::find_if(s.mwts.begin(), s.mwts.end(),
                            [id](const MultiwordRange& r) { return r.start == id; });
    if (mwt != s.mwts.end()) {
      surface.push_back(mwt->form);
      i += static_cast<size_t>(mwt->end - mwt->start + 1);
    } else {
      surface.push_back(s.tokens[i].form);
      ++i;
    }
  }
  std::vector<size_t> lengths;
  size_t pos = 0;
  for (const std::string& form : surface) {
    const std::vector<Unit> pieces = SplitUnits(form, kind);
    if (pieces.empty()) throw DataError("segmentation: empty token form");
    for (const Unit& p : pieces) {
      if (pos >= units.size() || units[pos].text != p.text) {
        throw DataError("segmentation: token '" + form + "' does not match the raw text '" +
                        *s.text + "'");
      }
      ++pos;
    }
    lengths.push_back(pieces.size());
  }
  if (pos != units.size()) {
    throw DataError("segmentation: raw text '" + *s.text + "' has characters outside tokens");
  }
  return lengths;
}

PmiTable PmiTable::Fit(const std::vector<std::vector<std::string>>& sequences, size_t buckets) {
  if (buckets == 0) throw Error("pmi: bucket count must be positive");
  std::map<std::string, double> unigram;
  std::map<std::pair<std::string, std::string>, double> bigram;
  double n1 = 0, n2 = 0;
  for (const auto& seq : sequences) {
    for (size_t i = 0; i < seq.size(); ++i) {
      unigram[seq[i]] += 1;
      n1 += 1;
      if (i + 1 < seq.size()) {
        bigram[{seq[i], seq[i + 1]}] += 1;
        n2 += 1;
      }
    }
  }
  PmiTable t;
  t.buckets_ = buckets;
  const double v = static_cast<double>(unigram.size());
  const double b = static_cast<double>(bigram.size());
  std::vector<double> values;
  for (const auto& [key, count] : bigram) {
    const double pab = (count + 1) / (n2 + b);
    const double pa = (unigram[key.first] + 1) / (n1 + v);
    const double pb = (unigram[key.second] + 1) / (n1 + v);
    const double pmi = std::log(pab / (pa * pb));
    t.pmi_[key] = pmi;
    values.push_back(pmi);
  }
  std::sort(values.begin(), values.end());
  if (!values.empty()) {
    for (size_t k = 1; k < buckets; ++k) t.boundaries_.push_back(values[k * values.size() / buckets]);
  }
  return t;
}

std::optional<double> PmiTable::Pmi(const std::string& a, const std::string& b) const {
  auto it = pmi_.find({a, b});
  if (it == pmi_.end()) return std::nullopt;
  return it->second;
}

size_t PmiTable::Bucket(const std::string& a, const std::string& b) const {
  const std::optional<double> v = Pmi(a, b);
  if (!v) return 0;
  return static_cast<size_t>(std::upper_bound(boundaries_.begin(), boundaries_.end(), *v) -
                             boundaries_.begin());
}

json PmiTable::ToJson() const {
  json entries = json::array();
  for (const auto& [key, v] : pmi_) entries.push_back({key.first, key.second, v});
  return {{"buckets", buckets_}, {"boundaries", boundaries_}, {"entries", entries}};
}

PmiTable PmiTable::FromJson(const json& j) {
  PmiTable t;
  t.buckets_ = j.at("buckets");
  t.boundaries_ = j.at("boundaries").get<std::vector<double>>();
  for (const json& e : j.at("entries")) t.pmi_[{e.at(0), e.at(1)}] = e.at(2).get<double>();
  return t;
}

namespace {

constexpr const char* kEdge = "<edge>";

std::string BigramKey(const std::string& a, const std::string& b) { return a + "\t" + b; }

json BiesConfigToJson(const BiesConfig& c) {
  return {{"unit", UnitKindName(c.unit)},
          {"unigram_dim", c.unigram_dim},
          {"bigram_dim", c.bigram_dim},
          {"pmi_dim", c.pmi_dim},
          {"pmi_buckets", c.pmi_buckets},
          {"space_dim", c.space_dim},
          {"lm_dim", c.lm_dim},
          {"use_pmi", c.use_pmi},
          {"lm_mode", LmModeName(c.lm_mode)},
          {"hidden", c.hidden},
          {"layers", c.layers},
          {"ensemble", c.ensemble},
          {"train", TrainOptionsToJson(c.train)}};
}

BiesConfig BiesConfigFromJson(const json& j) {
  BiesConfig c;
  c.unit = ParseUnitKind(j.at("unit"));
  c.unigram_dim = j.at("unigram_dim");
  c.bigram_dim = j.at("bigram_dim");
  c.pmi_dim = j.at("pmi_dim");
  c.pmi_buckets = j.at("pmi_buckets");
  c.space_dim = j.at("space_dim");
  c.lm_dim = j.at("lm_dim");
  c.use_pmi = j.at("use_pmi");
  c.lm_mode = ParseLmMode(j.at("lm_mode"));
  c.hidden = j.at("hidden");
  c.layers = j.at("layers");
  c.ensemble = j.at("ensemble");
  c.train = TrainOptionsFromJson(j.at("train"));
  return c;
}

}  // namespace

void BiesModel::Declare(Rng& rng) {
  const BiesConfig& c = config_;
  size_t in = c.unigram_dim + 2 * c.bigram_dim + c.space_dim;
  unigram_table_ = &params_.Add("bies.unigrams", {unigrams_.size(), c.unigram_dim},
                                Init::kNormal, rng);
  bigram_table_ =
      &params_.Add("bies.bigrams", {bigrams_.size(), c.bigram_dim}, Init::kNormal, rng);
  space_table_ = &params_.Add("bies.space", {4, c.space_dim}, Init::kNormal, rng);
  if (pmi_) {
    pmi_table_ = &params_.Add("bies.pmi", {pmi_->buckets(), c.pmi_dim}, Init::kNormal, rng);
    in += 2 * c.pmi_dim;
  }
  if (char_lm_ && c.lm_mode != LmMode::kNone) {
    lm_projection_ =
        nn::Dense::Create(params_, "bies.lm", char_lm_->output_dim(), c.lm_dim, rng);
    in += c.lm_dim;
  }
  bilstm_ = nn::BiLstm::Create(params_, "bies.lstm", in, c.hidden, c.layers, rng);
  output_ = nn::Dense::Create(params_, "bies.out", bilstm_.output_dim(in), kBiesLabels, rng);
}

BiesModel BiesModel::Create(const BiesConfig& config,
                            const std::vector<std::vector<Unit>>& training_units,
                            std::shared_ptr<const PmiTable> pmi,
                            std::shared_ptr<const BiLmModel> char_lm, uint64_t seed) {
  BiesModel m;
  m.config_ = config;
  m.seed_ = seed;
  m.pmi_ = config.use_pmi ? std::move(pmi) : nullptr;
  m.char_lm_ = std::move(char_lm);
  m.unigrams_.Add("<unk>");
  m.bigrams_.Add("<unk>");
  for (const auto& units : training_units) {
    for (size_t i = 0; i < units.size(); ++i) {
      m.unigrams_.Add(units[i].text);
      m.bigrams_.Add(BigramKey(i == 0 ? kEdge : units[i - 1].text, units[i].text));
    }
    if (!units.empty()) m.bigrams_.Add(BigramKey(units.back().text, kEdge));
  }
  Rng rng(seed);
  m.Declare(rng);
  return m;
}

Tensor BiesModel::Context(const std::vector<Unit>& units) const {
  if (!char_lm_ || config_.lm_mode == LmMode::kNone || units.empty()) return Tensor();
  std::vector<std::string> texts;
  for (const Unit& u : units) texts.push_back(u.text);
  return char_lm_->Contextualize(texts, config_.lm_mode);
}

Var BiesModel::Scores(Tape& tape, const std::vector<Unit>& units, const Tensor* context,
                      Rng* /*rng*/) const {
  const size_t n = units.size();
  std::vector<size_t> uni(n), left(n), right(n), pmi_left(n), pmi_right(n), space(n);
  for (size_t i = 0; i < n; ++i) {
    const std::string& prev = i == 0 ? std::string(kEdge) : units[i - 1].text;
    const std::string& next = i + 1 == n ? std::string(kEdge) : units[i + 1].text;
    uni[i] = unigrams_.Get(units[i].text, 0);
    left[i] = bigrams_.Get(BigramKey(prev, units[i].text), 0);
    right[i] = bigrams_.Get(BigramKey(units[i].text, next), 0);
    if (pmi_) {
      pmi_left[i] = i == 0 ? 0 : pmi_->Bucket(prev, units[i].text);
      pmi_right[i] = i + 1 == n ? 0 : pmi_->Bucket(units[i].text, next);
    }
    space[i] = (units[i].space_before ? 2 : 0) + (units[i].space_after ? 1 : 0);
  }
  std::vector<Var> parts = {tape.Lookup(*unigram_table_, uni),
                            tape.Lookup(*bigram_table_, left),
                            tape.Lookup(*bigram_table_, right),
                            tape.Lookup(*space_table_, space)};
  if (pmi_) {
    parts.push_back(tape.Lookup(*pmi_table_, pmi_left));
    parts.push_back(tape.Lookup(*pmi_table_, pmi_right));
  }
  if (lm_projection_.weight) {
    const Var ctx = context && context->size() ? tape.Constant(*context)
                                               : tape.Constant(Context(units));
    parts.push_back(lm_projection_.Apply(tape, ctx));
  }
  const double dropout = config_.train.dropout;
  const Var x = tape.Dropout(tape.Concat(parts), dropout);
  return output_.Apply(tape, bilstm_.Run(tape, x, dropout));
}

Tensor BiesModel::Probabilities(const std::vector<Unit>& units, const Tensor* context) const {
  if (units.empty()) return Tensor::Zeros(0, kBiesLabels);
  Tape tape(false);
  return tape.value(tape.Softmax(Scores(tape, units, context, nullptr)));
}

void BiesModel::Save(const std::string& dir) const {
  json meta = {{"format_version", kFormatVersion},
               {"kind", "bies"},
               {"config", BiesConfigToJson(config_)},
               {"seed", seed_},
               {"unigrams", unigrams_.items()},
               {"bigrams", bigrams_.items()},
               {"has_lm", char_lm_ != nullptr}};
  if (pmi_) meta["pmi"] = pmi_->ToJson();
  WriteModelFiles(dir, meta, params_);
  if (char_lm_) char_lm_->Save(dir + "/lm");
}

BiesModel BiesModel::Load(const std::string& dir) {
  const json meta = ReadModelJson(dir, "bies", kFormatVersion);
  BiesModel m;
  m.config_ = BiesConfigFromJson(meta.at("config"));
  m.seed_ = meta.at("seed");
  m.unigrams_ = Vocab(meta.at("unigrams").get<std::vector<std::string>>());
  m.bigrams_ = Vocab(meta.at("bigrams").get<std::vector<std::string>>());
  if (meta.contains("pmi")) m.pmi_ = std::make_shared<PmiTable>(PmiTable::FromJson(meta["pmi"]));
  m.char_lm_ = LoadLm(dir, meta);
  Rng rng(m.seed_);
  m.Declare(rng);
  ReadModelParams(dir, m.params_);
  return m;
}

std::vector<std::vector<std::string>> UnitCorpus(const std::vector<std::string>& texts,
                                                 UnitKind kind) {
  std::vector<std::vector<std::string>> out;
  for (const std::string& t : texts) {
    std::vector<std::string> seq;
    for (const Unit& u : SplitUnits(t, kind)) seq.push_back(u.text);
    if (!seq.empty()) out.push_back(std::move(seq));
  }
  return out;
}

namespace {

struct BiesExample {
  std::vector<Unit> units;
  std::vector<size_t> labels;
};

std::vector<BiesExample> MakeExamples(const Treebank& tb, UnitKind kind) {
  std::vector<BiesExample> out;
  for (const Sentence& s : tb.sentences) {
    if (s.tokens.empty()) continue;
    BiesExample ex;
    if (!s.text) throw DataError("train_bies: sentence without raw text (spans missing)");
    ex.units = SplitUnits(*s.text, kind);
    for (Bies b : BiesEncode(GoldTokenLengths(s, kind))) ex.labels.push_back(b);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

std::vector<BiesModel> TrainBies(const Treebank& gold, const std::vector<std::string>& unlabeled,
                                 const BiesConfig& config,
                                 std::shared_ptr<const BiLmModel> char_lm, const Treebank* dev) {
  const std::vector<BiesExample> train = MakeExamples(gold, config.unit);
  if (train.empty()) throw DataError("train_bies: empty training set");
  const std::vector<BiesExample> dev_examples = dev ? MakeExamples(*dev, config.unit) : train;
  std::shared_ptr<const PmiTable> pmi;
  if (config.use_pmi) {
    std::vector<std::vector<std::string>> corpus = UnitCorpus(unlabeled, config.unit);
    if (corpus.empty()) {
      for (const BiesExample& ex : train) {
        std::vector<std::string> seq;
        for (const Unit& u : ex.units) seq.push_back(u.text);
        corpus.push_back(std::move(seq));
      }
    }
    pmi = std::make_shared<PmiTable>(PmiTable::Fit(corpus, config.pmi_buckets));
  }
  std::vector<std::vector<Unit>> unit_lists;
  for (const BiesExample& ex : train) unit_lists.push_back(ex.units);

  std::vector<BiesModel> models;
  const TrainOptions& opt = config.train;
  for (size_t k = 0; k < std::max<size_t>(1, config.ensemble); ++k) {
    BiesModel model = BiesModel::Create(config, unit_lists, pmi, char_lm, opt.seed + k);
    std::vector<Tensor> train_ctx, dev_ctx;
    for (const BiesExample& ex : train) train_ctx.push_back(model.Context(ex.units));
    for (const BiesExample& ex : dev_examples) dev_ctx.push_back(model.Context(ex.units));
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(opt.seed + k + 1000);
    Adam adam(opt.adam);
    std::vector<Tensor> best = model.params().Snapshot();
    double best_score = -1;
    size_t stale = 0;
    const size_t batch = std::max<size_t>(1, opt.batch_size);
    for (size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
      rng.Shuffle(order);
      for (size_t start = 0; start < order.size(); start += batch) {
        Tape tape(true, &rng);
        std::vector<Var> losses;
        size_t count = 0;
        for (size_t b = start; b < std::min(order.size(), start + batch); ++b) {
          const BiesExample& ex = train[order[b]];
          const Var scores = model.Scores(tape, ex.units, &train_ctx[order[b]], &rng);
          losses.push_back(tape.SoftmaxCrossEntropy(scores, ex.labels));
          count += ex.labels.size();
        }
        tape.Backward(tape.Scale(tape.AddN(losses), 1.0 / static_cast<double>(count)));
        adam.Step(model.params());
      }
      size_t total = 0, correct = 0;
      for (size_t i = 0; i < dev_examples.size(); ++i) {
        const Tensor p = model.Probabilities(dev_examples[i].units, &dev_ctx[i]);
        for (size_t r = 0; r < p.rows(); ++r) {
          const auto row = p.row(r);
          const size_t arg = static_cast<size_t>(std::max_element(row.begin(), row.end()) -
                                                 row.begin());
          ++total;
          correct += arg == dev_examples[i].labels[r];
        }
      }
      const double score = total ? static_cast<double>(correct) / total : 0.0;
      if (opt.log) *opt.log << "bies model " << k << " epoch " << epoch << " dev_label_acc " << score << "\n";
      if (score > best_score) {
        best_score = score;
        best = model.params().Snapshot();
        stale = 0;
      } else if (++stale >= opt.patience) {
        break;
      }
      if (best_score >= opt.target_score) break;
    }
    model.params().Restore(best);
    models.push_back(std::move(model));
  }
  return models;
}

std::vector<TextSpan> BiesTokenize(const std::vector<const BiesModel*>& models,
                                   std::string_view text) {
  if (models.empty()) throw Error("bies_tokenize: no models");
  const UnitKind kind = models[0]->config().unit;
  for (const BiesModel* m : models) {
    if (m->config().unit != kind) throw Error("bies_tokenize: models disagree on the unit");
  }
  const std::vector<Unit> units = SplitUnits(text, kind);
  if (units.empty()) return {};
  Tensor mean = Tensor::Zeros(units.size(), kBiesLabels);
  for (const BiesModel* m : models) {
    const Tensor p = m->Probabilities(units);
    for (size_t k = 0; k < p.size(); ++k) mean[k] += p[k];
  }
  for (size_t k = 0; k < mean.size(); ++k) {
    mean[k] = std::log(std::max(mean[k] / static_cast<Real>(models.size()), 1e-300));
  }
  std::vector<bool> boundary(units.size(), false);
  if (kind == UnitKind::kChar) {
    for (size_t i = 0; i < units.size(); ++i) boundary[i] = units[i].space_after;
  }
  std::vector<TextSpan> spans;
  for (const TextSpan& s : BiesDecode(BiesViterbi(mean, &boundary))) {
    spans.emplace_back(units[s.first].begin, units[s.second - 1].end);
  }
  return spans;
}

void Lexicon::Add(const std::string& word) {
  if (word.empty()) return;
  words.insert(word);
  max_length = std::max(max_length, utf8::Length(word));
}

Lexicon BuildLexicon(const std::vector<std::string>& words_by_frequency, double keep_fraction) {
  if (keep_fraction < 0.0 || keep_fraction > 1.0) {
    throw Error("build_lexicon: keep fraction must lie in [0, 1]");
  }
  const size_t keep = static_cast<size_t>(
      std::llround(keep_fraction * static_cast<double>(words_by_frequency.size())));
  Lexicon lex;
  for (size_t i = 0; i < keep; ++i) lex.Add(words_by_frequency[i]);
  return lex;
}

Lexicon BuildLexicon(const StaticEmbeddings& emb, double keep_fraction) {
  return BuildLexicon(emb.words(), keep_fraction);
}

std::vector<TextSpan> MaxMatch(const Lexicon& lex, std::string_view text) {
  const std::vector<utf8::Char> chars = utf8::Split(text);
  std::vector<TextSpan> spans;
  size_t i = 0;
  while (i < chars.size()) {
    if (utf8::IsSpace(chars[i].text)) {
      ++i;
      continue;
    }
    size_t chunk_end = i;
    while (chunk_end < chars.size() && !utf8::IsSpace(chars[chunk_end].text)) ++chunk_end;
    size_t take = 1;
    for (size_t len = std::min(lex.max_length, chunk_end - i); len > 1; --len) {
      const size_t b = chars[i].begin, e = chars[i + len - 1].end;
      if (lex.Contains(std::string(text.substr(b, e - b)))) {
        take = len;
        break;
      }
    }
    spans.emplace_back(chars[i].begin, chars[i + take - 1].end);
    i += take;
  }
  return spans;
}

std::vector<TextSpan> WhitespaceTokenize(std::string_view text) {
  std::vector<TextSpan> spans;
  for (const Unit& u : SplitUnits(text, UnitKind::kSyllable)) spans.emplace_back(u.begin, u.end);
  return spans;
}

TokenizerKind ParseTokenizerKind(const std::string& name) {
  if (name == "bies") return TokenizerKind::kBies;
  if (name == "maxmatch") return TokenizerKind::kMaxMatch;
  if (name == "whitespace" || name == "pretokenized") return TokenizerKind::kWhitespace;
  throw Error("unknown tokenizer '" + name + "' (expected bies, maxmatch or pretokenized)");
}

std::string TokenizerKindName(TokenizerKind kind) {
  switch (kind) {
    case TokenizerKind::kBies:
      return "bies";
    case TokenizerKind::kMaxMatch:
      return "maxmatch";
    case TokenizerKind::kWhitespace:
      return "pretokenized";
  }
  return "pretokenized";
}

Segmenter ThaiPreset(const Lexicon& lexicon) {
  Segmenter seg;
  seg.split = SplitMode::kWhitespace;
  seg.tokenizer = TokenizerKind::kMaxMatch;
  seg.lexicon = &lexicon;
  return seg;
}

std::vector<TextSpan> Tokenize(const Segmenter& seg, std::string_view text) {
  switch (seg.tokenizer) {
    case TokenizerKind::kBies:
      return BiesTokenize(seg.bies, text);
    case TokenizerKind::kMaxMatch:
      if (!seg.lexicon) throw Error("tokenize: maxmatch needs a lexicon");
      return MaxMatch(*seg.lexicon, text);
    case TokenizerKind::kWhitespace:
      return WhitespaceTokenize(text);
  }
  return {};
}

Treebank SegmentText(std::string_view text, const Segmenter& seg, std::string name) {
  Treebank tb;
  tb.name = std::move(name);
  for (const TextSpan& sspan : SplitSentences(text, seg.split, seg.threshold)) {
    const std::string_view stext = text.substr(sspan.first, sspan.second - sspan.first);
    Sentence s;
    s.SetComment("sent_id", std::to_string(tb.sentences.size() + 1));
    s.SetComment("text", stext);
    for (const TextSpan& t : Tokenize(seg, stext)) {
      Token tok;
      tok.id = static_cast<int>(s.tokens.size()) + 1;
      tok.form = std::string(stext.substr(t.first, t.second - t.first));
      s.tokens.push_back(std::move(tok));
    }
    if (!s.tokens.empty()) tb.sentences.push_back(std::move(s));
  }
  return tb;
}

}  // namespace udparse
