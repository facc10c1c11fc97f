#include "udparse/embed.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "udparse/error.h"
#include "udparse/utf8.h"

namespace udparse {

using json = nlohmann::json;

StaticEmbeddings::StaticEmbeddings(std::vector<std::string> words, const Tensor& vectors) {
  if (vectors.rows() != words.size()) {
    throw DimensionError("embeddings: " + std::to_string(words.size()) + " words for " +
                         ShapeString(vectors.shape()) + " vectors");
  }
  dim_ = vectors.cols();
  std::vector<Real> data;
  data.reserve((words.size() + 1) * dim_);
  for (size_t i = 0; i < words.size(); ++i) {
    if (words_.Contains(words[i])) continue;
    words_.Add(words[i]);
    data.insert(data.end(), vectors.row(i).begin(), vectors.row(i).end());
  }
  data.resize(data.size() + dim_, 0.0);
  table_ = Tensor::Matrix(words_.size() + 1, dim_, std::move(data));
}

StaticEmbeddings StaticEmbeddings::Load(std::istream& in, double keep_fraction) {
  if (keep_fraction < 0.0 || keep_fraction > 1.0) {
    throw Error("embeddings: keep fraction must lie in [0, 1]");
  }
  std::vector<std::string> words;
  std::vector<Real> values;
  size_t dim = 0;
  std::string line;
  size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::vector<std::string> parts;
    for (std::string f; fields >> f;) parts.push_back(f);
    if (parts.empty()) continue;
    if (first) {
      first = false;
      char* end = nullptr;
      if (parts.size() == 2) {
        const long count = std::strtol(parts[0].c_str(), &end, 10);
        const bool count_ok = *end == '\0' && count >= 0;
        const long d = std::strtol(parts[1].c_str(), &end, 10);
        if (count_ok && *end == '\0' && d > 0) {
          dim = static_cast<size_t>(d);
          continue;
        }
      }
    }
    if (dim == 0) dim = parts.size() - 1;
    if (parts.size() != dim + 1 || dim == 0) {
      throw ParseError(line_no, "embedding has " + std::to_string(parts.size() - 1) +
                                    " values, expected " + std::to_string(dim));
    }
    words.push_back(parts[0]);
    for (size_t k = 1; k < parts.size(); ++k) {
      char* end = nullptr;
      const double v = std::strtod(parts[k].c_str(), &end);
      if (*end != '\0') throw ParseError(line_no, "bad number '" + parts[k] + "'");
      values.push_back(v);
    }
  }
  if (words.empty()) throw DataError("embeddings: empty file");
  const size_t keep = static_cast<size_t>(
      std::llround(keep_fraction * static_cast<double>(words.size())));
  words.resize(keep);
  values.resize(keep * dim);
  return StaticEmbeddings(std::move(words), Tensor::Matrix(keep, dim, std::move(values)));
}

StaticEmbeddings StaticEmbeddings::LoadFile(const std::string& path, double keep_fraction) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return Load(in, keep_fraction);
}

void StaticEmbeddings::Save(std::ostream& out) const {
  out << size() << ' ' << dim_ << '\n';
  char buf[64];
  for (size_t i = 0; i < size(); ++i) {
    out << words_[i];
    for (Real v : table_.row(i)) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ' ' << buf;
    }
    out << '\n';
  }
}

Vocab TokenTable::BuildVocab(const std::vector<const Treebank*>& corpora, size_t min_count,
                             std::vector<size_t>* counts) {
  std::map<std::string, size_t> freq;
  std::vector<std::string> order;
  for (const Treebank* tb : corpora)
    for (const Sentence& s : tb->sentences)
      for (const Token& t : s.tokens)
        if (freq[t.form]++ == 0) order.push_back(t.form);
  Vocab vocab;
  vocab.Add("<unk>");
  if (counts) counts->assign(1, 0);
  for (const std::string& w : order) {
    if (freq[w] < min_count) continue;
    vocab.Add(w);
    if (counts) counts->push_back(freq[w]);
  }
  return vocab;
}

size_t TokenTable::Index(const std::string& word, Rng* train_rng) const {
  const size_t idx = vocab.Get(word, 0);
  if (train_rng && idx > 0 && counts[idx] <= min_count && unk_replace > 0.0 &&
      train_rng->Bernoulli(unk_replace)) {
    return 0;
  }
  return idx;
}

Var CharEncoder::Encode(Tape& tape, const std::vector<std::string>& forms) const {
  std::vector<Var> rows;
  rows.reserve(forms.size());
  for (const std::string& form : forms) {
    std::vector<size_t> ids;
    for (const std::string& c : utf8::Chars(form)) ids.push_back(chars.Get(c, 0));
    if (ids.empty()) ids.push_back(0);
    const Var x = tape.Lookup(*table, ids);
    const Var fw = forward.Run(tape, x, false);
    const Var bw = backward.Run(tape, x, true);
    const Var ends[2] = {tape.Row(fw, ids.size() - 1), tape.Row(bw, 0)};
    rows.push_back(tape.Concat(ends));
  }
  return projection.Apply(tape, tape.StackRows(rows));
}

Var SumWordParts(Tape& tape, std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("compose_word_repr: no parts enabled");
  const Tensor& first = tape.value(parts[0]);
  for (Var p : parts) {
    if (tape.value(p).shape() != first.shape()) {
      throw DimensionError("compose_word_repr: dimension mismatch " +
                           ShapeString(first.shape()) + " vs " +
                           ShapeString(tape.value(p).shape()));
    }
  }
  return parts.size() == 1 ? parts[0] : tape.AddN(parts);
}

json EmbedderConfigToJson(const EmbedderConfig& c) {
  return {{"dim", c.dim},
          {"use_tokens", c.use_tokens},
          {"use_chars", c.use_chars},
          {"use_pretrained", c.use_pretrained},
          {"char_dim", c.char_dim},
          {"char_hidden", c.char_hidden},
          {"min_count", c.min_count},
          {"unk_replace", c.unk_replace},
          {"lm_mode", LmModeName(c.lm_mode)},
          {"elmo_dropout", c.elmo_dropout}};
}

EmbedderConfig EmbedderConfigFromJson(const json& j) {
  EmbedderConfig c;
  c.dim = j.at("dim");
  c.use_tokens = j.at("use_tokens");
  c.use_chars = j.at("use_chars");
  c.use_pretrained = j.at("use_pretrained");
  c.char_dim = j.at("char_dim");
  c.char_hidden = j.at("char_hidden");
  c.min_count = j.at("min_count");
  c.unk_replace = j.at("unk_replace");
  c.lm_mode = ParseLmMode(j.at("lm_mode"));
  c.elmo_dropout = j.at("elmo_dropout");
  return c;
}

void WordEmbedder::Declare(ParameterSet& params, const std::string& prefix, Rng& rng) {
  const EmbedderConfig& c = config_;
  if (c.use_tokens) {
    tokens_.table = &params.Add(prefix + ".tokens", {tokens_.vocab.size(), c.dim},
                                Init::kNormal, rng);
  }
  if (c.use_chars) {
    chars_.table = &params.Add(prefix + ".chars", {chars_.chars.size(), c.char_dim},
                               Init::kNormal, rng);
    chars_.forward = nn::Lstm::Create(params, prefix + ".chars.fw", c.char_dim,
                                      c.char_hidden, rng);
    chars_.backward = nn::Lstm::Create(params, prefix + ".chars.bw", c.char_dim,
                                       c.char_hidden, rng);
    chars_.projection =
        nn::Dense::Create(params, prefix + ".chars.proj", 2 * c.char_hidden, c.dim, rng);
  }
  if (uses_lm()) {
    elmo_projection_ =
        &params.Add(prefix + ".elmo", {c.dim, lm_->output_dim()}, Init::kXavier, rng);
  }
  const bool any = c.use_tokens || c.use_chars || (c.use_pretrained && pretrained_) ||
                   uses_lm();
  if (!any) throw Error("word representation: no component enabled");
}

void WordEmbedder::set_pretrained(std::shared_ptr<const StaticEmbeddings> p) {
  if (p && config_.use_pretrained && p->dim() != config_.dim) {
    throw DimensionError("pretrained embeddings have dimension " + std::to_string(p->dim()) +
                         ", word representation uses " + std::to_string(config_.dim));
  }
  pretrained_ = std::move(p);
}

WordEmbedder WordEmbedder::Create(ParameterSet& params, const std::string& prefix,
                                  const EmbedderConfig& config,
                                  const std::vector<const Treebank*>& corpora,
                                  std::shared_ptr<const StaticEmbeddings> pretrained,
                                  std::shared_ptr<const BiLmModel> lm, Rng& rng) {
  WordEmbedder e;
  e.config_ = config;
  e.set_pretrained(std::move(pretrained));
  e.lm_ = std::move(lm);
  e.tokens_.min_count = config.min_count;
  e.tokens_.unk_replace = config.unk_replace;
  e.tokens_.vocab = TokenTable::BuildVocab(corpora, config.min_count, &e.tokens_.counts);
  e.chars_.chars.Add("<unk-char>");
  for (const Treebank* tb : corpora)
    for (const Sentence& s : tb->sentences)
      for (const Token& t : s.tokens)
        for (const std::string& c : utf8::Chars(t.form)) e.chars_.chars.Add(c);
  e.Declare(params, prefix, rng);
  return e;
}

Tensor WordEmbedder::Contextualize(const std::vector<std::string>& forms) const {
  if (!uses_lm()) throw Error("word representation has no language model");
  return lm_->Contextualize(forms, config_.lm_mode);
}

Var WordEmbedder::Compose(Tape& tape, const std::vector<std::string>& forms,
                          const Tensor* elmo, Rng* rng) const {
  std::vector<Var> parts;
  Rng* train_rng = tape.training() ? rng : nullptr;
  if (config_.use_tokens) {
    std::vector<size_t> ids;
    ids.reserve(forms.size());
    for (const std::string& f : forms) ids.push_back(tokens_.Index(f, train_rng));
    parts.push_back(tape.Lookup(*tokens_.table, ids));
  }
  if (config_.use_pretrained && pretrained_) {
    std::vector<size_t> ids;
    ids.reserve(forms.size());
    for (const std::string& f : forms) ids.push_back(pretrained_->Index(f));
    parts.push_back(tape.LookupConstant(pretrained_->table(), ids));
  }
  if (config_.use_chars) parts.push_back(chars_.Encode(tape, forms));
  if (uses_lm()) {
    const Var vectors = elmo ? tape.Constant(*elmo) : tape.Constant(Contextualize(forms));
    const Var projected = tape.Linear(vectors, tape.Param(*elmo_projection_));
    parts.push_back(tape.Dropout(projected, config_.elmo_dropout));
  }
  return SumWordParts(tape, parts);
}

json WordEmbedder::ToJson() const {
  return {{"config", EmbedderConfigToJson(config_)},
          {"token_vocab", tokens_.vocab.items()},
          {"token_counts", tokens_.counts},
          {"char_vocab", chars_.chars.items()}};
}

WordEmbedder WordEmbedder::FromJson(ParameterSet& params, const std::string& prefix,
                                    const json& j,
                                    std::shared_ptr<const StaticEmbeddings> pretrained,
                                    std::shared_ptr<const BiLmModel> lm, Rng& rng) {
  WordEmbedder e;
  e.config_ = EmbedderConfigFromJson(j.at("config"));
  e.set_pretrained(std::move(pretrained));
  e.lm_ = std::move(lm);
  e.tokens_.min_count = e.config_.min_count;
  e.tokens_.unk_replace = e.config_.unk_replace;
  e.tokens_.vocab = Vocab(j.at("token_vocab").get<std::vector<std::string>>());
  e.tokens_.counts = j.at("token_counts").get<std::vector<size_t>>();
  e.chars_.chars = Vocab(j.at("char_vocab").get<std::vector<std::string>>());
  e.Declare(params, prefix, rng);
  return e;
}

}  // namespace udparse
