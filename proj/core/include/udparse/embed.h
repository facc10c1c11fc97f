#ifndef UDPARSE_EMBED_H_
#define UDPARSE_EMBED_H_

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include "udparse/autodiff.h"
#include "udparse/bilm.h"
#include "udparse/conllu.h"
#include "udparse/nn.h"
#include "udparse/params.h"
#include "udparse/vocab.h"

namespace udparse {

// Frozen pretrained word vectors, ordered by frequency rank. Unknown words map
// to an all-zero row stored after the last word.
class StaticEmbeddings {
 public:
  StaticEmbeddings() = default;
  StaticEmbeddings(std::vector<std::string> words, const Tensor& vectors);

  // Text format: optional "count dim" header, then "word v1 ... vd" lines in
  // frequency order. Keeps the first round(keep_fraction * count) words.
  static StaticEmbeddings Load(std::istream& in, double keep_fraction = 1.0);
  static StaticEmbeddings LoadFile(const std::string& path, double keep_fraction = 1.0);
  void Save(std::ostream& out) const;

  size_t size() const { return words_.size(); }
  size_t dim() const { return dim_; }
  bool Contains(const std::string& w) const { return words_.Contains(w); }
  // Row index; size() for unknown words.
  size_t Index(const std::string& w) const { return words_.Get(w, words_.size()); }
  const std::vector<std::string>& words() const { return words_.items(); }
  std::span<const Real> Vector(size_t i) const { return table_.row(i); }
  // (size() + 1) x dim, last row zero.
  const Tensor& table() const { return table_; }

 private:
  Vocab words_;
  size_t dim_ = 0;
  Tensor table_;
};

// Trainable token embeddings over a training vocabulary; index 0 is <unk>.
struct TokenTable {
  Vocab vocab;
  std::vector<size_t> counts;
  Parameter* table = nullptr;
  size_t min_count = 2;
  double unk_replace = 0.5;

  // Vocabulary of words seen at least `min_count` times.
  static Vocab BuildVocab(const std::vector<const Treebank*>& corpora, size_t min_count,
                          std::vector<size_t>* counts);
  // At training time words at the vocabulary frequency floor are replaced by
  // <unk> with probability unk_replace so the <unk> row is trained.
  size_t Index(const std::string& word, Rng* train_rng) const;
};

// Per-word BiLSTM over characters, projected to the word dimension.
struct CharEncoder {
  Vocab chars;  // index 0 is the unknown character
  Parameter* table = nullptr;
  nn::Lstm forward;
  nn::Lstm backward;
  nn::Dense projection;

  Var Encode(Tape& tape, const std::vector<std::string>& forms) const;
};

// Elementwise sum of the enabled word-representation parts; all parts must
// share one shape.
Var SumWordParts(Tape& tape, std::span<const Var> parts);

struct EmbedderConfig {
  size_t dim = 50;
  bool use_tokens = true;
  bool use_chars = true;
  bool use_pretrained = true;  // only when a table is supplied
  size_t char_dim = 25;
  size_t char_hidden = 50;
  size_t min_count = 2;
  double unk_replace = 0.5;
  LmMode lm_mode = LmMode::kNone;
  double elmo_dropout = 0.33;
};

nlohmann::json EmbedderConfigToJson(const EmbedderConfig& c);
EmbedderConfig EmbedderConfigFromJson(const nlohmann::json& j);

// Builds v = w + p + v_hat (+ dropout(W_elmo * ELMo)) for a sentence. The
// pretrained table and language model are shared and never updated.
class WordEmbedder {
 public:
  WordEmbedder() = default;

  static WordEmbedder Create(ParameterSet& params, const std::string& prefix,
                             const EmbedderConfig& config,
                             const std::vector<const Treebank*>& corpora,
                             std::shared_ptr<const StaticEmbeddings> pretrained,
                             std::shared_ptr<const BiLmModel> lm, Rng& rng);

  const EmbedderConfig& config() const { return config_; }
  size_t dim() const { return config_.dim; }
  const std::shared_ptr<const StaticEmbeddings>& pretrained() const { return pretrained_; }
  void set_pretrained(std::shared_ptr<const StaticEmbeddings> p);
  const std::shared_ptr<const BiLmModel>& lm() const { return lm_; }
  bool uses_lm() const { return lm_ && config_.lm_mode != LmMode::kNone; }
  bool has_token_table() const { return config_.use_tokens; }

  // n x dim. `elmo` may carry precomputed contextual vectors for the sentence
  // (n x lm->output_dim()); otherwise they are computed on demand.
  Var Compose(Tape& tape, const std::vector<std::string>& forms, const Tensor* elmo,
              Rng* rng) const;

  Tensor Contextualize(const std::vector<std::string>& forms) const;

  // Vocabulary state for model sidecars; parameters live in the owner's set.
  nlohmann::json ToJson() const;
  static WordEmbedder FromJson(ParameterSet& params, const std::string& prefix,
                               const nlohmann::json& j,
                               std::shared_ptr<const StaticEmbeddings> pretrained,
                               std::shared_ptr<const BiLmModel> lm, Rng& rng);

 private:
  void Declare(ParameterSet& params, const std::string& prefix, Rng& rng);

  EmbedderConfig config_;
  TokenTable tokens_;
  CharEncoder chars_;
  Parameter* elmo_projection_ = nullptr;  // dim x lm width
  std::shared_ptr<const StaticEmbeddings> pretrained_;
  std::shared_ptr<const BiLmModel> lm_;
};

}  // namespace udparse

#endif  // UDPARSE_EMBED_H_
