#ifndef UDPARSE_PARSER_H_
#define UDPARSE_PARSER_H_

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "udparse/autodiff.h"
#include "udparse/conllu.h"
#include "udparse/decode.h"
#include "udparse/embed.h"
#include "udparse/nn.h"
#include "udparse/training.h"
#include "udparse/vocab.h"

namespace udparse {

struct ParserConfig {
  EmbedderConfig embed;
  size_t tag_dim = 50;
  size_t hidden = 100;  // per direction
  size_t layers = 3;
  size_t arc_mlp = 100;
  size_t rel_mlp = 50;
  Decoder decoder = Decoder::kGreedyFix;
  TrainOptions train;
};

// Arc scores for a sentence plus the relation-MLP states needed to score
// labels for any (head, dependent) pair on demand.
struct ScoreMatrices {
  Tensor arc;       // (n+1) x (n+1), arc.at(h, d); diagonal set to -inf
  Tensor rel_head;  // (n+1) x rel_mlp
  Tensor rel_dep;   // (n+1) x rel_mlp
  size_t words() const { return arc.rows() - 1; }
};

// Biaffine dependency parser over x_i = word_i (+) tag_i with a ROOT position
// prepended.
class ParserModel {
 public:
  ParserModel() = default;
  ParserModel(ParserModel&&) = default;
  ParserModel& operator=(ParserModel&&) = default;

  static ParserModel Create(const ParserConfig& config, const Treebank& train,
                            std::shared_ptr<const StaticEmbeddings> pretrained,
                            std::shared_ptr<const BiLmModel> lm);

  const ParserConfig& config() const { return config_; }
  const Vocab& relations() const { return relations_; }
  const Vocab& tags() const { return tags_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const WordEmbedder& embedder() const { return embedder_; }
  WordEmbedder& embedder() { return embedder_; }
  void set_decoder(Decoder d) { config_.decoder = d; }

  // Differentiable forward pass. `arc_t` holds arc scores transposed
  // (row d, column h) and `rel_head`, `rel_dep` the relation-MLP outputs.
  struct Graph {
    Var arc_t;
    Var rel_head;
    Var rel_dep;
  };
  Graph Forward(Tape& tape, const Sentence& s, const Tensor* context, Rng* rng) const;

  // Summed head and relation cross-entropy at the gold tree.
  Var Loss(Tape& tape, const Sentence& s, const Tensor* context, Rng* rng) const;

  ScoreMatrices Score(const Sentence& s, const Tensor* context = nullptr) const;
  // Relation scores for each word given a head assignment (n x |relations|).
  Tensor RelScores(const ScoreMatrices& scores, const std::vector<int>& heads) const;
  // Decodes heads with the configured decoder and labels them by argmax.
  DependencyTree Decode(const ScoreMatrices& scores) const;
  DependencyTree Parse(const Sentence& s, const Tensor* context = nullptr) const;
  // Overwrites head and deprel of every word.
  void ParseTreebank(Treebank& tb) const;

  void Save(const std::string& dir) const;
  static ParserModel Load(const std::string& dir);

  static constexpr int kFormatVersion = 1;

 private:
  void Declare(Rng& rng);

  ParserConfig config_;
  Vocab relations_;
  Vocab tags_;  // index 0 is the unknown tag
  ParameterSet params_;
  WordEmbedder embedder_;
  Parameter* tag_table_ = nullptr;
  Parameter* root_ = nullptr;  // learned ROOT input vector
  nn::BiLstm bilstm_;
  nn::Mlp arc_dep_;
  nn::Mlp arc_head_;
  nn::Mlp rel_dep_;
  nn::Mlp rel_head_;
  Parameter* arc_weight_ = nullptr;  // arc_mlp x arc_mlp
  Parameter* arc_bias_ = nullptr;    // arc_mlp x 1
  Parameter* rel_bilinear_ = nullptr;  // R x rel_mlp x rel_mlp
  nn::Dense rel_linear_;               // (dep (+) head) -> R
};

// Trains with early stopping on dev LAS. Sentences whose gold annotation is
// not a tree are skipped with a warning.
ParserModel TrainParser(const Treebank& train, const Treebank& dev, const ParserConfig& config,
                        std::shared_ptr<const StaticEmbeddings> pretrained = nullptr,
                        std::shared_ptr<const BiLmModel> lm = nullptr,
                        TrainHistory* history = nullptr);

// Labeled attachment accuracy of `model` on gold-tokenized `dev`.
double DevLas(const ParserModel& model, const Treebank& dev,
              const std::vector<Tensor>& context = {});

enum class EnsembleMode {
  kAverage,  // average per-model softmax distributions, then decode
  kVote,     // decode each model, then decode the head-vote counts
};

EnsembleMode ParseEnsembleMode(const std::string& name);

// Combines parsers that share relation and tag sets. Arc columns are
// softmaxed per model over candidate heads and averaged; decoding runs on the
// log of the averaged probabilities, which has the same per-column argmax and
// reduces to the single-model result when m = 1. Labels use averaged relation
// probabilities at the chosen heads.
DependencyTree EnsembleParse(const std::vector<const ParserModel*>& models, const Sentence& s,
                             EnsembleMode mode = EnsembleMode::kAverage);
void EnsembleParseTreebank(const std::vector<const ParserModel*>& models, Treebank& tb,
                           EnsembleMode mode = EnsembleMode::kAverage);

// Column-wise softmax over heads (diagonal excluded).
Tensor ArcProbabilities(const Tensor& arc);
// Column-wise log-softmax over heads; the diagonal is -inf.
Tensor ArcLogProbabilities(const Tensor& arc);

}  // namespace udparse

#endif  // UDPARSE_PARSER_H_
