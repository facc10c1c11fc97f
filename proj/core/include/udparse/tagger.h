#ifndef UDPARSE_TAGGER_H_
#define UDPARSE_TAGGER_H_

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "udparse/autodiff.h"
#include "udparse/conllu.h"
#include "udparse/embed.h"
#include "udparse/nn.h"
#include "udparse/training.h"
#include "udparse/vocab.h"

namespace udparse {

struct TaggerConfig {
  EmbedderConfig embed;
  size_t hidden = 100;  // per direction
  size_t layers = 2;    // 0 scores the word representation directly
  size_t mlp = 100;
  TrainOptions train;
};

// UPOS tagger: word representation, BiLSTM, one ReLU MLP and a linear layer
// over the tagset.
class TaggerModel {
 public:
  TaggerModel() = default;
  TaggerModel(TaggerModel&&) = default;
  TaggerModel& operator=(TaggerModel&&) = default;

  // Tagset and vocabularies come from `train`.
  static TaggerModel Create(const TaggerConfig& config, const Treebank& train,
                            std::shared_ptr<const StaticEmbeddings> pretrained,
                            std::shared_ptr<const BiLmModel> lm);

  const TaggerConfig& config() const { return config_; }
  const Vocab& tagset() const { return tagset_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const WordEmbedder& embedder() const { return embedder_; }

  // n x |tagset| scores. `context` optionally carries precomputed LM vectors.
  Var Scores(Tape& tape, const Sentence& s, const Tensor* context, Rng* rng) const;

  // Highest-scoring tag per word; ties go to the lowest tag index.
  std::vector<std::string> Predict(const Sentence& s, const Tensor* context = nullptr) const;
  // Fills upos of every word and leaves all other fields untouched.
  void Tag(Treebank& tb) const;

  void Save(const std::string& dir) const;
  static TaggerModel Load(const std::string& dir);

  static constexpr int kFormatVersion = 1;

 private:
  void Declare(Rng& rng);

  TaggerConfig config_;
  Vocab tagset_;
  ParameterSet params_;
  WordEmbedder embedder_;
  nn::BiLstm bilstm_;
  nn::Mlp mlp_;
  nn::Dense output_;
};

// Trains on per-word cross-entropy and keeps the parameters with the best dev
// UPOS accuracy. Dev tags missing from the training tagset count as errors and
// are reported in the history.
TaggerModel TrainTagger(const Treebank& train, const Treebank& dev, const TaggerConfig& config,
                        std::shared_ptr<const StaticEmbeddings> pretrained = nullptr,
                        std::shared_ptr<const BiLmModel> lm = nullptr,
                        TrainHistory* history = nullptr);

// Fraction of words whose upos matches; both sides must be tokenized alike.
double TagAccuracy(const Treebank& gold, const Treebank& system);

}  // namespace udparse

#endif  // UDPARSE_TAGGER_H_
