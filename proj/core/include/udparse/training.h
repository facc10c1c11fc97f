#ifndef UDPARSE_TRAINING_H_
#define UDPARSE_TRAINING_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include "udparse/bilm.h"
#include "udparse/conllu.h"
#include "udparse/embed.h"
#include "udparse/params.h"

namespace udparse {

// Options shared by the tagger and parser training loops.
struct TrainOptions {
  size_t epochs = 50;
  size_t batch_size = 8;    // sentences per update
  size_t patience = 10;     // dev evaluations without improvement
  double target_score = 2;  // stop once dev reaches this (> 1 disables)
  double dropout = 0.33;
  AdamConfig adam;
  uint64_t seed = 1;
  std::ostream* log = nullptr;
};

nlohmann::json TrainOptionsToJson(const TrainOptions& o);
TrainOptions TrainOptionsFromJson(const nlohmann::json& j);

// Dev score after every epoch and the epoch whose parameters were kept.
struct TrainHistory {
  std::vector<double> dev_scores;
  std::vector<double> train_losses;
  size_t best_epoch = 0;
  double best_score = -1;
  size_t skipped_sentences = 0;
  size_t unseen_dev_labels = 0;
};

// Contextual vectors for every sentence of `tb`, computed once because the
// language model is frozen. Empty when `embedder` does not use one.
std::vector<Tensor> PrecomputeContext(const WordEmbedder& embedder, const Treebank& tb);

// Shared model-directory layout: model.json, params.txt, pretrained.vec and
// lm/ for the frozen resources.
void SaveResources(const std::string& dir, const WordEmbedder& embedder);
std::shared_ptr<const StaticEmbeddings> LoadPretrained(const std::string& dir,
                                                       const nlohmann::json& meta);
std::shared_ptr<const BiLmModel> LoadLm(const std::string& dir, const nlohmann::json& meta);
nlohmann::json ReadModelJson(const std::string& dir, const std::string& kind, int version);
void WriteModelFiles(const std::string& dir, const nlohmann::json& meta,
                     const ParameterSet& params);
void ReadModelParams(const std::string& dir, ParameterSet& params);

}  // namespace udparse

#endif  // UDPARSE_TRAINING_H_
