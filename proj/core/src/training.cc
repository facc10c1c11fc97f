#include "udparse/training.h"

#include <filesystem>
#include <fstream>

#include "udparse/error.h"

namespace udparse {

using json = nlohmann::json;

json TrainOptionsToJson(const TrainOptions& o) {
  return {{"epochs", o.epochs},
          {"batch_size", o.batch_size},
          {"patience", o.patience},
          {"target_score", o.target_score},
          {"dropout", o.dropout},
          {"learning_rate", o.adam.learning_rate},
          {"beta1", o.adam.beta1},
          {"beta2", o.adam.beta2},
          {"epsilon", o.adam.epsilon},
          {"clip_norm", o.adam.clip_norm},
          {"seed", o.seed}};
}

TrainOptions TrainOptionsFromJson(const json& j) {
  TrainOptions o;
  o.epochs = j.at("epochs");
  o.batch_size = j.at("batch_size");
  o.patience = j.at("patience");
  o.target_score = j.at("target_score");
  o.dropout = j.at("dropout");
  o.adam.learning_rate = j.at("learning_rate");
  o.adam.beta1 = j.at("beta1");
  o.adam.beta2 = j.at("beta2");
  o.adam.epsilon = j.at("epsilon");
  o.adam.clip_norm = j.at("clip_norm");
  o.seed = j.at("seed");
  return o;
}

std::vector<Tensor> PrecomputeContext(const WordEmbedder& embedder, const Treebank& tb) {
  std::vector<Tensor> out;
  if (!embedder.uses_lm()) return out;
  out.reserve(tb.sentences.size());
  for (const Sentence& s : tb.sentences) out.push_back(embedder.Contextualize(s.Forms()));
  return out;
}

void SaveResources(const std::string& dir, const WordEmbedder& embedder) {
  if (embedder.pretrained()) {
    std::ofstream out(dir + "/pretrained.vec");
    embedder.pretrained()->Save(out);
    if (!out) throw DataError("cannot write " + dir + "/pretrained.vec");
  }
  if (embedder.lm()) embedder.lm()->Save(dir + "/lm");
}

std::shared_ptr<const StaticEmbeddings> LoadPretrained(const std::string& dir,
                                                       const json& meta) {
  if (!meta.value("has_pretrained", false)) return nullptr;
  return std::make_shared<StaticEmbeddings>(
      StaticEmbeddings::LoadFile(dir + "/pretrained.vec"));
}

std::shared_ptr<const BiLmModel> LoadLm(const std::string& dir, const json& meta) {
  if (!meta.value("has_lm", false)) return nullptr;
  return std::make_shared<BiLmModel>(BiLmModel::Load(dir + "/lm"));
}

json ReadModelJson(const std::string& dir, const std::string& kind, int version) {
  std::ifstream in(dir + "/model.json");
  if (!in) throw DataError("cannot open " + dir + "/model.json");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(dir + "/model.json: " + e.what());
  }
  if (j.value("kind", "") != kind) throw DataError(dir + " is not a " + kind + " model");
  if (j.value("format_version", -1) != version) {
    throw VersionError(kind + " model format version mismatch in " + dir);
  }
  return j;
}

void WriteModelFiles(const std::string& dir, const json& meta, const ParameterSet& params) {
  std::filesystem::create_directories(dir);
  std::ofstream m(dir + "/model.json");
  m << meta.dump(1) << "\n";
  std::ofstream p(dir + "/params.txt");
  params.Save(p);
  if (!m || !p) throw DataError("cannot write model to " + dir);
}

void ReadModelParams(const std::string& dir, ParameterSet& params) {
  std::ifstream in(dir + "/params.txt");
  if (!in) throw DataError("cannot open " + dir + "/params.txt");
  params.Load(in);
}

}  // namespace udparse
