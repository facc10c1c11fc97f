#include "udparse/tagger.h"

#include <ostream>

#include "udparse/error.h"

namespace udparse {

using json = nlohmann::json;

namespace {

constexpr const char* kWordPrefix = "word";

json TaggerConfigToJson(const TaggerConfig& c) {
  return {{"hidden", c.hidden},
          {"layers", c.layers},
          {"mlp", c.mlp},
          {"train", TrainOptionsToJson(c.train)}};
}

}  // namespace

void TaggerModel::Declare(Rng& rng) {
  bilstm_ = nn::BiLstm::Create(params_, "tagger.lstm", config_.embed.dim, config_.hidden,
                               config_.layers, rng);
  mlp_ = nn::Mlp::Create(params_, "tagger.mlp", bilstm_.output_dim(config_.embed.dim),
                         config_.mlp, rng);
  output_ = nn::Dense::Create(params_, "tagger.out", config_.mlp, tagset_.size(), rng);
}

TaggerModel TaggerModel::Create(const TaggerConfig& config, const Treebank& train,
                                std::shared_ptr<const StaticEmbeddings> pretrained,
                                std::shared_ptr<const BiLmModel> lm) {
  TaggerModel m;
  m.config_ = config;
  for (const Sentence& s : train.sentences)
    for (const Token& t : s.tokens) m.tagset_.Add(t.upos);
  if (m.tagset_.size() == 0) throw DataError("train_tagger: empty training set");
  Rng rng(config.train.seed);
  m.embedder_ = WordEmbedder::Create(m.params_, kWordPrefix, config.embed, {&train},
                                     std::move(pretrained), std::move(lm), rng);
  m.Declare(rng);
  return m;
}

Var TaggerModel::Scores(Tape& tape, const Sentence& s, const Tensor* context,
                        Rng* rng) const {
  const double dropout = config_.train.dropout;
  Var x = embedder_.Compose(tape, s.Forms(), context, rng);
  x = tape.Dropout(x, dropout);
  const Var h = bilstm_.Run(tape, x, dropout);
  return output_.Apply(tape, mlp_.Apply(tape, h, dropout));
}

std::vector<std::string> TaggerModel::Predict(const Sentence& s, const Tensor* context) const {
  std::vector<std::string> tags;
  if (s.tokens.empty()) return tags;
  Tape tape(false);
  const Tensor& scores = tape.value(Scores(tape, s, context, nullptr));
  for (size_t i = 0; i < scores.rows(); ++i) {
    const auto row = scores.row(i);
    size_t best = 0;
    for (size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = j;
    tags.push_back(tagset_[best]);
  }
  return tags;
}

void TaggerModel::Tag(Treebank& tb) const {
  for (Sentence& s : tb.sentences) {
    const std::vector<std::string> tags = Predict(s);
    for (size_t i = 0; i < tags.size(); ++i) s.tokens[i].upos = tags[i];
  }
}

void TaggerModel::Save(const std::string& dir) const {
  const json meta = {{"format_version", kFormatVersion},
                     {"kind", "tagger"},
                     {"config", TaggerConfigToJson(config_)},
                     {"tagset", tagset_.items()},
                     {"embedder", embedder_.ToJson()},
                     {"has_pretrained", embedder_.pretrained() != nullptr},
                     {"has_lm", embedder_.lm() != nullptr}};
  WriteModelFiles(dir, meta, params_);
  SaveResources(dir, embedder_);
}

TaggerModel TaggerModel::Load(const std::string& dir) {
  const json meta = ReadModelJson(dir, "tagger", kFormatVersion);
  TaggerModel m;
  const json& c = meta.at("config");
  m.config_.hidden = c.at("hidden");
  m.config_.layers = c.at("layers");
  m.config_.mlp = c.at("mlp");
  m.config_.train = TrainOptionsFromJson(c.at("train"));
  m.config_.embed = EmbedderConfigFromJson(meta.at("embedder").at("config"));
  m.tagset_ = Vocab(meta.at("tagset").get<std::vector<std::string>>());
  Rng rng(m.config_.train.seed);
  m.embedder_ = WordEmbedder::FromJson(m.params_, kWordPrefix, meta.at("embedder"),
                                       LoadPretrained(dir, meta), LoadLm(dir, meta), rng);
  m.Declare(rng);
  ReadModelParams(dir, m.params_);
  return m;
}

double TagAccuracy(const Treebank& gold, const Treebank& system) {
  if (gold.sentences.size() != system.sentences.size()) {
    throw DataError("tag accuracy: sentence counts differ");
  }
  size_t total = 0, correct = 0;
  for (size_t i = 0; i < gold.sentences.size(); ++i) {
    const auto& g = gold.sentences[i].tokens;
    const auto& s = system.sentences[i].tokens;
    if (g.size() != s.size()) throw DataError("tag accuracy: tokenization differs");
    for (size_t k = 0; k < g.size(); ++k) {
      ++total;
      correct += g[k].upos == s[k].upos;
    }
  }
  return total ? static_cast<double>(correct) / total : 0.0;
}

TaggerModel TrainTagger(const Treebank& train, const Treebank& dev, const TaggerConfig& config,
                        std::shared_ptr<const StaticEmbeddings> pretrained,
                        std::shared_ptr<const BiLmModel> lm, TrainHistory* history) {
  if (train.WordCount() == 0) throw DataError("train_tagger: empty training set");
  TaggerModel model = TaggerModel::Create(config, train, std::move(pretrained), std::move(lm));
  TrainHistory local;
  TrainHistory& hist = history ? *history : local;
  hist = TrainHistory();
  const TrainOptions& opt = config.train;
  std::ostream* log = opt.log;

  for (const Sentence& s : dev.sentences)
    for (const Token& t : s.tokens)
      if (!model.tagset().Contains(t.upos)) ++hist.unseen_dev_labels;
  if (hist.unseen_dev_labels > 0 && log) {
    *log << "train_tagger: " << hist.unseen_dev_labels
         << " dev words carry tags absent from training; scored as errors\n";
  }

  const std::vector<Tensor> train_ctx = PrecomputeContext(model.embedder(), train);
  const std::vector<Tensor> dev_ctx = PrecomputeContext(model.embedder(), dev);
  std::vector<std::vector<size_t>> targets;
  std::vector<size_t> order;
  for (size_t i = 0; i < train.sentences.size(); ++i) {
    std::vector<size_t> ids;
    for (const Token& t : train.sentences[i].tokens) ids.push_back(*model.tagset().Find(t.upos));
    targets.push_back(std::move(ids));
    if (!train.sentences[i].tokens.empty()) order.push_back(i);
  }

  Rng rng(opt.seed + 1);
  Adam adam(opt.adam);
  std::vector<Tensor> best = model.params().Snapshot();
  size_t stale = 0;
  const size_t batch = std::max<size_t>(1, opt.batch_size);
  for (size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    rng.Shuffle(order);
    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size(); start += batch) {
      Tape tape(true, &rng);
      std::vector<Var> losses;
      size_t words = 0;
      for (size_t b = start; b < std::min(order.size(), start + batch); ++b) {
        const size_t i = order[b];
        const Tensor* ctx = train_ctx.empty() ? nullptr : &train_ctx[i];
        const Var scores = model.Scores(tape, train.sentences[i], ctx, &rng);
        losses.push_back(tape.SoftmaxCrossEntropy(scores, targets[i]));
        words += targets[i].size();
      }
      const Var loss = tape.Scale(tape.AddN(losses), 1.0 / static_cast<double>(words));
      epoch_loss += tape.value(loss)[0];
      tape.Backward(loss);
      adam.Step(model.params());
    }
    hist.train_losses.push_back(epoch_loss);

    size_t total = 0, correct = 0;
    for (size_t i = 0; i < dev.sentences.size(); ++i) {
      const Tensor* ctx = dev_ctx.empty() ? nullptr : &dev_ctx[i];
      const std::vector<std::string> tags = model.Predict(dev.sentences[i], ctx);
      for (size_t k = 0; k < tags.size(); ++k) {
        ++total;
        correct += tags[k] == dev.sentences[i].tokens[k].upos;
      }
    }
    const double score = total ? static_cast<double>(correct) / total : 0.0;
    hist.dev_scores.push_back(score);
    if (log) *log << "epoch " << epoch << " loss " << epoch_loss << " dev_upos " << score << "\n";
    if (score > hist.best_score) {
      hist.best_score = score;
      hist.best_epoch = epoch;
      best = model.params().Snapshot();
      stale = 0;
    } else if (++stale >= opt.patience) {
      break;
    }
    if (hist.best_score >= opt.target_score) break;
  }
  model.params().Restore(best);
  return model;
}

}  // namespace udparse
