#include "udparse/parser.h"

#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "udparse/error.h"

namespace udparse {

using json = nlohmann::json;

namespace {

constexpr const char* kWordPrefix = "word";
constexpr const char* kUnknownTag = "<unk>";
constexpr Real kMasked = -1e9;
constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();

json ParserConfigToJson(const ParserConfig& c) {
  return {{"tag_dim", c.tag_dim},
          {"hidden", c.hidden},
          {"layers", c.layers},
          {"arc_mlp", c.arc_mlp},
          {"rel_mlp", c.rel_mlp},
          {"decoder", DecoderName(c.decoder)},
          {"train", TrainOptionsToJson(c.train)}};
}

// Row-wise softmax of a plain tensor.
Tensor SoftmaxRows(const Tensor& t) {
  Tensor out = t;
  for (size_t r = 0; r < t.rows(); ++r) {
    auto row = out.row(r);
    Real mx = row[0];
    for (Real v : row) mx = std::max(mx, v);
    Real z = 0.0;
    for (Real& v : row) z += (v = std::exp(v - mx));
    for (Real& v : row) v /= z;
  }
  return out;
}

size_t ArgMax(std::span<const Real> row) {
  size_t best = 0;
  for (size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

}  // namespace

Tensor ArcLogProbabilities(const Tensor& arc) {
  const size_t m = arc.rows();
  Tensor lp = Tensor::Zeros(m, m);
  for (size_t d = 1; d < m; ++d) {
    Real mx = kNegInf;
    for (size_t h = 0; h < m; ++h)
      if (h != d) mx = std::max(mx, arc.at(h, d));
    Real z = 0.0;
    for (size_t h = 0; h < m; ++h)
      if (h != d) z += std::exp(arc.at(h, d) - mx);
    const Real lse = mx + std::log(z);
    for (size_t h = 0; h < m; ++h) lp.at(h, d) = h == d ? kNegInf : arc.at(h, d) - lse;
  }
  return lp;
}

Tensor ArcProbabilities(const Tensor& arc) {
  const size_t m = arc.rows();
  Tensor p = Tensor::Zeros(m, m);
  for (size_t d = 1; d < m; ++d) {
    Real mx = kNegInf;
    for (size_t h = 0; h < m; ++h)
      if (h != d) mx = std::max(mx, arc.at(h, d));
    Real z = 0.0;
    for (size_t h = 0; h < m; ++h)
      if (h != d) z += (p.at(h, d) = std::exp(arc.at(h, d) - mx));
    for (size_t h = 0; h < m; ++h) p.at(h, d) /= z;
  }
  return p;
}

void ParserModel::Declare(Rng& rng) {
  const ParserConfig& c = config_;
  const size_t in = c.embed.dim + c.tag_dim;
  if (c.tag_dim > 0) {
    tag_table_ = &params_.Add("parser.tags", {tags_.size(), c.tag_dim}, Init::kNormal, rng);
  }
  root_ = &params_.Add("parser.root", {1, in}, Init::kNormal, rng);
  bilstm_ = nn::BiLstm::Create(params_, "parser.lstm", in, c.hidden, c.layers, rng);
  const size_t top = bilstm_.output_dim(in);
  arc_dep_ = nn::Mlp::Create(params_, "parser.arc_dep", top, c.arc_mlp, rng);
  arc_head_ = nn::Mlp::Create(params_, "parser.arc_head", top, c.arc_mlp, rng);
  rel_dep_ = nn::Mlp::Create(params_, "parser.rel_dep", top, c.rel_mlp, rng);
  rel_head_ = nn::Mlp::Create(params_, "parser.rel_head", top, c.rel_mlp, rng);
  arc_weight_ = &params_.Add("parser.arc.w", {c.arc_mlp, c.arc_mlp}, Init::kXavier, rng);
  arc_bias_ = &params_.Add("parser.arc.b", {c.arc_mlp, 1}, Init::kZeros, rng);
  rel_bilinear_ = &params_.Add("parser.rel.u", {relations_.size(), c.rel_mlp, c.rel_mlp},
                               Init::kXavier, rng);
  rel_linear_ =
      nn::Dense::Create(params_, "parser.rel.w", 2 * c.rel_mlp, relations_.size(), rng);
}

ParserModel ParserModel::Create(const ParserConfig& config, const Treebank& train,
                                std::shared_ptr<const StaticEmbeddings> pretrained,
                                std::shared_ptr<const BiLmModel> lm) {
  ParserModel m;
  m.config_ = config;
  m.tags_.Add(kUnknownTag);
  for (const Sentence& s : train.sentences) {
    for (const Token& t : s.tokens) {
      m.tags_.Add(t.upos);
      if (t.deprel) m.relations_.Add(*t.deprel);
    }
  }
  if (m.relations_.size() == 0) throw DataError("train_parser: no annotated relations");
  Rng rng(config.train.seed);
  m.embedder_ = WordEmbedder::Create(m.params_, kWordPrefix, config.embed, {&train},
                                     std::move(pretrained), std::move(lm), rng);
  m.Declare(rng);
  return m;
}

ParserModel::Graph ParserModel::Forward(Tape& tape, const Sentence& s, const Tensor* context,
                                        Rng* rng) const {
  const double dropout = config_.train.dropout;
  Var x = embedder_.Compose(tape, s.Forms(), context, rng);
  if (tag_table_) {
    std::vector<size_t> ids;
    ids.reserve(s.size());
    for (const Token& t : s.tokens) ids.push_back(tags_.Get(t.upos, 0));
    const Var parts[2] = {x, tape.Lookup(*tag_table_, ids)};
    x = tape.Concat(parts);
  }
  const Var rows[2] = {tape.Param(*root_), x};
  x = tape.Dropout(tape.StackRows(rows), dropout);
  const Var h = bilstm_.Run(tape, x, dropout);
  const Var ad = arc_dep_.Apply(tape, h, dropout);
  const Var ah = arc_head_.Apply(tape, h, dropout);
  // arc_t[d][h] = ah_h W ad_d + ah_h b
  const Var bilinear =
      tape.MatMul(tape.MatMul(ad, tape.Transpose(tape.Param(*arc_weight_))), tape.Transpose(ah));
  const Var head_bias = tape.Transpose(tape.MatMul(ah, tape.Param(*arc_bias_)));
  Graph g;
  g.arc_t = tape.Add(bilinear, head_bias);
  g.rel_dep = rel_dep_.Apply(tape, h, dropout);
  g.rel_head = rel_head_.Apply(tape, h, dropout);
  return g;
}

Var ParserModel::Loss(Tape& tape, const Sentence& s, const Tensor* context, Rng* rng) const {
  const size_t n = s.size();
  const Graph g = Forward(tape, s, context, rng);
  std::vector<size_t> words(n), heads(n), rels(n);
  Tensor mask = Tensor::Zeros(n, n + 1);
  for (size_t i = 0; i < n; ++i) {
    const Token& t = s.tokens[i];
    words[i] = i + 1;
    heads[i] = static_cast<size_t>(*t.head);
    rels[i] = relations_.Get(*t.deprel, 0);
    mask.at(i, i + 1) = kMasked;
  }
  const Var arc_logits = tape.Add(tape.Rows(g.arc_t, words), tape.Constant(std::move(mask)));
  const Var arc_loss = tape.SoftmaxCrossEntropy(arc_logits, heads);
  const Var dep = tape.Rows(g.rel_dep, words);
  const Var head = tape.Rows(g.rel_head, heads);
  const Var pair[2] = {dep, head};
  const Var rel_logits = tape.Add(tape.Bilinear(head, tape.Param(*rel_bilinear_), dep),
                                  rel_linear_.Apply(tape, tape.Concat(pair)));
  return tape.Add(arc_loss, tape.SoftmaxCrossEntropy(rel_logits, rels));
}

ScoreMatrices ParserModel::Score(const Sentence& s, const Tensor* context) const {
  Tape tape(false);
  const Graph g = Forward(tape, s, context, nullptr);
  const Tensor& at = tape.value(g.arc_t);
  const size_t m = at.rows();
  ScoreMatrices out;
  out.arc = Tensor::Zeros(m, m);
  for (size_t h = 0; h < m; ++h)
    for (size_t d = 0; d < m; ++d) out.arc.at(h, d) = h == d ? kNegInf : at.at(d, h);
  out.rel_head = tape.value(g.rel_head);
  out.rel_dep = tape.value(g.rel_dep);
  return out;
}

Tensor ParserModel::RelScores(const ScoreMatrices& scores, const std::vector<int>& heads) const {
  const size_t n = heads.size();
  if (n == 0) return Tensor::Zeros(0, relations_.size());
  const size_t width = scores.rel_dep.cols();
  Tensor dep = Tensor::Zeros(n, width), head = Tensor::Zeros(n, width);
  for (size_t i = 0; i < n; ++i) {
    const auto d = scores.rel_dep.row(i + 1);
    const auto h = scores.rel_head.row(static_cast<size_t>(heads[i]));
    std::copy(d.begin(), d.end(), dep.row(i).begin());
    std::copy(h.begin(), h.end(), head.row(i).begin());
  }
  Tape tape(false);
  const Var dv = tape.Constant(std::move(dep));
  const Var hv = tape.Constant(std::move(head));
  const Var pair[2] = {dv, hv};
  // Parameters enter as constants so the scoring pass never touches gradients.
  const Var u = tape.Constant(rel_bilinear_->value);
  const Var w = tape.Constant(rel_linear_.weight->value);
  const Var b = tape.Constant(rel_linear_.bias->value);
  return tape.value(tape.Add(tape.Bilinear(hv, u, dv), tape.Affine(tape.Concat(pair), w, b)));
}

DependencyTree ParserModel::Decode(const ScoreMatrices& scores) const {
  DependencyTree tree;
  if (scores.words() == 0) return tree;
  tree.heads = DecodeHeads(scores.arc, config_.decoder);
  const Tensor rel = RelScores(scores, tree.heads);
  for (size_t i = 0; i < tree.heads.size(); ++i) tree.rels.push_back(relations_[ArgMax(rel.row(i))]);
  return tree;
}

DependencyTree ParserModel::Parse(const Sentence& s, const Tensor* context) const {
  if (s.tokens.empty()) return {};
  return Decode(Score(s, context));
}

namespace {

void ApplyTree(const DependencyTree& tree, Sentence& s) {
  for (size_t i = 0; i < s.tokens.size(); ++i) {
    s.tokens[i].head = tree.heads[i];
    s.tokens[i].deprel = tree.rels[i];
  }
}

}  // namespace

void ParserModel::ParseTreebank(Treebank& tb) const {
  for (Sentence& s : tb.sentences) ApplyTree(Parse(s), s);
}

void ParserModel::Save(const std::string& dir) const {
  const json meta = {{"format_version", kFormatVersion},
                     {"kind", "parser"},
                     {"config", ParserConfigToJson(config_)},
                     {"relations", relations_.items()},
                     {"tags", tags_.items()},
                     {"embedder", embedder_.ToJson()},
                     {"has_pretrained", embedder_.pretrained() != nullptr},
                     {"has_lm", embedder_.lm() != nullptr}};
  WriteModelFiles(dir, meta, params_);
  SaveResources(dir, embedder_);
}

ParserModel ParserModel::Load(const std::string& dir) {
  const json meta = ReadModelJson(dir, "parser", kFormatVersion);
  ParserModel m;
  const json& c = meta.at("config");
  m.config_.tag_dim = c.at("tag_dim");
  m.config_.hidden = c.at("hidden");
  m.config_.layers = c.at("layers");
  m.config_.arc_mlp = c.at("arc_mlp");
  m.config_.rel_mlp = c.at("rel_mlp");
  m.config_.decoder = ParseDecoder(c.at("decoder"));
  m.config_.train = TrainOptionsFromJson(c.at("train"));
  m.config_.embed = EmbedderConfigFromJson(meta.at("embedder").at("config"));
  m.relations_ = Vocab(meta.at("relations").get<std::vector<std::string>>());
  m.tags_ = Vocab(meta.at("tags").get<std::vector<std::string>>());
  Rng rng(m.config_.train.seed);
  m.embedder_ = WordEmbedder::FromJson(m.params_, kWordPrefix, meta.at("embedder"),
                                       LoadPretrained(dir, meta), LoadLm(dir, meta), rng);
  m.Declare(rng);
  ReadModelParams(dir, m.params_);
  return m;
}

double DevLas(const ParserModel& model, const Treebank& dev, const std::vector<Tensor>& context) {
  size_t total = 0, correct = 0;
  for (size_t i = 0; i < dev.sentences.size(); ++i) {
    const Sentence& s = dev.sentences[i];
    const DependencyTree tree = model.Parse(s, context.empty() ? nullptr : &context[i]);
    for (size_t k = 0; k < s.tokens.size(); ++k) {
      const Token& t = s.tokens[k];
      if (!t.head) continue;
      ++total;
      correct += tree.heads[k] == *t.head && tree.rels[k] == *t.deprel;
    }
  }
  return total ? static_cast<double>(correct) / total : 0.0;
}

ParserModel TrainParser(const Treebank& train, const Treebank& dev, const ParserConfig& config,
                        std::shared_ptr<const StaticEmbeddings> pretrained,
                        std::shared_ptr<const BiLmModel> lm, TrainHistory* history) {
  if (train.WordCount() == 0) throw DataError("train_parser: empty training set");
  TrainHistory local;
  TrainHistory& hist = history ? *history : local;
  hist = TrainHistory();
  const TrainOptions& opt = config.train;
  std::ostream* log = opt.log;

  std::vector<size_t> order;
  for (size_t i = 0; i < train.sentences.size(); ++i) {
    const Sentence& s = train.sentences[i];
    if (s.tokens.empty()) continue;
    if (!s.FullyAnnotated() || !s.IsTree()) {
      ++hist.skipped_sentences;
      if (log) *log << "train_parser: warning: skipping sentence " << i + 1
                    << " whose gold annotation is not a tree\n";
      continue;
    }
    order.push_back(i);
  }
  if (order.empty()) throw DataError("train_parser: no sentence with a valid gold tree");

  ParserModel model = ParserModel::Create(config, train, std::move(pretrained), std::move(lm));
  const std::vector<Tensor> train_ctx = PrecomputeContext(model.embedder(), train);
  const std::vector<Tensor> dev_ctx = PrecomputeContext(model.embedder(), dev);

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
        losses.push_back(model.Loss(tape, train.sentences[i], ctx, &rng));
        words += train.sentences[i].size();
      }
      const Var loss = tape.Scale(tape.AddN(losses), 1.0 / static_cast<double>(words));
      epoch_loss += tape.value(loss)[0];
      tape.Backward(loss);
      adam.Step(model.params());
    }
    hist.train_losses.push_back(epoch_loss);
    const double score = DevLas(model, dev, dev_ctx);
    hist.dev_scores.push_back(score);
    if (log) *log << "epoch " << epoch << " loss " << epoch_loss << " dev_las " << score << "\n";
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

EnsembleMode ParseEnsembleMode(const std::string& name) {
  if (name == "average") return EnsembleMode::kAverage;
  if (name == "vote") return EnsembleMode::kVote;
  throw Error("unknown ensemble mode '" + name + "' (expected average or vote)");
}

DependencyTree EnsembleParse(const std::vector<const ParserModel*>& models, const Sentence& s,
                             EnsembleMode mode) {
  if (models.empty()) throw Error("ensemble_parse: no models");
  for (const ParserModel* m : models) {
    if (!(m->relations() == models[0]->relations()) || !(m->tags() == models[0]->tags())) {
      throw DataError("ensemble_parse: models have mismatched label sets");
    }
  }
  DependencyTree tree;
  const size_t n = s.size();
  if (n == 0) return tree;
  std::vector<ScoreMatrices> scores;
  for (const ParserModel* m : models) scores.push_back(m->Score(s));

  const size_t dim = n + 1;
  Tensor combined = Tensor::Zeros(dim, dim);
  std::vector<Tensor> probs;
  for (const ScoreMatrices& sc : scores) probs.push_back(ArcProbabilities(sc.arc));
  Tensor mean = Tensor::Zeros(dim, dim);
  for (const Tensor& p : probs)
    for (size_t k = 0; k < p.size(); ++k) mean[k] += p[k] / static_cast<Real>(models.size());

  if (mode == EnsembleMode::kAverage) {
    // log(mean_m p_m) evaluated as a log-sum-exp of per-model log
    // probabilities so that tiny probabilities keep their exact margins.
    std::vector<Tensor> log_probs;
    for (const ScoreMatrices& sc : scores) log_probs.push_back(ArcLogProbabilities(sc.arc));
    const Real log_m = std::log(static_cast<Real>(models.size()));
    for (size_t h = 0; h < dim; ++h) {
      for (size_t d = 1; d < dim; ++d) {
        if (h == d) {
          combined.at(h, d) = kNegInf;
          continue;
        }
        Real mx = kNegInf;
        for (const Tensor& lp : log_probs) mx = std::max(mx, lp.at(h, d));
        Real z = 0.0;
        for (const Tensor& lp : log_probs) z += std::exp(lp.at(h, d) - mx);
        combined.at(h, d) = models.size() == 1 ? mx : mx + (std::log(z) - log_m);
      }
    }
  } else {
    // Head votes; the averaged probability (< 1) only breaks ties.
    for (size_t m = 0; m < models.size(); ++m) {
      const std::vector<int> heads = DecodeHeads(scores[m].arc, models[m]->config().decoder);
      for (size_t i = 0; i < n; ++i) combined.at(static_cast<size_t>(heads[i]), i + 1) += 1.0;
    }
    for (size_t h = 0; h < dim; ++h)
      for (size_t d = 0; d < dim; ++d)
        combined.at(h, d) = h == d ? kNegInf : combined.at(h, d) + 1e-3 * mean.at(h, d);
  }
  tree.heads = DecodeHeads(combined, models[0]->config().decoder);

  Tensor rel;
  for (size_t m = 0; m < models.size(); ++m) {
    const Tensor p = SoftmaxRows(models[m]->RelScores(scores[m], tree.heads));
    if (m == 0) {
      rel = p;
    } else {
      for (size_t k = 0; k < p.size(); ++k) rel[k] += p[k];
    }
  }
  for (size_t i = 0; i < n; ++i) tree.rels.push_back(models[0]->relations()[ArgMax(rel.row(i))]);
  return tree;
}

void EnsembleParseTreebank(const std::vector<const ParserModel*>& models, Treebank& tb,
                           EnsembleMode mode) {
  for (Sentence& s : tb.sentences) {
    if (s.tokens.empty()) continue;
    ApplyTree(EnsembleParse(models, s, mode), s);
  }
}

}  // namespace udparse
