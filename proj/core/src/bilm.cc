#include "udparse/bilm.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>
#include "udparse/error.h"
#include "udparse/utf8.h"

namespace udparse {
namespace {

using json = nlohmann::json;

constexpr size_t kUnkChar = 0;
constexpr size_t kBowChar = 1;
constexpr size_t kEowChar = 2;
constexpr size_t kBosChar = 3;
constexpr size_t kEosChar = 4;

const std::vector<std::string>& ReservedChars() {
  static const std::vector<std::string> chars = {"<unk-char>", "<bow>", "<eow>",
                                                 "<bos-char>", "<eos-char>"};
  return chars;
}

json ConfigToJson(const BiLmConfig& c) {
  return {{"char_dim", c.char_dim},
          {"filter_widths", c.filter_widths},
          {"filters_per_width", c.filters_per_width},
          {"hidden", c.hidden},
          {"layers", c.layers},
          {"max_word_chars", c.max_word_chars},
          {"sampled_softmax", c.sampled_softmax},
          {"window", c.window},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"clip_norm", c.clip_norm},
          {"seed", c.seed}};
}

BiLmConfig ConfigFromJson(const json& j) {
  BiLmConfig c;
  c.char_dim = j.at("char_dim");
  c.filter_widths = j.at("filter_widths").get<std::vector<size_t>>();
  c.filters_per_width = j.at("filters_per_width");
  c.hidden = j.at("hidden");
  c.layers = j.at("layers");
  c.max_word_chars = j.at("max_word_chars");
  c.sampled_softmax = j.at("sampled_softmax");
  c.window = j.at("window");
  c.epochs = j.at("epochs");
  c.batch_size = j.at("batch_size");
  c.learning_rate = j.at("learning_rate");
  c.clip_norm = j.at("clip_norm");
  c.seed = j.at("seed");
  return c;
}

}  // namespace

LmMode ParseLmMode(const std::string& name) {
  if (name == "none") return LmMode::kNone;
  if (name == "layer0" || name == "h0") return LmMode::kLayer0;
  if (name == "sum012" || name == "h012") return LmMode::kSum012;
  throw Error("unknown LM mode '" + name + "' (expected none, layer0 or sum012)");
}

std::string LmModeName(LmMode mode) {
  switch (mode) {
    case LmMode::kNone:
      return "none";
    case LmMode::kLayer0:
      return "layer0";
    case LmMode::kSum012:
      return "sum012";
  }
  return "none";
}

BiLmModel BiLmModel::Create(const std::vector<std::vector<std::string>>& corpus,
                            const BiLmConfig& config) {
  BiLmModel m;
  m.config_ = config;
  m.words_.Add(kUnk);
  m.words_.Add(kBos);
  m.words_.Add(kEos);
  std::map<std::string, size_t> counts;
  std::vector<std::string> order;
  for (const auto& sentence : corpus) {
    for (const std::string& w : sentence) {
      if (counts[w]++ == 0) order.push_back(w);
      for (const std::string& c : utf8::Chars(w)) m.chars_.Add(c);
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
    return counts[a] > counts[b];
  });
  for (const std::string& w : order) m.words_.Add(w);
  Vocab chars;
  for (const std::string& r : ReservedChars()) chars.Add(r);
  for (const std::string& c : m.chars_.items()) chars.Add(c);
  m.chars_ = std::move(chars);
  Rng rng(config.seed);
  m.Build(rng);
  return m;
}

void BiLmModel::Build(Rng& rng) {
  const BiLmConfig& c = config_;
  params_.Add("lm.chars", {chars_.size(), c.char_dim}, Init::kNormal, rng);
  for (size_t w : c.filter_widths) {
    const std::string name = "lm.conv" + std::to_string(w);
    params_.Add(name + ".w", {c.filters_per_width, w * c.char_dim}, Init::kXavier, rng);
    params_.Add(name + ".b", {1, c.filters_per_width}, Init::kZeros, rng);
  }
  nn::Dense::Create(params_, "lm.proj", c.filters_per_width * c.filter_widths.size(),
                    c.hidden, rng);
  for (size_t l = 0; l < c.layers; ++l) {
    nn::Lstm::Create(params_, "lm.fw" + std::to_string(l), c.hidden, c.hidden, rng);
    nn::Lstm::Create(params_, "lm.bw" + std::to_string(l), c.hidden, c.hidden, rng);
  }
  params_.Add("lm.softmax.w", {words_.size(), c.hidden}, Init::kXavier, rng);
  params_.Add("lm.softmax.b", {1, words_.size()}, Init::kZeros, rng);
  Bind();
}

void BiLmModel::Bind() {
  char_table_ = &params_.Get("lm.chars");
  conv_filters_.clear();
  conv_biases_.clear();
  for (size_t w : config_.filter_widths) {
    const std::string name = "lm.conv" + std::to_string(w);
    conv_filters_.push_back(&params_.Get(name + ".w"));
    conv_biases_.push_back(&params_.Get(name + ".b"));
  }
  token_projection_ = nn::Dense::Bind(params_, "lm.proj");
  forward_.clear();
  backward_.clear();
  for (size_t l = 0; l < config_.layers; ++l) {
    forward_.push_back(nn::Lstm::Bind(params_, "lm.fw" + std::to_string(l)));
    backward_.push_back(nn::Lstm::Bind(params_, "lm.bw" + std::to_string(l)));
  }
  softmax_weight_ = &params_.Get("lm.softmax.w");
  softmax_bias_ = &params_.Get("lm.softmax.b");
}

std::vector<size_t> BiLmModel::CharIds(const std::string& word) const {
  std::vector<size_t> ids = {kBowChar};
  if (word == kBos) {
    ids.push_back(kBosChar);
  } else if (word == kEos) {
    ids.push_back(kEosChar);
  } else {
    for (const std::string& c : utf8::Chars(word)) {
      if (ids.size() > config_.max_word_chars) break;
      ids.push_back(chars_.Get(c, kUnkChar));
    }
  }
  ids.push_back(kEowChar);
  return ids;
}

size_t BiLmModel::OutputId(const std::string& word) const { return words_.Get(word, 0); }

BiLmModel::States BiLmModel::Run(Tape& tape, const std::vector<std::string>& sentence) const {
  std::vector<std::string> padded;
  padded.reserve(sentence.size() + 2);
  padded.push_back(kBos);
  padded.insert(padded.end(), sentence.begin(), sentence.end());
  padded.push_back(kEos);

  std::vector<Var> filters, biases;
  for (size_t k = 0; k < conv_filters_.size(); ++k) {
    filters.push_back(tape.Param(*conv_filters_[k]));
    biases.push_back(tape.Param(*conv_biases_[k]));
  }
  std::vector<Var> rows;
  rows.reserve(padded.size());
  for (const std::string& w : padded) {
    const std::vector<size_t> ids = CharIds(w);
    const Var chars = tape.Lookup(*char_table_, ids);
    std::vector<Var> pooled;
    for (size_t k = 0; k < filters.size(); ++k) {
      pooled.push_back(tape.Tanh(
          tape.ConvMaxPool(chars, filters[k], biases[k], config_.filter_widths[k])));
    }
    rows.push_back(tape.Concat(pooled));
  }
  States states;
  states.tokens = token_projection_.Apply(tape, tape.StackRows(rows));
  Var fw = states.tokens, bw = states.tokens;
  for (size_t l = 0; l < forward_.size(); ++l) {
    fw = forward_[l].Run(tape, fw, false);
    bw = backward_[l].Run(tape, bw, true);
    states.forward.push_back(fw);
    states.backward.push_back(bw);
  }
  return states;
}

Var BiLmModel::Loss(Tape& tape, const std::vector<std::string>& sentence, size_t window,
                    size_t* predictions) const {
  const States states = Run(tape, sentence);
  const size_t m = sentence.size() + 2;
  std::vector<size_t> ids(m);
  ids[0] = OutputId(kBos);
  for (size_t i = 0; i < sentence.size(); ++i) ids[i + 1] = OutputId(sentence[i]);
  ids[m - 1] = OutputId(kEos);

  const Var top_fw = states.forward.empty() ? states.tokens : states.forward.back();
  const Var top_bw = states.backward.empty() ? states.tokens : states.backward.back();
  // Forward: state t predicts t+1. Backward: state t predicts t-1.
  std::vector<size_t> fw_rows, fw_targets, bw_rows, bw_targets;
  for (size_t t = 0; t + 1 < m; ++t) {
    fw_rows.push_back(t);
    fw_targets.push_back(ids[t + 1]);
    bw_rows.push_back(t + 1);
    bw_targets.push_back(ids[t]);
  }
  if (predictions) *predictions = fw_rows.size() + bw_rows.size();

  const Var weight = tape.Param(*softmax_weight_);
  const Var bias = tape.Param(*softmax_bias_);
  const size_t vocab = words_.size();
  auto side_loss = [&](Var top, const std::vector<size_t>& rows,
                       const std::vector<size_t>& targets) -> Var {
    const Var states_sel = tape.Rows(top, rows);
    if (window == 0) {
      return tape.SoftmaxCrossEntropy(tape.Affine(states_sel, weight, bias), targets);
    }
    const size_t width = std::min(window, vocab);
    std::vector<Var> terms;
    for (size_t r = 0; r < rows.size(); ++r) {
      const size_t target = targets[r];
      size_t lo = target >= width / 2 ? target - width / 2 : 0;
      lo = std::min(lo, vocab - width);
      std::vector<size_t> cand(width);
      std::iota(cand.begin(), cand.end(), lo);
      const Var logits = tape.Affine(tape.Row(states_sel, r), tape.Rows(weight, cand),
                                     tape.SliceCols(bias, lo, width));
      const size_t local[1] = {target - lo};
      terms.push_back(tape.SoftmaxCrossEntropy(logits, local));
    }
    return tape.AddN(terms);
  };
  const Var parts[2] = {side_loss(top_fw, fw_rows, fw_targets),
                        side_loss(top_bw, bw_rows, bw_targets)};
  return tape.Add(parts[0], parts[1]);
}

std::vector<Tensor> BiLmModel::LayerStates(const std::vector<std::string>& sentence) const {
  Tape tape(false);
  const States states = Run(tape, sentence);
  const size_t n = sentence.size();
  const size_t h = config_.hidden;
  std::vector<Tensor> layers;
  auto take = [&](Var a, Var b) {
    Tensor out = Tensor::Zeros(n, 2 * h);
    const Tensor& av = tape.value(a);
    const Tensor& bv = tape.value(b);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < h; ++j) {
        out.at(i, j) = av.at(i + 1, j);
        out.at(i, h + j) = bv.at(i + 1, j);
      }
    layers.push_back(std::move(out));
  };
  take(states.tokens, states.tokens);
  for (size_t l = 0; l < states.forward.size(); ++l) take(states.forward[l], states.backward[l]);
  return layers;
}

Tensor BiLmModel::Contextualize(const std::vector<std::string>& sentence, LmMode mode) const {
  std::vector<Tensor> layers = LayerStates(sentence);
  if (mode == LmMode::kLayer0) return layers[0];
  if (mode == LmMode::kNone) return Tensor::Zeros(sentence.size(), output_dim());
  Tensor sum = layers[0];
  for (size_t l = 1; l < layers.size(); ++l)
    for (size_t i = 0; i < sum.size(); ++i) sum[i] += layers[l][i];
  return sum;
}

double BiLmModel::Perplexity(const std::vector<std::vector<std::string>>& corpus) const {
  double nll = 0.0;
  size_t count = 0;
  const Parameter& weight = *softmax_weight_;
  const Parameter& bias = *softmax_bias_;
  for (const auto& sentence : corpus) {
    if (sentence.empty()) continue;
    Tape tape(false);
    const States states = Run(tape, sentence);
    const Var top = states.forward.empty() ? states.tokens : states.forward.back();
    std::vector<size_t> rows, targets;
    for (size_t i = 0; i < sentence.size(); ++i) {
      rows.push_back(i);
      targets.push_back(OutputId(sentence[i]));
    }
    const Var logits =
        tape.Affine(tape.Rows(top, rows), tape.Constant(weight.value), tape.Constant(bias.value));
    nll += tape.value(tape.SoftmaxCrossEntropy(logits, targets))[0];
    count += rows.size();
  }
  if (count == 0) throw DataError("perplexity: empty corpus");
  return std::exp(nll / static_cast<double>(count));
}

void BiLmModel::Save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  json j = {{"format_version", kFormatVersion},
            {"kind", "bilm"},
            {"config", ConfigToJson(config_)},
            {"words", words_.items()},
            {"chars", chars_.items()}};
  std::ofstream meta(dir + "/model.json");
  meta << j.dump(1) << "\n";
  std::ofstream params(dir + "/params.txt");
  params_.Save(params);
  if (!meta || !params) throw DataError("cannot write language model to " + dir);
}

BiLmModel BiLmModel::Load(const std::string& dir) {
  std::ifstream meta(dir + "/model.json");
  if (!meta) throw DataError("cannot open " + dir + "/model.json");
  const json j = json::parse(meta);
  if (j.value("kind", "") != "bilm") throw DataError(dir + " is not a language model");
  if (j.at("format_version").get<int>() != kFormatVersion) {
    throw VersionError("language model format version mismatch in " + dir);
  }
  BiLmModel m;
  m.config_ = ConfigFromJson(j.at("config"));
  m.words_ = Vocab(j.at("words").get<std::vector<std::string>>());
  m.chars_ = Vocab(j.at("chars").get<std::vector<std::string>>());
  Rng rng(m.config_.seed);
  m.Build(rng);
  std::ifstream params(dir + "/params.txt");
  if (!params) throw DataError("cannot open " + dir + "/params.txt");
  m.params_.Load(params);
  return m;
}

BiLmModel TrainBiLm(const std::vector<std::vector<std::string>>& corpus,
                    const BiLmConfig& config) {
  size_t tokens = 0;
  for (const auto& s : corpus) tokens += s.size();
  if (tokens == 0) throw DataError("train_bilm: empty corpus");
  if (config.sampled_softmax && config.window < 1) {
    throw Error("train_bilm: sampled softmax window must be at least 1");
  }
  BiLmModel model = BiLmModel::Create(corpus, config);
  const size_t window = config.sampled_softmax ? config.window : 0;
  Rng rng(config.seed + 1);
  Adam adam(AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8, config.clip_norm});
  std::vector<size_t> order;
  for (size_t i = 0; i < corpus.size(); ++i)
    if (!corpus[i].empty()) order.push_back(i);
  for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(order);
    double total = 0.0;
    size_t total_predictions = 0;
    size_t in_batch = 0;
    for (size_t idx : order) {
      Tape tape(true, &rng);
      size_t predictions = 0;
      const Var loss = model.Loss(tape, corpus[idx], window, &predictions);
      total += tape.value(loss)[0];
      total_predictions += predictions;
      tape.Backward(tape.Scale(loss, 1.0 / static_cast<double>(predictions)));
      if (++in_batch == config.batch_size) {
        adam.Step(model.params());
        in_batch = 0;
      }
    }
    if (in_batch) adam.Step(model.params());
    if (config.verbose) {
      std::cerr << "bilm epoch " << epoch + 1 << " loss/pred "
                << total / static_cast<double>(std::max<size_t>(total_predictions, 1))
                << "\n";
    }
  }
  return model;
}

}  // namespace udparse
