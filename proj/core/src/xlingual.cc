#include "udparse/xlingual.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "udparse/error.h"
#include "udparse/params.h"
#include "udparse/utf8.h"

namespace udparse {

namespace {

bool IsPunctuationChar(const std::string& c) {
  const auto b0 = static_cast<unsigned char>(c[0]);
  if (c.size() == 1) return std::ispunct(b0) != 0;
  if (c.size() == 3) {
    const auto b1 = static_cast<unsigned char>(c[1]);
    // U+2000..U+207F general punctuation, U+3000..U+303F CJK punctuation.
    return (b0 == 0xE2 && (b1 == 0x80 || b1 == 0x81)) || (b0 == 0xE3 && b1 == 0x80);
  }
  return false;
}

bool IsDigitChar(const std::string& c) {
  return c.size() == 1 && std::isdigit(static_cast<unsigned char>(c[0])) != 0;
}

bool IsLatinChar(const std::string& c) {
  const auto b0 = static_cast<unsigned char>(c[0]);
  if (c.size() == 1) return std::isalpha(b0) != 0;
  // U+00C0..U+024F: Latin-1 letters and Latin Extended-A/B.
  return c.size() == 2 && b0 >= 0xC3 && b0 <= 0xC9;
}

bool PassesFilter(const std::string& word, const SeedFilter& f) {
  if (!f.any()) return true;
  for (const std::string& c : utf8::Chars(word)) {
    const bool ok = (f.punctuation && IsPunctuationChar(c)) || (f.digits && IsDigitChar(c)) ||
                    (f.latin && IsLatinChar(c));
    if (!ok) return false;
  }
  return !word.empty();
}

Eigen::VectorXd Normalized(std::span<const Real> v) {
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
  const double norm = x.norm();
  if (norm > 0) x /= norm;
  return x;
}

constexpr const char* kMapParam = "xlingual.q";

}  // namespace

SeedDictionary BuildSeedDict(const StaticEmbeddings& src, const StaticEmbeddings& tgt,
                             const SeedFilter& filter) {
  SeedDictionary dict;
  for (const std::string& w : src.words()) {
    if (tgt.Contains(w) && PassesFilter(w, filter)) dict.pairs.emplace_back(w, w);
  }
  if (dict.pairs.empty()) {
    throw DataError(
        "build_seed_dict: the embedding tables share no usable words; supply a manual seed "
        "dictionary file (two tab-separated words per line)");
  }
  return dict;
}

SeedDictionary ReadSeedDictionary(std::istream& in) {
  SeedDictionary dict;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (utf8::Trim(line).empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError(line_no, "expected two tab-separated words");
    }
    std::pair<std::string, std::string> p(line.substr(0, tab), line.substr(tab + 1));
    if (p.first.empty() || p.second.empty()) throw ParseError(line_no, "empty word");
    if (seen.insert(p).second) dict.pairs.push_back(std::move(p));
  }
  return dict;
}

SeedDictionary ReadSeedDictionaryFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return ReadSeedDictionary(in);
}

std::vector<Real> AlignmentMap::Apply(std::span<const Real> x) const {
  if (x.size() != dim()) throw DimensionError("alignment map: vector dimension mismatch");
  std::vector<Real> y(dim(), 0.0);
  for (size_t i = 0; i < dim(); ++i)
    for (size_t j = 0; j < dim(); ++j) y[i] += q.at(i, j) * x[j];
  return y;
}

double AlignmentMap::OrthogonalityError() const {
  const size_t d = dim();
  double worst = 0.0;
  for (size_t i = 0; i < d; ++i) {
    for (size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (size_t k = 0; k < d; ++k) s += q.at(k, i) * q.at(k, j);
      worst = std::max(worst, std::fabs(s - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

void AlignmentMap::Save(std::ostream& out) const {
  ParameterSet set;
  set.Add(kMapParam, q, false);
  set.Save(out);
}

AlignmentMap AlignmentMap::Load(std::istream& in) {
  ParameterSet set = ParameterSet::ReadAll(in);
  const Parameter* p = set.Find(kMapParam);
  if (!p || p->value.rank() != 2 || p->value.rows() != p->value.cols()) {
    throw DataError("alignment map: container lacks a square " + std::string(kMapParam));
  }
  return AlignmentMap{p->value};
}

AlignmentMap LearnAlignment(const SeedDictionary& dict, const StaticEmbeddings& src,
                            const StaticEmbeddings& tgt, std::ostream* warnings) {
  if (src.dim() != tgt.dim()) {
    throw DimensionError("learn_alignment: source dimension " + std::to_string(src.dim()) +
                         " differs from target dimension " + std::to_string(tgt.dim()));
  }
  const size_t d = src.dim();
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(d, d);  // X^T Y
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);   // X^T X, for the rank check
  size_t used = 0;
  for (const auto& [s, t] : dict.pairs) {
    if (!src.Contains(s) || !tgt.Contains(t)) continue;
    const Eigen::VectorXd x = Normalized(src.Vector(src.Index(s)));
    const Eigen::VectorXd y = Normalized(tgt.Vector(tgt.Index(t)));
    cross += x * y.transpose();
    gram += x * x.transpose();
    ++used;
  }
  if (used == 0) throw DataError("learn_alignment: no seed pair found in both tables");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (warnings) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
    size_t rank = 0;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
      rank += std::fabs(eig.eigenvalues()[i]) > 1e-10 * std::max(top, 1e-300);
    if (rank < d) {
      *warnings << "learn_alignment: warning: seed matrix has rank " << rank << " < " << d
                << " (" << used << " pairs); the map is not unique\n";
    }
  }
  // Maximizing tr(Q^T Y^T X) over orthogonal Q gives Q = V U^T.
  const Eigen::MatrixXd q = svd.matrixV() * svd.matrixU().transpose();
  AlignmentMap map{Tensor::Zeros(d, d)};
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j) map.q.at(i, j) = q(static_cast<Eigen::Index>(i),
                                                      static_cast<Eigen::Index>(j));
  return map;
}

StaticEmbeddings MapEmbeddings(const StaticEmbeddings& src, const AlignmentMap& map) {
  const size_t d = src.dim();
  if (map.dim() != d) throw DimensionError("map_embeddings: map and table dimensions differ");
  std::vector<Real> data;
  data.reserve(src.size() * d);
  for (size_t i = 0; i < src.size(); ++i) {
    const Eigen::VectorXd x = Normalized(src.Vector(i));
    const std::vector<Real> y = map.Apply(std::span<const Real>(x.data(), d));
    data.insert(data.end(), y.begin(), y.end());
  }
  return StaticEmbeddings(src.words(), Tensor::Matrix(src.size(), d, std::move(data)));
}

StaticEmbeddings MergeTables(const StaticEmbeddings& tgt, const StaticEmbeddings& mapped_src) {
  if (tgt.dim() != mapped_src.dim()) {
    throw DimensionError("merge_tables: target and mapped source dimensions differ");
  }
  const size_t d = tgt.dim();
  std::vector<std::string> words;
  std::vector<Real> data;
  for (size_t i = 0; i < tgt.size(); ++i) {
    words.push_back(tgt.words()[i]);
    const Eigen::VectorXd x = Normalized(tgt.Vector(i));
    data.insert(data.end(), x.data(), x.data() + d);
  }
  for (size_t i = 0; i < mapped_src.size(); ++i) {
    if (tgt.Contains(mapped_src.words()[i])) continue;
    words.push_back(mapped_src.words()[i]);
    const auto v = mapped_src.Vector(i);
    data.insert(data.end(), v.begin(), v.end());
  }
  const size_t n = words.size();
  return StaticEmbeddings(std::move(words), Tensor::Matrix(n, d, std::move(data)));
}

EmbedderConfig PretrainedOnly(EmbedderConfig config) {
  config.use_tokens = false;
  config.use_chars = false;
  config.use_pretrained = true;
  config.lm_mode = LmMode::kNone;
  return config;
}

namespace {

struct TransferData {
  Treebank train;
  std::shared_ptr<const StaticEmbeddings> table;
};

TransferData PrepareTransfer(const Treebank& source_tb, const StaticEmbeddings& src_emb,
                             const StaticEmbeddings& tgt_emb, const AlignmentMap& map,
                             const Treebank* target_train) {
  if (src_emb.dim() != tgt_emb.dim() || map.dim() != src_emb.dim()) {
    throw DimensionError("build_transfer_parser: embedding and map dimensions differ");
  }
  TransferData data;
  data.table = std::make_shared<StaticEmbeddings>(MergeTables(tgt_emb, MapEmbeddings(src_emb, map)));
  if (target_train && !target_train->sentences.empty()) {
    data.train = ConcatTreebanks({source_tb, *target_train}, source_tb.name + "+target");
  } else {
    data.train = source_tb;
  }
  return data;
}

}  // namespace

TransferModels BuildTransferModels(const Treebank& source_tb, const StaticEmbeddings& src_emb,
                                   const StaticEmbeddings& tgt_emb, const AlignmentMap& map,
                                   const Treebank* target_train, const Treebank* dev,
                                   const TaggerConfig& tagger_config,
                                   const ParserConfig& parser_config) {
  TransferData data = PrepareTransfer(source_tb, src_emb, tgt_emb, map, target_train);
  const Treebank& early = dev ? *dev : data.train;
  TaggerConfig tc = tagger_config;
  tc.embed = PretrainedOnly(tc.embed);
  tc.embed.dim = tgt_emb.dim();
  ParserConfig pc = parser_config;
  pc.embed = PretrainedOnly(pc.embed);
  pc.embed.dim = tgt_emb.dim();
  TransferModels out;
  out.tagger = TrainTagger(data.train, early, tc, data.table, nullptr, &out.tagger_history);
  out.parser = TrainParser(data.train, early, pc, data.table, nullptr, &out.parser_history);
  return out;
}

ParserModel BuildTransferParser(const Treebank& source_tb, const StaticEmbeddings& src_emb,
                                const StaticEmbeddings& tgt_emb, const AlignmentMap& map,
                                const Treebank* target_train, const Treebank* dev,
                                const ParserConfig& config, TrainHistory* history) {
  TransferData data = PrepareTransfer(source_tb, src_emb, tgt_emb, map, target_train);
  ParserConfig pc = config;
  pc.embed = PretrainedOnly(pc.embed);
  pc.embed.dim = tgt_emb.dim();
  return TrainParser(data.train, dev ? *dev : data.train, pc, data.table, nullptr, history);
}

std::vector<RankedSource> SelectSource(const std::vector<SourceCandidate>& candidates,
                                       const Treebank& target_sample,
                                       const StaticEmbeddings& tgt_emb,
                                       const ParserConfig& config, const SeedFilter& filter) {
  if (candidates.empty()) throw Error("select_source: empty candidate list");
  if (target_sample.WordCount() == 0) throw DataError("select_source: empty target sample");
  std::vector<RankedSource> ranked;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const SourceCandidate& c = candidates[i];
    const SeedDictionary dict = BuildSeedDict(*c.embeddings, tgt_emb, filter);
    const AlignmentMap map = LearnAlignment(dict, *c.embeddings, tgt_emb);
    const ParserModel parser =
        BuildTransferParser(*c.treebank, *c.embeddings, tgt_emb, map, nullptr, nullptr, config);
    ranked.push_back({i, c.name, DevLas(parser, target_sample)});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedSource& a, const RankedSource& b) { return a.las > b.las; });
  return ranked;
}

const std::map<std::string, std::string>& DefaultTransferSources() {
  static const std::map<std::string, std::string> pairs = {
      {"br", "ga"}, {"fo", "no"}, {"th", "zh"},  {"hy", "et"},
      {"kk", "tr"}, {"bxr", "hi"}, {"kmr", "fa"}, {"hsb", "pl"}};
  return pairs;
}

}  // namespace udparse
