#ifndef UDPARSE_XLINGUAL_H_
#define UDPARSE_XLINGUAL_H_

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "udparse/conllu.h"
#include "udparse/embed.h"
#include "udparse/parser.h"
#include "udparse/tagger.h"

namespace udparse {

// Word pairs assumed to be translations; by default identical surface forms
// shared by both embedding tables.
struct SeedDictionary {
  std::vector<std::pair<std::string, std::string>> pairs;  // (source, target)
};

// Restricts shared-form seeds to words made only of the selected character
// classes. With every class disabled all shared forms are kept.
struct SeedFilter {
  bool punctuation = false;
  bool digits = false;
  bool latin = false;
  bool any() const { return punctuation || digits || latin; }
};

// Intersection of the two vocabularies in source-table order. Throws when the
// intersection is empty.
SeedDictionary BuildSeedDict(const StaticEmbeddings& src, const StaticEmbeddings& tgt,
                             const SeedFilter& filter = {});

// Two tab-separated words per line; blank lines are ignored.
SeedDictionary ReadSeedDictionary(std::istream& in);
SeedDictionary ReadSeedDictionaryFile(const std::string& path);

// Orthogonal d x d map taking source vectors (as columns) into the target
// space: Q x_src ~ x_tgt.
struct AlignmentMap {
  Tensor q;

  size_t dim() const { return q.rows(); }
  std::vector<Real> Apply(std::span<const Real> x) const;
  // max |Q^T Q - I|
  double OrthogonalityError() const;

  void Save(std::ostream& out) const;
  static AlignmentMap Load(std::istream& in);
};

// Orthogonal Procrustes on length-normalized seed vectors. Pairs with a word
// missing from either table are ignored. A rank-deficient seed matrix is
// reported on `warnings` and the solution is still returned.
AlignmentMap LearnAlignment(const SeedDictionary& dict, const StaticEmbeddings& src,
                            const StaticEmbeddings& tgt, std::ostream* warnings = nullptr);

// Every source vector length-normalized and mapped by Q.
StaticEmbeddings MapEmbeddings(const StaticEmbeddings& src, const AlignmentMap& map);

// One table in the target space: the normalized target vectors followed by
// mapped source words the target table lacks. Shared forms keep the target
// vector.
StaticEmbeddings MergeTables(const StaticEmbeddings& tgt, const StaticEmbeddings& mapped_src);

// Word representation restricted to the fixed pretrained table.
EmbedderConfig PretrainedOnly(EmbedderConfig config);

struct TransferModels {
  ParserModel parser;
  TaggerModel tagger;
  TrainHistory parser_history;
  TrainHistory tagger_history;
};

// Trains a tagger and a parser on the source treebank (plus `target_train`
// when given) whose only word feature is the merged pretrained table.
// Early stopping uses `dev`, or the training data when `dev` is null.
TransferModels BuildTransferModels(const Treebank& source_tb, const StaticEmbeddings& src_emb,
                                   const StaticEmbeddings& tgt_emb, const AlignmentMap& map,
                                   const Treebank* target_train, const Treebank* dev,
                                   const TaggerConfig& tagger_config,
                                   const ParserConfig& parser_config);

ParserModel BuildTransferParser(const Treebank& source_tb, const StaticEmbeddings& src_emb,
                                const StaticEmbeddings& tgt_emb, const AlignmentMap& map,
                                const Treebank* target_train, const Treebank* dev,
                                const ParserConfig& config, TrainHistory* history = nullptr);

struct SourceCandidate {
  std::string name;
  const Treebank* treebank = nullptr;
  const StaticEmbeddings* embeddings = nullptr;
};

struct RankedSource {
  size_t index = 0;  // position in the candidate list
  std::string name;
  double las = 0.0;
};

// Trains a transfer parser per candidate and ranks candidates by LAS on the
// gold-tagged target sample, best first; ties keep input order.
std::vector<RankedSource> SelectSource(const std::vector<SourceCandidate>& candidates,
                                       const Treebank& target_sample,
                                       const StaticEmbeddings& tgt_emb,
                                       const ParserConfig& config,
                                       const SeedFilter& filter = {});

// Default target <- source language pairs for low-resource treebanks.
const std::map<std::string, std::string>& DefaultTransferSources();

}  // namespace udparse

#endif  // UDPARSE_XLINGUAL_H_
