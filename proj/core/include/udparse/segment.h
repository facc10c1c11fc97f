#ifndef UDPARSE_SEGMENT_H_
#define UDPARSE_SEGMENT_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "udparse/autodiff.h"
#include "udparse/bilm.h"
#include "udparse/conllu.h"
#include "udparse/embed.h"
#include "udparse/nn.h"
#include "udparse/training.h"
#include "udparse/vocab.h"

namespace udparse {

// [begin, end) byte offsets into the text being segmented.
using TextSpan = std::pair<size_t, size_t>;

// ---------------------------------------------------------------------------
// Sentence splitting

enum class SplitMode {
  kRules,       // sentence-final punctuation followed by a plausible start
  kWhitespace,  // long whitespace runs only
};

SplitMode ParseSplitMode(const std::string& name);
std::string SplitModeName(SplitMode mode);

// A whitespace run ends a sentence in whitespace mode when it contains a
// newline or at least `min_spaces` space characters.
struct SplitThreshold {
  bool newline = true;
  size_t min_spaces = 2;
};

// Spans are trimmed and together cover every non-whitespace character once.
std::vector<TextSpan> SplitSentences(std::string_view text, SplitMode mode,
                                     const SplitThreshold& threshold = {});

// ---------------------------------------------------------------------------
// BIES labels

enum Bies : uint8_t { kB = 0, kI = 1, kE = 2, kS = 3 };
inline constexpr size_t kBiesLabels = 4;

char BiesChar(Bies b);

// Labels for consecutive tokens of the given unit lengths (each >= 1).
std::vector<Bies> BiesEncode(const std::vector<size_t>& token_lengths);

// Highest-scoring label path obeying B->{I,E}, I->{I,E}, E->{B,S}, S->{B,S},
// start in {B,S} and end in {E,S}. `scores` is n x 4 and additive (e.g. log
// probabilities). When `boundary_after` is given, a true entry forces a token
// end after that unit. Ties prefer the lower label.
std::vector<Bies> BiesViterbi(const Tensor& scores,
                              const std::vector<bool>* boundary_after = nullptr);

// Unit-index spans of a valid label sequence; arbitrary sequences are first
// repaired by the constrained decoder treating them as one-hot scores.
std::vector<TextSpan> BiesDecode(const std::vector<Bies>& labels);
bool IsValidBies(const std::vector<Bies>& labels);

// ---------------------------------------------------------------------------
// Segmentation units

enum class UnitKind {
  kChar,      // every non-whitespace character
  kSyllable,  // whitespace-separated chunks (Vietnamese)
};

UnitKind ParseUnitKind(const std::string& name);
std::string UnitKindName(UnitKind kind);

struct Unit {
  std::string text;
  size_t begin = 0;  // byte offsets in the source text
  size_t end = 0;
  bool space_before = false;
  bool space_after = false;
};

std::vector<Unit> SplitUnits(std::string_view text, UnitKind kind);

// Number of units each surface token of `s` spans (multiword tokens count as
// one surface token). Throws DataError when the forms do not match the raw
// text of the sentence or the sentence has no raw text.
std::vector<size_t> GoldTokenLengths(const Sentence& s, UnitKind kind);

// ---------------------------------------------------------------------------
// PMI features

// Add-one smoothed PMI of adjacent units, bucketized into equal-population
// buckets over the bigram types seen in unlabeled text. Unseen bigrams fall
// into bucket 0.
class PmiTable {
 public:
  PmiTable() = default;
  static PmiTable Fit(const std::vector<std::vector<std::string>>& sequences,
                      size_t buckets = 8);

  // PMI of a seen bigram; nullopt when unseen.
  std::optional<double> Pmi(const std::string& a, const std::string& b) const;
  size_t Bucket(const std::string& a, const std::string& b) const;
  size_t buckets() const { return buckets_; }
  const std::vector<double>& boundaries() const { return boundaries_; }

  nlohmann::json ToJson() const;
  static PmiTable FromJson(const nlohmann::json& j);

 private:
  size_t buckets_ = 8;
  std::map<std::pair<std::string, std::string>, double> pmi_;
  std::vector<double> boundaries_;  // buckets_ - 1 ascending thresholds
};

// ---------------------------------------------------------------------------
// BIES tagger

struct BiesConfig {
  UnitKind unit = UnitKind::kChar;
  size_t unigram_dim = 25;
  size_t bigram_dim = 50;
  size_t pmi_dim = 10;
  size_t pmi_buckets = 8;
  size_t space_dim = 5;
  size_t lm_dim = 25;  // projection width of char-LM features
  bool use_pmi = true;
  LmMode lm_mode = LmMode::kSum012;  // used only with a character LM
  size_t hidden = 50;
  size_t layers = 1;
  size_t ensemble = 5;
  TrainOptions train;
};

class BiesModel {
 public:
  BiesModel() = default;
  BiesModel(BiesModel&&) = default;
  BiesModel& operator=(BiesModel&&) = default;

  static BiesModel Create(const BiesConfig& config,
                          const std::vector<std::vector<Unit>>& training_units,
                          std::shared_ptr<const PmiTable> pmi,
                          std::shared_ptr<const BiLmModel> char_lm, uint64_t seed);

  const BiesConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const std::shared_ptr<const PmiTable>& pmi() const { return pmi_; }

  // Char-LM vectors for a unit sequence (empty tensor without an LM).
  Tensor Context(const std::vector<Unit>& units) const;
  // n x 4 logits.
  Var Scores(Tape& tape, const std::vector<Unit>& units, const Tensor* context, Rng* rng) const;
  // n x 4 label probabilities.
  Tensor Probabilities(const std::vector<Unit>& units, const Tensor* context = nullptr) const;

  void Save(const std::string& dir) const;
  static BiesModel Load(const std::string& dir);

  static constexpr int kFormatVersion = 1;

 private:
  void Declare(Rng& rng);

  BiesConfig config_;
  uint64_t seed_ = 1;
  Vocab unigrams_;  // index 0 unknown
  Vocab bigrams_;   // index 0 unknown
  std::shared_ptr<const PmiTable> pmi_;
  std::shared_ptr<const BiLmModel> char_lm_;
  ParameterSet params_;
  Parameter* unigram_table_ = nullptr;
  Parameter* bigram_table_ = nullptr;
  Parameter* pmi_table_ = nullptr;
  Parameter* space_table_ = nullptr;
  nn::Dense lm_projection_;
  nn::BiLstm bilstm_;
  nn::Dense output_;
};

// Unit sequences of raw texts, e.g. for fitting PMI or a character LM.
std::vector<std::vector<std::string>> UnitCorpus(const std::vector<std::string>& texts,
                                                 UnitKind kind);

// Trains config.ensemble models with seeds train.seed, train.seed + 1, ...
// on the gold segmentation of `gold` (sentences need raw text). PMI statistics
// come from `unlabeled`. Early stopping uses unit-label accuracy on `dev`
// (or `gold` when null).
std::vector<BiesModel> TrainBies(const Treebank& gold, const std::vector<std::string>& unlabeled,
                                 const BiesConfig& config,
                                 std::shared_ptr<const BiLmModel> char_lm = nullptr,
                                 const Treebank* dev = nullptr);

// Averages label distributions over `models` and decodes. Returns byte spans
// of the tokens of `text`.
std::vector<TextSpan> BiesTokenize(const std::vector<const BiesModel*>& models,
                                   std::string_view text);

// ---------------------------------------------------------------------------
// Lexicon and forward maximum matching

struct Lexicon {
  std::set<std::string> words;
  size_t max_length = 0;  // in characters

  void Add(const std::string& word);
  bool Contains(const std::string& w) const { return words.count(w) > 0; }
};

// The first round(keep_fraction * size) words of a frequency-ordered table.
Lexicon BuildLexicon(const StaticEmbeddings& emb, double keep_fraction);
Lexicon BuildLexicon(const std::vector<std::string>& words_by_frequency, double keep_fraction);

// Left to right, the longest lexicon word starting at each position, or a
// single character when none matches. Whitespace separates chunks and is
// never part of a token.
std::vector<TextSpan> MaxMatch(const Lexicon& lex, std::string_view text);

// Splits on whitespace.
std::vector<TextSpan> WhitespaceTokenize(std::string_view text);

// ---------------------------------------------------------------------------
// Raw text to sentences

enum class TokenizerKind { kBies, kMaxMatch, kWhitespace };

TokenizerKind ParseTokenizerKind(const std::string& name);
std::string TokenizerKindName(TokenizerKind kind);

struct Segmenter {
  SplitMode split = SplitMode::kRules;
  SplitThreshold threshold;
  TokenizerKind tokenizer = TokenizerKind::kWhitespace;
  std::vector<const BiesModel*> bies;
  const Lexicon* lexicon = nullptr;
};

// Whitespace sentences and forward maximum matching over a lexicon holding
// the most frequent tenth of an embedding vocabulary.
Segmenter ThaiPreset(const Lexicon& lexicon);
inline constexpr double kThaiLexiconFraction = 0.1;

std::vector<TextSpan> Tokenize(const Segmenter& seg, std::string_view text);

// Sentences with "# text" and unannotated words.
Treebank SegmentText(std::string_view text, const Segmenter& seg, std::string name = "text");

}  // namespace udparse

#endif  // UDPARSE_SEGMENT_H_
