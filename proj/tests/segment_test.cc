#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>

#include "oracles.h"
#include "udparse/error.h"
#include "udparse/segment.h"

namespace udparse {
namespace {

std::vector<std::string> Pieces(std::string_view text, const std::vector<TextSpan>& spans) {
  std::vector<std::string> out;
  for (const auto& [b, e] : spans) out.emplace_back(text.substr(b, e - b));
  return out;
}

// Spans must cover every non-whitespace byte exactly once, in order. Token
// spans never include whitespace; sentence spans may contain inner spaces.
void ExpectTiles(std::string_view text, const std::vector<TextSpan>& spans,
                 bool inner_space = false) {
  std::vector<int> cover(text.size(), 0);
  size_t prev = 0;
  for (const auto& [b, e] : spans) {
    ASSERT_LT(b, e);
    ASSERT_LE(e, text.size());
    EXPECT_GE(b, prev);
    prev = e;
    for (size_t i = b; i < e; ++i) ++cover[i];
  }
  for (size_t i = 0; i < text.size(); ++i) {
    const bool space = text[i] == ' ' || text[i] == '\n' || text[i] == '\t';
    if (space && inner_space) {
      EXPECT_LE(cover[i], 1) << "byte " << i << " of '" << text << "'";
    } else {
      EXPECT_EQ(cover[i], space ? 0 : 1) << "byte " << i << " of '" << text << "'";
    }
  }
}

Sentence Segmented(const std::vector<std::string>& words, const std::string& joiner) {
  Sentence s;
  std::string text;
  for (size_t i = 0; i < words.size(); ++i) {
    Token t;
    t.id = static_cast<int>(i + 1);
    t.form = words[i];
    s.tokens.push_back(t);
    text += (i ? joiner : "") + words[i];
  }
  s.SetComment("text", text);
  return s;
}

std::vector<TextSpan> GoldSpans(const std::vector<std::string>& words) {
  std::vector<TextSpan> out;
  size_t pos = 0;
  for (const std::string& w : words) {
    out.emplace_back(pos, pos + w.size());
    pos += w.size();
  }
  return out;
}

// ---------------------------------------------------------------------------

TEST(SplitTest, Examples) {
  EXPECT_TRUE(SplitSentences("", SplitMode::kRules).empty());
  EXPECT_TRUE(SplitSentences("  \n ", SplitMode::kWhitespace).empty());
  const std::string ab = "A. B.";
  EXPECT_EQ(Pieces(ab, SplitSentences(ab, SplitMode::kRules)),
            (std::vector<std::string>{"A.", "B."}));
  const std::string thai = "กก  ขข";
  EXPECT_EQ(Pieces(thai, SplitSentences(thai, SplitMode::kWhitespace)),
            (std::vector<std::string>{"กก", "ขข"}));
  const std::string one_space = "กก ขข";
  EXPECT_EQ(SplitSentences(one_space, SplitMode::kWhitespace).size(), 1u);
  SplitThreshold three;
  three.min_spaces = 3;
  EXPECT_EQ(SplitSentences(thai, SplitMode::kWhitespace, three).size(), 1u);
  const std::string nl = "x y\nz";
  EXPECT_EQ(Pieces(nl, SplitSentences(nl, SplitMode::kWhitespace)),
            (std::vector<std::string>{"x y", "z"}));
  EXPECT_EQ(ParseSplitMode(SplitModeName(SplitMode::kRules)), SplitMode::kRules);
}

TEST(SplitTest, SpansCoverTheTextUnderFuzzing) {
  Rng rng(1);
  const std::vector<std::string> alphabet = {"a", "B", ".", "!", " ", "  ", "\n", "?", "é"};
  for (int trial = 0; trial < 2000; ++trial) {
    std::string text;
    const size_t n = rng.Below(30);
    for (size_t i = 0; i < n; ++i) text += alphabet[rng.Below(alphabet.size())];
    for (SplitMode m : {SplitMode::kRules, SplitMode::kWhitespace}) {
      const auto spans = SplitSentences(text, m);
      ExpectTiles(text, spans, true);
      for (const auto& [b, e] : spans) {
        EXPECT_NE(text[b], ' ');
        EXPECT_NE(text[e - 1], ' ');
      }
    }
  }
}

// ---------------------------------------------------------------------------

TEST(BiesTest, EncodeExamples) {
  EXPECT_EQ(BiesEncode({2}), (std::vector<Bies>{kB, kE}));
  EXPECT_EQ(BiesEncode({1, 2}), (std::vector<Bies>{kS, kB, kE}));
  EXPECT_EQ(BiesEncode({4}), (std::vector<Bies>{kB, kI, kI, kE}));
  EXPECT_TRUE(BiesEncode({}).empty());
}

TEST(BiesTest, ViterbiMatchesBruteForce) {
  Rng rng(2);
  for (int trial = 0; trial < 3000; ++trial) {
    const size_t n = 1 + rng.Below(6);
    Tensor scores = Tensor::Zeros(n, kBiesLabels);
    for (Real& v : scores.values()) v = rng.Normal();
    EXPECT_EQ(BiesViterbi(scores), testing::BruteForceBies(scores));
  }
}

TEST(BiesTest, NearUniformInvalidGreedyLabelsDecodeToAValidPath) {
  // Greedy argmax would read (B, B).
  const Tensor scores = Tensor::Matrix(2, 4, {0.30, 0.20, 0.25, 0.25, 0.30, 0.20, 0.25, 0.25});
  const std::vector<Bies> path = BiesViterbi(scores);
  EXPECT_TRUE(IsValidBies(path));
  EXPECT_EQ(path, testing::BruteForceBies(scores));
  // Valid paths: (B,E) = 0.55 and (S,S) = 0.50.
  EXPECT_EQ(path, (std::vector<Bies>{kB, kE}));
}

TEST(BiesTest, ForcedBoundariesAreHonoured) {
  Tensor scores = Tensor::Zeros(3, kBiesLabels);
  for (size_t i = 0; i < 3; ++i) scores.at(i, kI) = 5.0;
  scores.at(0, kB) = 4.0;
  scores.at(2, kE) = 4.0;
  EXPECT_EQ(BiesViterbi(scores), (std::vector<Bies>{kB, kI, kE}));
  const std::vector<bool> boundary = {true, false, false};
  const std::vector<Bies> forced = BiesViterbi(scores, &boundary);
  EXPECT_TRUE(forced[0] == kS || forced[0] == kE);
  EXPECT_EQ(forced, (std::vector<Bies>{kS, kB, kE}));
}

TEST(BiesTest, DecodeIsValidUnderFuzzingAndInvertsEncode) {
  Rng rng(3);
  for (int trial = 0; trial < 20000; ++trial) {
    const size_t n = rng.Below(15);
    std::vector<Bies> labels(n);
    for (Bies& b : labels) b = static_cast<Bies>(rng.Below(kBiesLabels));
    const std::vector<TextSpan> spans = BiesDecode(labels);
    size_t pos = 0;
    for (const auto& [b, e] : spans) {
      EXPECT_EQ(b, pos);
      EXPECT_LT(b, e);
      pos = e;
    }
    EXPECT_EQ(pos, n);

    std::vector<size_t> lengths;
    for (size_t left = n; left > 0;) {
      const size_t len = 1 + rng.Below(std::min<size_t>(left, 5));
      lengths.push_back(len);
      left -= len;
    }
    const std::vector<Bies> encoded = BiesEncode(lengths);
    EXPECT_TRUE(IsValidBies(encoded));
    std::vector<size_t> back;
    for (const auto& [b, e] : BiesDecode(encoded)) back.push_back(e - b);
    EXPECT_EQ(back, lengths);
  }
}

// ---------------------------------------------------------------------------

TEST(UnitTest, CharactersAndSyllables) {
  const auto chars = SplitUnits("ab çd", UnitKind::kChar);
  ASSERT_EQ(chars.size(), 4u);
  EXPECT_EQ(chars[2].text, "ç");
  EXPECT_TRUE(chars[2].space_before);
  EXPECT_TRUE(chars[1].space_after);
  const auto syl = SplitUnits("Hà Nội  đẹp", UnitKind::kSyllable);
  ASSERT_EQ(syl.size(), 3u);
  EXPECT_EQ(syl[1].text, "Nội");
  const Sentence s = Segmented({"Hà Nội", "đẹp"}, " ");
  EXPECT_EQ(GoldTokenLengths(s, UnitKind::kSyllable), (std::vector<size_t>{2, 1}));
  EXPECT_EQ(GoldTokenLengths(Segmented({"ab", "c"}, ""), UnitKind::kChar),
            (std::vector<size_t>{2, 1}));
  Sentence bad = Segmented({"ab", "c"}, "");
  bad.tokens[1].form = "x";
  EXPECT_THROW(GoldTokenLengths(bad, UnitKind::kChar), DataError);
  Sentence no_text;
  no_text.tokens = bad.tokens;
  EXPECT_THROW(GoldTokenLengths(no_text, UnitKind::kChar), DataError);
}

TEST(PmiTest, HandComputedValues) {
  const PmiTable t = PmiTable::Fit({{"a", "b"}, {"a", "b"}, {"c", "d"}}, 2);
  // 6 unigram tokens over 4 types, 3 bigram tokens over 2 types.
  EXPECT_NEAR(*t.Pmi("a", "b"), std::log((3.0 / 5.0) / ((3.0 / 10.0) * (3.0 / 10.0))), 1e-12);
  EXPECT_NEAR(*t.Pmi("c", "d"), std::log((2.0 / 5.0) / ((2.0 / 10.0) * (2.0 / 10.0))), 1e-12);
  EXPECT_FALSE(t.Pmi("b", "a").has_value());
  EXPECT_EQ(t.Bucket("b", "a"), 0u);
  EXPECT_EQ(t.Bucket("a", "b"), 0u);
  EXPECT_EQ(t.Bucket("c", "d"), 1u);
  EXPECT_EQ(PmiTable::FromJson(t.ToJson()).Pmi("a", "b"), t.Pmi("a", "b"));
}

TEST(PmiTest, BucketsAreMonotoneAndBalanced) {
  Rng rng(4);
  std::vector<std::vector<std::string>> seqs(300);
  for (auto& s : seqs)
    for (int i = 0; i < 12; ++i) s.push_back(std::string(1, static_cast<char>('a' + rng.Below(12))));
  const PmiTable t = PmiTable::Fit(seqs, 8);
  std::vector<std::pair<double, size_t>> seen;
  std::vector<size_t> counts(8, 0);
  for (char a = 'a'; a < 'a' + 12; ++a)
    for (char b = 'a'; b < 'a' + 12; ++b) {
      const std::string x(1, a), y(1, b);
      if (auto v = t.Pmi(x, y)) {
        seen.emplace_back(*v, t.Bucket(x, y));
        ++counts[t.Bucket(x, y)];
      }
    }
  std::sort(seen.begin(), seen.end());
  for (size_t i = 1; i < seen.size(); ++i) EXPECT_LE(seen[i - 1].second, seen[i].second);
  for (size_t c : counts) EXPECT_NEAR(static_cast<double>(c), seen.size() / 8.0, 3.0);
}

// ---------------------------------------------------------------------------

TEST(MaxMatchTest, Examples) {
  Lexicon lex;
  for (const char* w : {"ab", "abc", "d"}) lex.Add(w);
  EXPECT_EQ(Pieces("abcd", MaxMatch(lex, "abcd")), (std::vector<std::string>{"abc", "d"}));
  EXPECT_EQ(Pieces("xyz", MaxMatch(Lexicon{}, "xyz")), (std::vector<std::string>{"x", "y", "z"}));
  Lexicon aa;
  aa.Add("aa");
  EXPECT_EQ(Pieces("aaa", MaxMatch(aa, "aaa")), (std::vector<std::string>{"aa", "a"}));
  Lexicon thai;
  thai.Add("กข");
  EXPECT_EQ(Pieces("กขค กข", MaxMatch(thai, "กขค กข")),
            (std::vector<std::string>{"กข", "ค", "กข"}));
  EXPECT_TRUE(MaxMatch(lex, "").empty());
}

TEST(MaxMatchTest, AgreesWithBruteForce) {
  Rng rng(5);
  for (int trial = 0; trial < 5000; ++trial) {
    std::set<std::string> words;
    Lexicon lex;
    const size_t k = rng.Below(8);
    for (size_t i = 0; i < k; ++i) {
      std::string w;
      const size_t len = 1 + rng.Below(4);
      for (size_t j = 0; j < len; ++j) w += static_cast<char>('a' + rng.Below(3));
      words.insert(w);
      lex.Add(w);
    }
    std::string text;
    const size_t n = rng.Below(16);
    for (size_t j = 0; j < n; ++j) text += rng.Below(6) == 0 ? ' ' : static_cast<char>('a' + rng.Below(3));
    const auto spans = MaxMatch(lex, text);
    EXPECT_EQ(spans, testing::BruteForceMaxMatch(words, text)) << text;
    ExpectTiles(text, spans);
  }
}

TEST(LexiconTest, BuildFromFrequencyList) {
  std::vector<std::string> words;
  for (int i = 0; i < 100; ++i) words.push_back("w" + std::to_string(i));
  const Lexicon ten = BuildLexicon(words, 0.1);
  EXPECT_EQ(ten.words.size(), 10u);
  EXPECT_TRUE(ten.Contains("w9"));
  EXPECT_FALSE(ten.Contains("w10"));
  const Lexicon empty = BuildLexicon(std::vector<std::string>{}, 0.1);
  EXPECT_TRUE(empty.words.empty());
  EXPECT_EQ(empty.max_length, 0u);
  const Lexicon dup = BuildLexicon({"กข", "กข", "x"}, 1.0);
  EXPECT_EQ(dup.words.size(), 2u);
  EXPECT_EQ(dup.max_length, 2u);
}

TEST(PresetTest, ThaiUsesWhitespaceSentencesAndMaxMatch) {
  Lexicon lex;
  lex.Add("กข");
  const Segmenter seg = ThaiPreset(lex);
  EXPECT_EQ(seg.split, SplitMode::kWhitespace);
  EXPECT_EQ(seg.tokenizer, TokenizerKind::kMaxMatch);
  const Treebank tb = SegmentText("กขค  กข", seg);
  ASSERT_EQ(tb.sentences.size(), 2u);
  EXPECT_EQ(tb.sentences[0].Forms(), (std::vector<std::string>{"กข", "ค"}));
  EXPECT_EQ(tb.sentences[0].text, "กขค");
  EXPECT_TRUE(SegmentText("", seg).sentences.empty());
}

// ---------------------------------------------------------------------------

BiesConfig SmallBies() {
  BiesConfig c;
  c.unigram_dim = 8;
  c.bigram_dim = 8;
  c.pmi_dim = 4;
  c.space_dim = 2;
  c.hidden = 16;
  c.ensemble = 1;
  c.train.epochs = 30;
  c.train.dropout = 0.0;
  c.train.target_score = 0.999;
  return c;
}

Treebank ToyCorpus(const std::vector<std::string>& lexicon, size_t n, uint64_t seed) {
  Rng rng(seed);
  Treebank tb;
  for (size_t i = 0; i < n; ++i) {
    std::vector<std::string> words;
    const size_t len = 3 + rng.Below(5);
    for (size_t k = 0; k < len; ++k) words.push_back(lexicon[rng.Below(lexicon.size())]);
    tb.sentences.push_back(Segmented(words, ""));
  }
  return tb;
}

TEST(BiesModelTest, SeparableToyCorpusIsSegmentedPerfectly) {
  const std::vector<std::string> lexicon = {"ab", "cde", "f", "gh"};
  const Treebank train = ToyCorpus(lexicon, 40, 1);
  const Treebank test = ToyCorpus(lexicon, 20, 2);
  std::vector<std::string> raw;
  for (const Sentence& s : train.sentences) raw.push_back(*s.text);
  const auto models = TrainBies(train, raw, SmallBies());
  ASSERT_EQ(models.size(), 1u);
  for (const Sentence& s : test.sentences) {
    EXPECT_EQ(BiesTokenize({&models[0]}, *s.text), GoldSpans(s.Forms())) << *s.text;
  }
  EXPECT_TRUE(BiesTokenize({&models[0]}, "").empty());
}

TEST(BiesModelTest, IdenticalEnsembleMatchesTheSingleModel) {
  const std::vector<std::string> lexicon = {"ab", "cde", "f", "gh", "ba"};
  const Treebank train = ToyCorpus(lexicon, 20, 3);
  BiesConfig c = SmallBies();
  c.train.epochs = 2;
  const auto models = TrainBies(train, {}, c);
  const BiesModel& m = models[0];
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::string text;
    const size_t n = rng.Below(12);
    for (size_t i = 0; i < n; ++i) text += rng.Below(5) == 0 ? ' ' : static_cast<char>('a' + rng.Below(8));
    const auto single = BiesTokenize({&m}, text);
    EXPECT_EQ(BiesTokenize({&m, &m, &m, &m, &m}, text), single);
    ExpectTiles(text, single);
  }
}

TEST(BiesModelTest, EnsembleTrainsDistinctSeedsAndRoundTrips) {
  const std::vector<std::string> lexicon = {"ab", "cde", "f"};
  const Treebank train = ToyCorpus(lexicon, 10, 4);
  BiesConfig c = SmallBies();
  c.ensemble = 3;
  c.train.epochs = 1;
  const auto models = TrainBies(train, {"abf cde", "fab"}, c);
  ASSERT_EQ(models.size(), 3u);
  const std::vector<Unit> units = SplitUnits("abcdef", UnitKind::kChar);
  const Tensor p0 = models[0].Probabilities(units), p1 = models[1].Probabilities(units);
  EXPECT_NE(p0, p1);
  for (size_t i = 0; i < p0.rows(); ++i) {
    double sum = 0;
    for (Real v : p0.row(i)) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  const std::string dir = (std::filesystem::temp_directory_path() / "udparse_bies_test").string();
  models[2].Save(dir);
  EXPECT_EQ(BiesModel::Load(dir).Probabilities(units), models[2].Probabilities(units));
  std::filesystem::remove_all(dir);
}

double SpanF1(const std::vector<TextSpan>& gold, const std::vector<TextSpan>& sys) {
  size_t hit = 0;
  for (const TextSpan& t : sys) hit += std::count(gold.begin(), gold.end(), t);
  if (gold.empty() && sys.empty()) return 1.0;
  return 2.0 * static_cast<double>(hit) / static_cast<double>(gold.size() + sys.size());
}

double MeanF1(const std::vector<const BiesModel*>& models, const Treebank& test) {
  double total = 0;
  for (const Sentence& s : test.sentences)
    total += SpanF1(GoldSpans(s.Forms()), BiesTokenize(models, *s.text));
  return total / static_cast<double>(test.sentences.size());
}

// Words over a shared alphabet, so no character identifies its position. The
// test words never occur in labeled data; only unlabeled cooccurrence
// statistics reveal that their characters stick together.
TEST(BiesModelTest, PmiFeaturesSegmentUnseenWords) {
  Rng rng(7);
  std::set<std::string> seen;
  std::vector<std::string> words;
  while (words.size() < 40) {
    std::string w;
    const size_t len = 2 + rng.Below(2);
    for (size_t j = 0; j < len; ++j) w += static_cast<char>('a' + rng.Below(12));
    if (seen.insert(w).second) words.push_back(w);
  }
  const std::vector<std::string> train_words(words.begin(), words.begin() + 20);
  const std::vector<std::string> test_words(words.begin() + 20, words.end());
  const Treebank train = ToyCorpus(train_words, 80, 8);
  const Treebank test = ToyCorpus(test_words, 40, 9);
  std::vector<std::string> unlabeled;
  for (const Sentence& s : ToyCorpus(words, 3000, 10).sentences) unlabeled.push_back(*s.text);

  BiesConfig with = SmallBies();
  with.train.epochs = 20;
  with.train.target_score = 2;
  BiesConfig without = with;
  without.use_pmi = false;
  const auto a = TrainBies(train, unlabeled, with);
  const auto b = TrainBies(train, unlabeled, without);
  const double f_with = MeanF1({&a[0]}, test), f_without = MeanF1({&b[0]}, test);
  EXPECT_GT(f_with, f_without) << f_with << " vs " << f_without;
}

// Symmetric label noise: about a third of the training sentences get one
// boundary removed or one spurious boundary inserted.
Treebank WithBoundaryNoise(Treebank tb, double rate, uint64_t seed) {
  Rng rng(seed);
  for (Sentence& s : tb.sentences) {
    if (!rng.Bernoulli(rate) || s.size() < 2) continue;
    if (rng.Bernoulli(0.5)) {
      const size_t k = rng.Below(s.size() - 1);
      s.tokens[k].form += s.tokens[k + 1].form;
      s.tokens.erase(s.tokens.begin() + static_cast<long>(k) + 1);
    } else {
      const size_t k = rng.Below(s.size());
      const std::string f = s.tokens[k].form;
      if (f.size() < 2) continue;
      const size_t cut = 1 + rng.Below(f.size() - 1);
      s.tokens[k].form = f.substr(0, cut);
      Token t = s.tokens[k];
      t.form = f.substr(cut);
      s.tokens.insert(s.tokens.begin() + static_cast<long>(k) + 1, t);
    }
    for (size_t i = 0; i < s.size(); ++i) s.tokens[i].id = static_cast<int>(i + 1);
  }
  return tb;
}

TEST(BiesModelTest, EnsembleIsNoWorseThanTheMeanMember) {
  const std::vector<std::string> lexicon = {"ab", "cde", "f", "gh", "ba", "ed", "hg"};
  for (uint64_t seed : {11, 21}) {
    const Treebank train = WithBoundaryNoise(ToyCorpus(lexicon, 60, seed), 0.3, seed + 1);
    const Treebank test = ToyCorpus(lexicon, 40, seed + 2);
    BiesConfig c = SmallBies();
    c.ensemble = 5;
    c.train.epochs = 6;
    c.train.target_score = 2;
    const auto models = TrainBies(train, {}, c);
    std::vector<const BiesModel*> all;
    double mean = 0;
    for (const BiesModel& m : models) {
      all.push_back(&m);
      mean += MeanF1({&m}, test) / static_cast<double>(models.size());
    }
    EXPECT_GE(MeanF1(all, test), mean) << "seed " << seed;
  }
}

TEST(BiesModelTest, MissingRawTextIsRejected) {
  Treebank tb = ToyCorpus({"ab"}, 2, 1);
  tb.sentences[0].text.reset();
  tb.sentences[0].comments.clear();
  EXPECT_THROW(TrainBies(tb, {}, SmallBies()), DataError);
}

}  // namespace
}  // namespace udparse
