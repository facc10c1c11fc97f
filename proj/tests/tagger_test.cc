#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "support/synthetic.h"
#include "udparse/error.h"
#include "udparse/tagger.h"

namespace udparse {
namespace {

TaggerConfig Small(size_t epochs) {
  TaggerConfig c;
  c.embed.dim = 32;
  c.embed.char_dim = 8;
  c.embed.char_hidden = 16;
  c.hidden = 32;
  c.layers = 1;
  c.mlp = 32;
  c.train.epochs = epochs;
  c.train.dropout = 0.0;
  c.train.target_score = 0.999;
  return c;
}

const testing::Grammar& Toy() {
  static const testing::Grammar g;
  return g;
}

TEST(TaggerTest, SingleSentenceIsMemorized) {
  const Treebank tb = ReadConlluString(
      "1\tle\t_\tDET\t_\t_\t2\tdet\t_\t_\n"
      "2\tchat\t_\tNOUN\t_\t_\t3\tnsubj\t_\t_\n"
      "3\tdort\t_\tVERB\t_\t_\t0\troot\t_\t_\n"
      "4\t.\t_\tPUNCT\t_\t_\t3\tpunct\t_\t_\n\n");
  TrainHistory h;
  const TaggerModel m = TrainTagger(tb, tb, Small(50), nullptr, nullptr, &h);
  EXPECT_EQ(m.Predict(tb.sentences[0]), (std::vector<std::string>{"DET", "NOUN", "VERB", "PUNCT"}));
  EXPECT_LE(h.dev_scores.size(), 50u);
}

TEST(TaggerTest, SyntheticTrainingSetIsMemorized) {
  const Treebank train = Toy().Corpus(50, 3);
  const TaggerModel m = TrainTagger(train, train, Small(200));
  Treebank out = testing::StripAnnotation(train, false);
  m.Tag(out);
  EXPECT_GE(TagAccuracy(train, out), 0.99);
}

TEST(TaggerTest, TagOnlyWritesUpos) {
  const Treebank train = Toy().Corpus(10, 4);
  const TaggerModel m = TaggerModel::Create(Small(1), train, nullptr, nullptr);
  Treebank tagged = train;
  m.Tag(tagged);
  ASSERT_EQ(tagged.sentences.size(), train.sentences.size());
  for (size_t i = 0; i < train.sentences.size(); ++i) {
    const Sentence& a = train.sentences[i];
    const Sentence& b = tagged.sentences[i];
    EXPECT_EQ(a.comments, b.comments);
    ASSERT_EQ(a.tokens.size(), b.tokens.size());
    for (size_t k = 0; k < a.tokens.size(); ++k) {
      Token t = b.tokens[k];
      EXPECT_TRUE(m.tagset().Find(t.upos).has_value());
      t.upos = a.tokens[k].upos;
      EXPECT_TRUE(t == a.tokens[k]);
    }
  }
}

TEST(TaggerTest, EmptyInputGivesEmptyOutput) {
  const TaggerModel m = TaggerModel::Create(Small(1), Toy().Corpus(5, 1), nullptr, nullptr);
  Treebank empty;
  m.Tag(empty);
  EXPECT_TRUE(empty.sentences.empty());
  EXPECT_TRUE(m.Predict(Sentence{}).empty());
}

TEST(TaggerTest, TiesGoToTheLowestTagIndex) {
  const Treebank train = Toy().Corpus(5, 1);
  TaggerModel m = TaggerModel::Create(Small(1), train, nullptr, nullptr);
  m.params().Get("tagger.out.w").value.Fill(0.0);
  m.params().Get("tagger.out.b").value.Fill(0.25);
  for (const std::string& tag : m.Predict(train.sentences[0])) EXPECT_EQ(tag, m.tagset()[0]);
}

TEST(TaggerTest, ConstantScoreShiftKeepsPredictions) {
  const Treebank train = Toy().Corpus(20, 2);
  TaggerModel m = TrainTagger(train, train, Small(3));
  const Sentence& s = train.sentences[1];
  const auto before = m.Predict(s);
  Tensor& b = m.params().Get("tagger.out.b").value;
  for (Real& v : b.values()) v += 3.5;
  EXPECT_EQ(m.Predict(s), before);
}

TEST(TaggerTest, TrainingIsDeterministic) {
  const Treebank train = Toy().Corpus(20, 2);
  const Treebank dev = Toy().Corpus(10, 9);
  TrainHistory ha, hb;
  const TaggerModel a = TrainTagger(train, dev, Small(3), nullptr, nullptr, &ha);
  const TaggerModel b = TrainTagger(train, dev, Small(3), nullptr, nullptr, &hb);
  EXPECT_EQ(ha.dev_scores, hb.dev_scores);
  for (const Sentence& s : dev.sentences) EXPECT_EQ(a.Predict(s), b.Predict(s));
}

TEST(TaggerTest, SaveLoadRoundTripAndVersionCheck) {
  const Treebank train = Toy().Corpus(20, 2);
  const TaggerModel m = TrainTagger(train, train, Small(2));
  const std::string dir = (std::filesystem::temp_directory_path() / "udparse_tagger_test").string();
  m.Save(dir);
  const TaggerModel back = TaggerModel::Load(dir);
  for (const Sentence& s : train.sentences) EXPECT_EQ(back.Predict(s), m.Predict(s));

  std::ifstream in(dir + "/model.json");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  in.close();
  const std::string key = "\"format_version\": 1";
  ASSERT_NE(text.find(key), std::string::npos);
  text.replace(text.find(key), key.size(), "\"format_version\": 99");
  std::ofstream(dir + "/model.json") << text;
  EXPECT_THROW(TaggerModel::Load(dir), VersionError);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(TaggerModel::Load(dir), DataError);
}

TEST(TaggerTest, AccuracyRequiresMatchingTokenization) {
  const Treebank a = Toy().Corpus(3, 1);
  Treebank b = a;
  EXPECT_EQ(TagAccuracy(a, b), 1.0);
  b.sentences[0].tokens[0].upos = "X";
  const size_t n0 = a.sentences[0].tokens.size() + a.sentences[1].tokens.size() +
                    a.sentences[2].tokens.size();
  EXPECT_DOUBLE_EQ(TagAccuracy(a, b), 1.0 - 1.0 / n0);
  b.sentences.pop_back();
  EXPECT_THROW(TagAccuracy(a, b), Error);
}

}  // namespace
}  // namespace udparse
