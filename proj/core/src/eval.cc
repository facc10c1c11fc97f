#include "udparse/eval.h"

#include <cstdio>
#include <map>
#include <sstream>

#include "udparse/error.h"

namespace udparse {
namespace {

struct WordRef {
  const Token* token;
  const Sentence* sentence;
};

std::vector<WordRef> Words(const Treebank& tb) {
  std::vector<WordRef> out;
  for (const Sentence& s : tb.sentences)
    for (const Token& t : s.tokens) out.push_back({&t, &s});
  return out;
}

CharSpan HeadSpan(const WordRef& w) {
  const int h = w.token->head.value_or(0);
  if (h == 0) return {SIZE_MAX, SIZE_MAX};  // root marker
  return *w.sentence->tokens[h - 1].span;
}

std::vector<CharSpan> SentenceSpans(const Treebank& tb) {
  std::vector<CharSpan> out;
  for (const Sentence& s : tb.sentences) {
    if (s.tokens.empty()) continue;
    out.push_back({s.tokens.front().span->first, s.tokens.back().span->second});
  }
  return out;
}

bool HasSpans(const Treebank& tb) {
  for (const Sentence& s : tb.sentences)
    for (const Token& t : s.tokens)
      if (!t.span) return false;
  return true;
}

}  // namespace

EvalReport& EvalReport::operator+=(const EvalReport& o) {
  tokens += o.tokens;
  sentences += o.sentences;
  upos += o.upos;
  uas += o.uas;
  las += o.las;
  proportional_mwt_split |= o.proportional_mwt_split;
  return *this;
}

std::string UniversalRelation(const std::string& deprel) {
  return deprel.substr(0, deprel.find(':'));
}

EvalReport Evaluate(const Treebank& gold_in, const Treebank& system_in) {
  Treebank gold = gold_in;
  Treebank system = system_in;
  EvalReport report;
  if (!HasSpans(gold)) report.proportional_mwt_split |= AssignSpans(gold);
  if (!HasSpans(system)) report.proportional_mwt_split |= AssignSpans(system);
  if (SurfaceStream(gold) != SurfaceStream(system)) {
    throw DataError("evaluate: gold and system cover different raw text");
  }

  const std::vector<WordRef> gw = Words(gold);
  const std::vector<WordRef> sw = Words(system);
  std::map<CharSpan, size_t> gold_by_span;
  for (size_t i = 0; i < gw.size(); ++i) gold_by_span.emplace(*gw[i].token->span, i);

  report.tokens.gold = report.upos.gold = report.uas.gold = report.las.gold = gw.size();
  report.tokens.system = report.upos.system = report.uas.system = report.las.system =
      sw.size();
  std::vector<bool> used(gw.size(), false);
  for (const WordRef& s : sw) {
    auto it = gold_by_span.find(*s.token->span);
    if (it == gold_by_span.end() || used[it->second]) continue;
    used[it->second] = true;
    const WordRef& g = gw[it->second];
    ++report.tokens.correct;
    if (s.token->upos == g.token->upos) ++report.upos.correct;
    if (HeadSpan(s) == HeadSpan(g)) {
      ++report.uas.correct;
      if (UniversalRelation(s.token->deprel.value_or("_")) ==
          UniversalRelation(g.token->deprel.value_or("_"))) {
        ++report.las.correct;
      }
    }
  }

  const std::vector<CharSpan> gs = SentenceSpans(gold);
  const std::vector<CharSpan> ss = SentenceSpans(system);
  std::map<CharSpan, int> gold_sentences;
  for (const CharSpan& s : gs) gold_sentences[s] = 1;
  report.sentences.gold = gs.size();
  report.sentences.system = ss.size();
  for (const CharSpan& s : ss) report.sentences.correct += gold_sentences.count(s);

  if (report.las.correct > report.uas.correct || report.uas.correct > report.tokens.correct) {
    throw Error("evaluate: internal invariant las <= uas <= tokens violated");
  }
  return report;
}

std::string FormatReportTable(const EvalReport& r) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-10s| %9s | %9s | %9s\n", "Metric",
                "Precision", "Recall", "F1 Score");
  out << line << "----------+-----------+-----------+-----------\n";
  const std::pair<const char*, const Score*> rows[] = {
      {"Tokens", &r.tokens}, {"Sentences", &r.sentences}, {"UPOS", &r.upos},
      {"UAS", &r.uas},       {"LAS", &r.las}};
  for (const auto& [name, s] : rows) {
    std::snprintf(line, sizeof(line), "%-10s| %9.2f | %9.2f | %9.2f\n", name,
                  100.0 * s->precision(), 100.0 * s->recall(), 100.0 * s->f1());
    out << line;
  }
  if (r.proportional_mwt_split) {
    out << "note: multiword token words were aligned by proportional split\n";
  }
  return out.str();
}

std::string FormatReportKeyValue(const EvalReport& r) {
  std::ostringstream out;
  char value[64];
  const std::pair<const char*, const Score*> rows[] = {
      {"tokens", &r.tokens}, {"sentences", &r.sentences}, {"upos", &r.upos},
      {"uas", &r.uas},       {"las", &r.las}};
  for (const auto& [name, s] : rows) {
    std::snprintf(value, sizeof(value), "%.4f", 100.0 * s->precision());
    out << name << ".precision=" << value << "\n";
    std::snprintf(value, sizeof(value), "%.4f", 100.0 * s->recall());
    out << name << ".recall=" << value << "\n";
    std::snprintf(value, sizeof(value), "%.4f", 100.0 * s->f1());
    out << name << ".f1=" << value << "\n";
  }
  out << "mwt_proportional_split=" << (r.proportional_mwt_split ? 1 : 0) << "\n";
  return out.str();
}

AttachmentScore ScoreAligned(const Treebank& gold, const Treebank& system) {
  if (gold.size() != system.size()) {
    throw DataError("score: treebanks differ in sentence count");
  }
  AttachmentScore score;
  for (size_t i = 0; i < gold.size(); ++i) {
    const Sentence& g = gold.sentences[i];
    const Sentence& s = system.sentences[i];
    if (g.size() != s.size()) throw DataError("score: sentences differ in length");
    for (size_t k = 0; k < g.size(); ++k) {
      ++score.total;
      const Token& gt = g.tokens[k];
      const Token& st = s.tokens[k];
      if (gt.upos == st.upos) ++score.tags;
      if (gt.head && st.head && *gt.head == *st.head) {
        ++score.heads;
        if (gt.deprel && st.deprel &&
            UniversalRelation(*gt.deprel) == UniversalRelation(*st.deprel)) {
          ++score.labeled;
        }
      }
    }
  }
  return score;
}

}  // namespace udparse
