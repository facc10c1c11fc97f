#ifndef UDPARSE_EVAL_H_
#define UDPARSE_EVAL_H_

#include <cstddef>
#include <string>

#include "udparse/conllu.h"

namespace udparse {

struct Score {
  size_t correct = 0;
  size_t system = 0;
  size_t gold = 0;

  double precision() const { return system ? double(correct) / system : 0.0; }
  double recall() const { return gold ? double(correct) / gold : 0.0; }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  Score& operator+=(const Score& o) {
    correct += o.correct;
    system += o.system;
    gold += o.gold;
    return *this;
  }
};

// Span-aligned scores. Words align iff their character spans are equal; UAS
// and LAS count aligned words whose head aligns with the gold head (root
// matches root), LAS also requiring equal universal relations (the part
// before any ':'). Word-level scores share one denominator, so
// las <= uas <= tokens always holds.
struct EvalReport {
  Score tokens;
  Score sentences;
  Score upos;
  Score uas;
  Score las;
  bool proportional_mwt_split = false;

  EvalReport& operator+=(const EvalReport& o);
};

// Computes spans when missing. Throws DataError when the two sides do not
// cover the same characters.
EvalReport Evaluate(const Treebank& gold, const Treebank& system);

std::string UniversalRelation(const std::string& deprel);

// Aligned text table, values in percent.
std::string FormatReportTable(const EvalReport& report);
// "metric.field=value" lines.
std::string FormatReportKeyValue(const EvalReport& report);

// Plain attachment accuracy on identically tokenized treebanks (used for
// dev-set model selection).
struct AttachmentScore {
  size_t total = 0;
  size_t heads = 0;
  size_t labeled = 0;
  size_t tags = 0;
  double uas() const { return total ? double(heads) / total : 0.0; }
  double las() const { return total ? double(labeled) / total : 0.0; }
  double upos() const { return total ? double(tags) / total : 0.0; }
};
AttachmentScore ScoreAligned(const Treebank& gold, const Treebank& system);

}  // namespace udparse

#endif  // UDPARSE_EVAL_H_
