#ifndef UDPARSE_CLI_H_
#define UDPARSE_CLI_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "udparse/conllu.h"
#include "udparse/parser.h"
#include "udparse/segment.h"

namespace udparse::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitVersion = 3;

// Runs one subcommand; args[0] is the program name.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Flat configuration files hold "key = value" lines; '#' starts a comment and
// a repeated key supplies several values. Keys are long option names without
// the leading dashes. Returns args with `--config FILE` replaced by the file's
// options; options also given on the command line take precedence.
std::vector<std::string> ExpandConfig(const std::vector<std::string>& args);

// FNV-1a 64-bit hash of a file, or of every file below a directory (paths
// relative to it included, in sorted order).
uint64_t HashPath(const std::string& path);

struct ConcatOptions {
  size_t folds = 5;  // cross-validation folds when there is no dev set
  double min_gain = 0.0;  // LAS points concatenation must add
  uint64_t seed = 1;
};

struct ConcatDecision {
  double single_las = 0.0;  // percent
  double concat_las = 0.0;  // percent
  double gain() const { return concat_las - single_las; }
  bool concat = false;
  std::string decision() const { return concat ? "concat" : "single"; }
};

// Trains the parser on `train` alone and on `train` concatenated with
// `extra`, comparing dev LAS, or k-fold cross-validated LAS when `dev` is
// null.
ConcatDecision SelectConcat(const Treebank& train, const Treebank* dev,
                            const std::vector<Treebank>& extra, const ParserConfig& config,
                            const ConcatOptions& options);

struct SplitterDecision {
  double baseline_f1 = 0.0;  // sentence F1, percent
  bool use_alternative = false;
};

// Sentence F1 of the baseline splitter on `raw_text` against `gold`; the
// alternative is chosen when it falls below `threshold` (percent).
SplitterDecision SelectSplitter(const Treebank& gold, std::string_view raw_text,
                                SplitMode baseline, const SplitThreshold& split_threshold,
                                double threshold);

// Raw document text of a treebank: sentence texts joined by single spaces.
std::string DocumentText(const Treebank& tb);

}  // namespace udparse::cli

#endif  // UDPARSE_CLI_H_
