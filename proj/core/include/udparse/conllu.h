#ifndef UDPARSE_CONLLU_H_
#define UDPARSE_CONLLU_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace udparse {

// [begin, end) offsets in the document's whitespace-free character stream.
using CharSpan = std::pair<size_t, size_t>;

struct Token {
  int id = 0;  // 1-based word index
  std::string form;
  std::string lemma = "_";
  std::string upos = "_";
  std::string xpos = "_";
  std::string feats = "_";
  std::optional<int> head;
  std::optional<std::string> deprel;
  std::string deps = "_";
  std::string misc = "_";
  std::optional<CharSpan> span;  // derived, never serialized

  bool operator==(const Token& o) const {
    return id == o.id && form == o.form && lemma == o.lemma && upos == o.upos &&
           xpos == o.xpos && feats == o.feats && head == o.head &&
           deprel == o.deprel && deps == o.deps && misc == o.misc;
  }
};

struct MultiwordRange {
  int start = 0;
  int end = 0;
  std::string form;
  std::string misc = "_";
  std::optional<CharSpan> span;

  bool operator==(const MultiwordRange& o) const {
    return start == o.start && end == o.end && form == o.form && misc == o.misc;
  }
};

struct Sentence {
  std::vector<Token> tokens;
  std::vector<MultiwordRange> mwts;
  // Verbatim comment lines ("# ..."); empty-node lines ("1.1\t...") are kept
  // here as opaque lines too.
  std::vector<std::string> comments;
  std::optional<std::string> text;  // from "# text = ..."

  size_t size() const { return tokens.size(); }
  bool operator==(const Sentence& o) const {
    return tokens == o.tokens && mwts == o.mwts && comments == o.comments &&
           text == o.text;
  }

  // Value of a "# key = value" comment, if present.
  std::optional<std::string> Comment(std::string_view key) const;
  // Replaces or appends a "# key = value" comment (and keeps `text` in sync).
  void SetComment(std::string_view key, std::string_view value);

  // Heads as a vector indexed by token position (0-based); -1 when unset.
  std::vector<int> Heads() const;
  bool FullyAnnotated() const;
  // True when heads form a single-rooted tree over all tokens.
  bool IsTree() const;
  std::vector<std::string> Forms() const;
};

struct Treebank {
  std::string name = "treebank";
  std::string language = "und";
  std::vector<Sentence> sentences;

  size_t size() const { return sentences.size(); }
  size_t WordCount() const;
  bool operator==(const Treebank& o) const = default;
};

// Reads CoNLL-U; throws ParseError naming the offending line.
Treebank ReadConllu(std::istream& in, std::string name = "treebank",
                    std::string language = "und");
Treebank ReadConlluString(std::string_view text, std::string name = "treebank",
                          std::string language = "und");
Treebank ReadConlluFile(const std::string& path, std::string language = "und");

void WriteConllu(const Treebank& tb, std::ostream& out);
std::string WriteConlluString(const Treebank& tb);

// Checks the sentence invariants (ids 1..n, head ranges, deprel iff head,
// MWT ranges); throws DataError.
void ValidateSentence(const Sentence& s);

inline constexpr std::string_view kSourceCommentKey = "source_treebank";

// Concatenates in order; every sentence gains a "# source_treebank = <name>"
// comment unless it already carries one.
Treebank ConcatTreebanks(const std::vector<Treebank>& parts, std::string name);

struct Split {
  Treebank train;
  Treebank heldout;
};

// Shuffles sentence indices with `seed`, deals them round-robin into k parts
// and returns part `fold` as held-out. Both sides keep corpus order.
Split KFoldSplit(const Treebank& tb, size_t k, size_t fold, uint64_t seed);
// The fold assignment used by KFoldSplit: fold index per sentence.
std::vector<size_t> KFoldAssignment(size_t n, size_t k, uint64_t seed);

// Fills Token::span and MultiwordRange::span. Sentences with text are
// matched left to right against it, skipping whitespace; sentences without
// text use their surface forms. Words inside a multiword token get a
// proportional share of its span. Returns true if any proportional split was
// needed. Throws DataError when forms do not match the text.
bool AssignSpans(Treebank& tb);

// The whitespace-free character stream the spans index into.
std::string SurfaceStream(const Treebank& tb);

}  // namespace udparse

#endif  // UDPARSE_CONLLU_H_
