#include "udparse/conllu.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "udparse/error.h"
#include "udparse/rng.h"
#include "udparse/utf8.h"

namespace udparse {
namespace {

std::vector<std::string_view> SplitTabs(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  for (;;) {
    const size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

bool ParseInt(std::string_view s, int& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool IsBlank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

std::string CommentPrefix(std::string_view key) {
  return "# " + std::string(key) + " =";
}

class SentenceBuilder {
 public:
  bool empty() const { return sentence_.tokens.empty() && sentence_.comments.empty(); }

  void AddComment(std::string_view line) {
    sentence_.comments.emplace_back(line);
    static const std::string kText = "# text =";
    if (line.substr(0, kText.size()) == kText) {
      std::string_view value = line.substr(kText.size());
      if (!value.empty() && value[0] == ' ') value.remove_prefix(1);
      sentence_.text = std::string(value);
    }
  }

  void AddFields(const std::vector<std::string_view>& f, size_t line_no,
                 std::string_view raw_line) {
    const std::string_view id = f[0];
    const int expected = static_cast<int>(sentence_.tokens.size()) + 1;
    if (id.find('.') != std::string_view::npos) {
      sentence_.comments.emplace_back(raw_line);
      return;
    }
    const size_t dash = id.find('-');
    if (dash != std::string_view::npos) {
      MultiwordRange mwt;
      if (!ParseInt(id.substr(0, dash), mwt.start) ||
          !ParseInt(id.substr(dash + 1), mwt.end)) {
        throw ParseError(line_no, "bad multiword id '" + std::string(id) + "'");
      }
      if (mwt.start != expected) {
        throw ParseError(line_no, "multiword range " + std::string(id) +
                                      " does not start at word " +
                                      std::to_string(expected));
      }
      if (mwt.end < mwt.start) {
        throw ParseError(line_no, "multiword range end before start");
      }
      if (!sentence_.mwts.empty() && sentence_.mwts.back().end >= mwt.start) {
        throw ParseError(line_no, "overlapping multiword ranges");
      }
      mwt.form = std::string(f[1]);
      mwt.misc = std::string(f[9]);
      sentence_.mwts.push_back(std::move(mwt));
      mwt_lines_.push_back(line_no);
      return;
    }
    Token t;
    if (!ParseInt(id, t.id)) {
      throw ParseError(line_no, "bad token id '" + std::string(id) + "'");
    }
    if (t.id != expected) {
      throw ParseError(line_no, "non-contiguous id " + std::to_string(t.id) +
                                    ", expected " + std::to_string(expected));
    }
    t.form = std::string(f[1]);
    t.lemma = std::string(f[2]);
    t.upos = std::string(f[3]);
    t.xpos = std::string(f[4]);
    t.feats = std::string(f[5]);
    if (f[6] != "_") {
      int head = 0;
      if (!ParseInt(f[6], head)) {
        throw ParseError(line_no, "bad head '" + std::string(f[6]) + "'");
      }
      t.head = head;
    }
    if (f[7] != "_") t.deprel = std::string(f[7]);
    if (t.head.has_value() != t.deprel.has_value()) {
      throw ParseError(line_no, "head and deprel must be both set or both '_'");
    }
    t.deps = std::string(f[8]);
    t.misc = std::string(f[9]);
    sentence_.tokens.push_back(std::move(t));
    token_lines_.push_back(line_no);
  }

  Sentence Finish(size_t line_no) {
    if (sentence_.tokens.empty()) {
      throw ParseError(line_no, "sentence block without tokens");
    }
    const int n = static_cast<int>(sentence_.tokens.size());
    for (size_t i = 0; i < sentence_.tokens.size(); ++i) {
      const Token& t = sentence_.tokens[i];
      if (!t.head) continue;
      if (*t.head < 0 || *t.head > n) {
        throw ParseError(token_lines_[i], "head " + std::to_string(*t.head) +
                                              " out of range [0, " +
                                              std::to_string(n) + "]");
      }
      if (*t.head == t.id) throw ParseError(token_lines_[i], "token is its own head");
    }
    for (size_t i = 0; i < sentence_.mwts.size(); ++i) {
      if (sentence_.mwts[i].end > n) {
        throw ParseError(mwt_lines_[i], "multiword range beyond last word");
      }
    }
    Sentence out = std::move(sentence_);
    sentence_ = Sentence();
    token_lines_.clear();
    mwt_lines_.clear();
    return out;
  }

 private:
  Sentence sentence_;
  std::vector<size_t> token_lines_;
  std::vector<size_t> mwt_lines_;
};

}  // namespace

std::optional<std::string> Sentence::Comment(std::string_view key) const {
  const std::string prefix = CommentPrefix(key);
  for (const std::string& c : comments) {
    if (c.compare(0, prefix.size(), prefix) == 0) {
      std::string_view v(c);
      v.remove_prefix(prefix.size());
      if (!v.empty() && v[0] == ' ') v.remove_prefix(1);
      return std::string(v);
    }
  }
  return std::nullopt;
}

void Sentence::SetComment(std::string_view key, std::string_view value) {
  const std::string prefix = CommentPrefix(key);
  const std::string line = prefix + " " + std::string(value);
  if (key == "text") text = std::string(value);
  for (std::string& c : comments) {
    if (c.compare(0, prefix.size(), prefix) == 0) {
      c = line;
      return;
    }
  }
  comments.push_back(line);
}

std::vector<int> Sentence::Heads() const {
  std::vector<int> heads;
  heads.reserve(tokens.size());
  for (const Token& t : tokens) heads.push_back(t.head ? *t.head : -1);
  return heads;
}

bool Sentence::FullyAnnotated() const {
  return std::all_of(tokens.begin(), tokens.end(),
                     [](const Token& t) { return t.head && t.deprel; });
}

bool Sentence::IsTree() const {
  if (tokens.empty() || !FullyAnnotated()) return false;
  const int n = static_cast<int>(tokens.size());
  int roots = 0;
  for (const Token& t : tokens) {
    if (*t.head < 0 || *t.head > n || *t.head == t.id) return false;
    if (*t.head == 0) ++roots;
  }
  if (roots != 1) return false;
  // Every token must reach the root within n steps.
  for (int i = 1; i <= n; ++i) {
    int cur = i;
    for (int steps = 0; cur != 0; ++steps) {
      if (steps > n) return false;
      cur = *tokens[cur - 1].head;
    }
  }
  return true;
}

std::vector<std::string> Sentence::Forms() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const Token& t : tokens) out.push_back(t.form);
  return out;
}

size_t Treebank::WordCount() const {
  size_t n = 0;
  for (const Sentence& s : sentences) n += s.size();
  return n;
}

Treebank ReadConllu(std::istream& in, std::string name, std::string language) {
  Treebank tb;
  tb.name = std::move(name);
  tb.language = std::move(language);
  SentenceBuilder builder;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (IsBlank(line)) {
      if (!builder.empty()) tb.sentences.push_back(builder.Finish(line_no));
      continue;
    }
    if (line[0] == '#') {
      builder.AddComment(line);
      continue;
    }
    const std::vector<std::string_view> fields = SplitTabs(line);
    if (fields.size() != 10) {
      throw ParseError(line_no, "expected 10 tab-separated columns, found " +
                                    std::to_string(fields.size()));
    }
    builder.AddFields(fields, line_no, line);
  }
  if (!builder.empty()) tb.sentences.push_back(builder.Finish(line_no + 1));
  return tb;
}

Treebank ReadConlluString(std::string_view text, std::string name,
                          std::string language) {
  std::istringstream in{std::string(text)};
  return ReadConllu(in, std::move(name), std::move(language));
}

Treebank ReadConlluFile(const std::string& path, std::string language) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string name = path;
  const size_t slash = name.find_last_of('/');
  if (slash != std::string::npos) name = name.substr(slash + 1);
  const size_t dot = name.find('.');
  if (dot != std::string::npos && dot > 0) name = name.substr(0, dot);
  return ReadConllu(in, name, std::move(language));
}

void WriteConllu(const Treebank& tb, std::ostream& out) {
  for (const Sentence& s : tb.sentences) {
    for (const std::string& c : s.comments) out << c << '\n';
    size_t next_mwt = 0;
    for (const Token& t : s.tokens) {
      while (next_mwt < s.mwts.size() && s.mwts[next_mwt].start == t.id) {
        const MultiwordRange& m = s.mwts[next_mwt++];
        out << m.start << '-' << m.end << '\t' << m.form
            << "\t_\t_\t_\t_\t_\t_\t_\t" << m.misc << '\n';
      }
      out << t.id << '\t' << t.form << '\t' << t.lemma << '\t' << t.upos << '\t'
          << t.xpos << '\t' << t.feats << '\t';
      if (t.head) {
        out << *t.head;
      } else {
        out << '_';
      }
      out << '\t' << (t.deprel ? *t.deprel : std::string("_")) << '\t' << t.deps
          << '\t' << t.misc << '\n';
    }
    out << '\n';
  }
}

std::string WriteConlluString(const Treebank& tb) {
  std::ostringstream out;
  WriteConllu(tb, out);
  return out.str();
}

void ValidateSentence(const Sentence& s) {
  const int n = static_cast<int>(s.tokens.size());
  for (int i = 0; i < n; ++i) {
    const Token& t = s.tokens[i];
    if (t.id != i + 1) throw DataError("token ids must be 1..n in order");
    if (t.head.has_value() != t.deprel.has_value()) {
      throw DataError("token " + std::to_string(t.id) + ": deprel set iff head set");
    }
    if (t.head && (*t.head < 0 || *t.head > n || *t.head == t.id)) {
      throw DataError("token " + std::to_string(t.id) + ": head out of range");
    }
  }
  int last_end = 0;
  for (const MultiwordRange& m : s.mwts) {
    if (m.start > m.end || m.start <= last_end || m.end > n || m.start < 1) {
      throw DataError("invalid multiword range " + std::to_string(m.start) + "-" +
                      std::to_string(m.end));
    }
    last_end = m.end;
  }
}

Treebank ConcatTreebanks(const std::vector<Treebank>& parts, std::string name) {
  if (parts.empty()) throw Error("concat_treebanks: no treebanks given");
  Treebank out;
  out.name = std::move(name);
  out.language = parts.front().language;
  for (const Treebank& part : parts) {
    if (part.language != out.language) out.language = "mul";
    for (const Sentence& s : part.sentences) {
      Sentence copy = s;
      if (!copy.Comment(kSourceCommentKey)) copy.SetComment(kSourceCommentKey, part.name);
      out.sentences.push_back(std::move(copy));
    }
  }
  return out;
}

std::vector<size_t> KFoldAssignment(size_t n, size_t k, uint64_t seed) {
  if (k < 2) throw Error("kfold: k must be at least 2");
  if (k > n) {
    throw DataError("kfold: k=" + std::to_string(k) + " exceeds sentence count " +
                    std::to_string(n));
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(seed);
  rng.Shuffle(order);
  std::vector<size_t> fold_of(n);
  for (size_t pos = 0; pos < n; ++pos) fold_of[order[pos]] = pos % k;
  return fold_of;
}

Split KFoldSplit(const Treebank& tb, size_t k, size_t fold, uint64_t seed) {
  if (fold >= k) throw Error("kfold: fold index out of range");
  const std::vector<size_t> fold_of = KFoldAssignment(tb.size(), k, seed);
  Split split;
  split.train.name = tb.name + ".train" + std::to_string(fold);
  split.heldout.name = tb.name + ".heldout" + std::to_string(fold);
  split.train.language = split.heldout.language = tb.language;
  for (size_t i = 0; i < tb.size(); ++i) {
    (fold_of[i] == fold ? split.heldout : split.train)
        .sentences.push_back(tb.sentences[i]);
  }
  return split;
}

namespace {

std::vector<std::string_view> SolidChars(std::string_view s) {
  std::vector<std::string_view> out;
  for (const utf8::Char& c : utf8::Split(s)) {
    if (!utf8::IsSpace(c.text)) out.push_back(c.text);
  }
  return out;
}

}  // namespace

bool AssignSpans(Treebank& tb) {
  bool proportional = false;
  size_t offset = 0;
  for (size_t si = 0; si < tb.sentences.size(); ++si) {
    Sentence& s = tb.sentences[si];
    std::vector<std::string_view> text_chars;
    size_t text_pos = 0;
    if (s.text) text_chars = SolidChars(*s.text);

    auto consume = [&](std::string_view surface) -> CharSpan {
      const std::vector<std::string_view> chars = SolidChars(surface);
      const size_t begin = offset;
      for (std::string_view c : chars) {
        if (s.text) {
          if (text_pos >= text_chars.size() || text_chars[text_pos] != c) {
            throw DataError("sentence " + std::to_string(si + 1) + ": form '" +
                            std::string(surface) + "' does not match text");
          }
          ++text_pos;
        }
        ++offset;
      }
      return {begin, offset};
    };

    size_t mwt_index = 0;
    for (size_t i = 0; i < s.tokens.size();) {
      const int id = s.tokens[i].id;
      if (mwt_index < s.mwts.size() && s.mwts[mwt_index].start == id) {
        MultiwordRange& m = s.mwts[mwt_index++];
        m.span = consume(m.form);
        const size_t first = i;
        const size_t last = static_cast<size_t>(m.end) - 1;
        std::string joined;
        std::vector<size_t> lengths;
        for (size_t w = first; w <= last; ++w) {
          joined += s.tokens[w].form;
          lengths.push_back(std::max<size_t>(SolidChars(s.tokens[w].form).size(), 1));
        }
        const size_t span_len = m.span->second - m.span->first;
        if (SolidChars(joined) == SolidChars(m.form)) {
          size_t pos = m.span->first;
          for (size_t w = first; w <= last; ++w) {
            const size_t len = SolidChars(s.tokens[w].form).size();
            s.tokens[w].span = CharSpan{pos, pos + len};
            pos += len;
          }
        } else {
          proportional = true;
          const size_t total = std::accumulate(lengths.begin(), lengths.end(), size_t{0});
          size_t cum = 0;
          for (size_t w = first; w <= last; ++w) {
            const size_t b = m.span->first + (span_len * cum + total / 2) / total;
            cum += lengths[w - first];
            const size_t e = m.span->first + (span_len * cum + total / 2) / total;
            s.tokens[w].span = CharSpan{b, e};
          }
        }
        i = last + 1;
      } else {
        s.tokens[i].span = consume(s.tokens[i].form);
        ++i;
      }
    }
    if (s.text && text_pos != text_chars.size()) {
      throw DataError("sentence " + std::to_string(si + 1) +
                      ": text has characters not covered by tokens");
    }
  }
  return proportional;
}

std::string SurfaceStream(const Treebank& tb) {
  std::string out;
  for (const Sentence& s : tb.sentences) {
    size_t mwt_index = 0;
    for (size_t i = 0; i < s.tokens.size();) {
      std::string_view surface = s.tokens[i].form;
      size_t next = i + 1;
      if (mwt_index < s.mwts.size() && s.mwts[mwt_index].start == s.tokens[i].id) {
        surface = s.mwts[mwt_index].form;
        next = static_cast<size_t>(s.mwts[mwt_index].end);
        ++mwt_index;
      }
      for (std::string_view c : SolidChars(surface)) out += c;
      i = next;
    }
  }
  return out;
}

}  // namespace udparse
