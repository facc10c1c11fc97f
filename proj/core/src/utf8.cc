#include "udparse/utf8.h"

namespace udparse::utf8 {
namespace {

size_t SequenceLength(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

}  // namespace

std::vector<Char> Split(std::string_view s) {
  std::vector<Char> out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    size_t len = SequenceLength(static_cast<unsigned char>(s[i]));
    if (i + len > s.size()) len = 1;
    for (size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.push_back({s.substr(i, len), i, i + len});
    i += len;
  }
  return out;
}

std::vector<std::string> Chars(std::string_view s) {
  std::vector<std::string> out;
  for (const Char& c : Split(s)) out.emplace_back(c.text);
  return out;
}

size_t Length(std::string_view s) { return Split(s).size(); }

bool IsSpace(std::string_view ch) {
  if (ch.size() == 1) {
    const char c = ch[0];
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
  }
  return ch == "\xC2\xA0" || ch == "\xC2\x85" || ch == "\xE3\x80\x80" ||
         ch == "\xE2\x80\xA8" || ch == "\xE2\x80\xA9" ||
         ch == "\xE2\x80\xAF" ||
         (ch.size() == 3 && ch[0] == '\xE2' && ch[1] == '\x80' &&
          static_cast<unsigned char>(ch[2]) >= 0x80 &&
          static_cast<unsigned char>(ch[2]) <= 0x8A);
}

bool IsNewline(std::string_view ch) {
  return ch == "\n" || ch == "\r" || ch == "\xE2\x80\xA8" ||
         ch == "\xE2\x80\xA9";
}

std::string_view Trim(std::string_view s) {
  const auto chars = Split(s);
  size_t first = 0;
  while (first < chars.size() && IsSpace(chars[first].text)) ++first;
  if (first == chars.size()) return s.substr(s.size());
  size_t last = chars.size();
  while (last > first && IsSpace(chars[last - 1].text)) --last;
  return s.substr(chars[first].begin, chars[last - 1].end - chars[first].begin);
}

}  // namespace udparse::utf8
