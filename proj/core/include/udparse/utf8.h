#ifndef UDPARSE_UTF8_H_
#define UDPARSE_UTF8_H_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace udparse::utf8 {

// One decoded character with its byte range in the source string.
struct Char {
  std::string_view text;
  size_t begin = 0;  // byte offset
  size_t end = 0;    // byte offset, exclusive
};

// Splits into characters (code points). Invalid bytes become one-byte
// characters so the split always tiles the input.
std::vector<Char> Split(std::string_view s);

// Code point strings only.
std::vector<std::string> Chars(std::string_view s);

size_t Length(std::string_view s);

// ASCII whitespace plus the common Unicode spaces (NBSP, ideographic space,
// the U+2000 block, line/paragraph separators).
bool IsSpace(std::string_view ch);

bool IsNewline(std::string_view ch);

// Strips leading and trailing whitespace.
std::string_view Trim(std::string_view s);

}  // namespace udparse::utf8

#endif  // UDPARSE_UTF8_H_
