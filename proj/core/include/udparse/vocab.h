#ifndef UDPARSE_VOCAB_H_
#define UDPARSE_VOCAB_H_

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace udparse {

// Ordered string <-> index map.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(const std::vector<std::string>& items) {
    for (const std::string& s : items) Add(s);
  }

  size_t Add(const std::string& item) {
    auto [it, inserted] = index_.emplace(item, items_.size());
    if (inserted) items_.push_back(item);
    return it->second;
  }
  std::optional<size_t> Find(const std::string& item) const {
    auto it = index_.find(item);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  // Index, or `fallback` for unknown items.
  size_t Get(const std::string& item, size_t fallback) const {
    auto it = index_.find(item);
    return it == index_.end() ? fallback : it->second;
  }
  bool Contains(const std::string& item) const { return index_.count(item) > 0; }
  const std::string& operator[](size_t i) const { return items_[i]; }
  size_t size() const { return items_.size(); }
  const std::vector<std::string>& items() const { return items_; }

  bool operator==(const Vocab& o) const { return items_ == o.items_; }

 private:
  std::vector<std::string> items_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace udparse

#endif  // UDPARSE_VOCAB_H_
