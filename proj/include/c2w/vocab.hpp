#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace c2w {

/// Dense symbol -> id mapping with a reserved unknown id (always 0). Ids of
/// known symbols are assigned in first-appearance order starting at 1.
template <class Key>
class Vocab {
 public:
  static constexpr std::size_t unk_id = 0;

  Vocab() : symbols_(1) {}

  std::size_t add(const Key& k) {
    auto [it, inserted] = ids_.try_emplace(k, symbols_.size());
    if (inserted) symbols_.push_back(k);
    return it->second;
  }

  std::size_t lookup(const Key& k) const {
    auto it = ids_.find(k);
    return it == ids_.end() ? unk_id : it->second;
  }

  bool contains(const Key& k) const { return ids_.count(k) != 0; }

  /// Number of ids including the unknown id.
  std::size_t size() const noexcept { return symbols_.size(); }

  /// Symbol for a known id; id 0 has no symbol.
  const Key& symbol(std::size_t id) const {
    if (id == unk_id || id >= symbols_.size()) throw std::out_of_range("Vocab::symbol: bad id");
    return symbols_[id];
  }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.symbols_ == b.symbols_; }

 private:
  std::map<Key, std::size_t> ids_;
  std::vector<Key> symbols_;  // index 0 is a placeholder for unk
};

using CharVocab = Vocab<char32_t>;
using WordVocab = Vocab<std::u32string>;

}  // namespace c2w
