#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace deepdfa {

/// Fixed-width set of definition indices. Binary set operations require
/// equal widths and throw ShapeError otherwise.
class BitVec {
 public:
  BitVec() = default;
  explicit BitVec(std::size_t width) : width_(width), words_((width + 63) / 64, 0) {}

  /// Parses a 0/1 string such as "100"; index 0 is the leftmost character.
  static BitVec from_string(const std::string& bits);

  std::size_t width() const { return width_; }
  bool test(std::size_t i) const;
  void set(std::size_t i, bool value = true);
  bool none() const;
  std::size_t count() const;

  BitVec& operator|=(const BitVec& other);
  BitVec& operator&=(const BitVec& other);
  /// Set difference: removes every element of `other`.
  BitVec& subtract(const BitVec& other);

  friend BitVec operator|(BitVec a, const BitVec& b) { return a |= b; }
  friend BitVec operator&(BitVec a, const BitVec& b) { return a &= b; }
  friend BitVec operator-(BitVec a, const BitVec& b) { return a.subtract(b); }

  bool is_subset_of(const BitVec& other) const;

  /// "d0 d1 ... " as 0/1 characters, leftmost = index 0.
  std::string to_string() const;

  friend bool operator==(const BitVec&, const BitVec&) = default;

 private:
  void require_same_width(const BitVec& other) const;

  std::size_t width_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace deepdfa
