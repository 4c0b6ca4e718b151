#include "deepdfa/bitvec.hpp"

#include <bit>

#include "deepdfa/error.hpp"

namespace deepdfa {

BitVec BitVec::from_string(const std::string& bits) {
  BitVec v(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      v.set(i);
    } else if (bits[i] != '0') {
      throw ValidationError("bit string may contain only 0 and 1: '" + bits + "'");
    }
  }
  return v;
}

bool BitVec::test(std::size_t i) const {
  if (i >= width_) throw ShapeError("bit " + std::to_string(i) + " outside width " + std::to_string(width_));
  return (words_[i / 64] >> (i % 64)) & 1U;
}

void BitVec::set(std::size_t i, bool value) {
  if (i >= width_) throw ShapeError("bit " + std::to_string(i) + " outside width " + std::to_string(width_));
  const std::uint64_t mask = std::uint64_t{1} << (i % 64);
  if (value) {
    words_[i / 64] |= mask;
  } else {
    words_[i / 64] &= ~mask;
  }
}

bool BitVec::none() const {
  for (auto w : words_) {
    if (w != 0) return false;
  }
  return true;
}

std::size_t BitVec::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

void BitVec::require_same_width(const BitVec& other) const {
  if (width_ != other.width_) {
    throw ShapeError("bit vector widths differ: " + std::to_string(width_) + " vs " + std::to_string(other.width_));
  }
}

BitVec& BitVec::operator|=(const BitVec& other) {
  require_same_width(other);
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
  return *this;
}

BitVec& BitVec::operator&=(const BitVec& other) {
  require_same_width(other);
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= other.words_[i];
  return *this;
}

BitVec& BitVec::subtract(const BitVec& other) {
  require_same_width(other);
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= ~other.words_[i];
  return *this;
}

bool BitVec::is_subset_of(const BitVec& other) const {
  require_same_width(other);
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if ((words_[i] & ~other.words_[i]) != 0) return false;
  }
  return true;
}

std::string BitVec::to_string() const {
  std::string s(width_, '0');
  for (std::size_t i = 0; i < width_; ++i) {
    if (test(i)) s[i] = '1';
  }
  return s;
}

}  // namespace deepdfa
