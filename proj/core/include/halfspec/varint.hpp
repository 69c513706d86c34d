#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <vector>

namespace halfspec {

/// (frequency, pixel) pair of a stored coefficient; flattened key k * n + pixel.
struct IndexPair {
  std::size_t k = 0;
  std::size_t pixel = 0;
  bool operator==(const IndexPair&) const = default;
};

/// Bytes used by the base-128 encoding of v (7 payload bits per byte).
constexpr std::size_t varint_length(std::uint64_t v) {
  std::size_t len = 1;
  while (v >= 0x80) {
    v >>= 7;
    ++len;
  }
  return len;
}

void append_varint(std::vector<std::uint8_t>& out, std::uint64_t v);

/// Reads one varint at `pos`, advancing it. Throws FormatError on truncation
/// or on values that do not fit 64 bits.
std::uint64_t read_varint(std::span<const std::uint8_t> bytes, std::size_t& pos);

/// First key, then successive gaps, each as a varint. Keys must be strictly
/// increasing (InvalidInput otherwise).
std::vector<std::uint8_t> encode_keys(std::span<const std::uint64_t> keys);
std::vector<std::uint64_t> decode_keys(std::span<const std::uint8_t> bytes, std::size_t count);

std::vector<std::uint8_t> encode_indices(std::span<const IndexPair> pairs, std::size_t n);
std::vector<IndexPair> decode_indices(std::span<const std::uint8_t> bytes, std::size_t count,
                                      std::size_t n);

/// Encoded size of a growing key set, maintained incrementally.
class IndexSizeTracker {
 public:
  std::size_t bytes() const { return bytes_; }
  std::size_t size() const { return keys_.size(); }
  /// Size after inserting `key` (which must not be present yet).
  std::size_t bytes_with(std::uint64_t key) const;
  void insert(std::uint64_t key);
  bool contains(std::uint64_t key) const;

 private:
  std::size_t delta(std::uint64_t key) const;

  std::set<std::uint64_t> keys_;
  std::size_t bytes_ = 0;
};

}  // namespace halfspec
