#include "halfspec/varint.hpp"

#include <string>

#include "halfspec/error.hpp"

namespace halfspec {

void append_varint(std::vector<std::uint8_t>& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<std::uint8_t>((v & 0x7f) | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint64_t read_varint(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  std::uint64_t v = 0;
  for (unsigned shift = 0;; shift += 7) {
    if (pos >= bytes.size()) throw FormatError("truncated varint");
    const std::uint8_t b = bytes[pos++];
    const std::uint64_t payload = b & 0x7f;
    if (shift == 63 && payload > 1) throw FormatError("varint overflows 64 bits");
    if (shift > 63) throw FormatError("varint overflows 64 bits");
    v |= payload << shift;
    if (!(b & 0x80)) return v;
  }
}

std::vector<std::uint8_t> encode_keys(std::span<const std::uint64_t> keys) {
  std::vector<std::uint8_t> out;
  out.reserve(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (i == 0) {
      append_varint(out, keys[0]);
      continue;
    }
    if (keys[i] <= keys[i - 1])
      throw InvalidInput("index keys must be strictly increasing (position " + std::to_string(i) + ")");
    append_varint(out, keys[i] - keys[i - 1]);
  }
  return out;
}

std::vector<std::uint64_t> decode_keys(std::span<const std::uint8_t> bytes, std::size_t count) {
  std::vector<std::uint64_t> keys;
  keys.reserve(count);
  std::size_t pos = 0;
  std::uint64_t key = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t v = read_varint(bytes, pos);
    if (i == 0) {
      key = v;
    } else {
      if (v == 0) throw FormatError("zero gap in index stream");
      if (key + v < key) throw FormatError("index key overflows 64 bits");
      key += v;
    }
    keys.push_back(key);
  }
  if (pos != bytes.size()) throw FormatError("trailing bytes after index stream");
  return keys;
}

std::vector<std::uint8_t> encode_indices(std::span<const IndexPair> pairs, std::size_t n) {
  if (n == 0) throw InvalidInput("pixel count must be positive");
  std::vector<std::uint64_t> keys(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].pixel >= n) throw InvalidInput("pixel index out of range");
    keys[i] = static_cast<std::uint64_t>(pairs[i].k) * n + pairs[i].pixel;
  }
  return encode_keys(keys);
}

std::vector<IndexPair> decode_indices(std::span<const std::uint8_t> bytes, std::size_t count,
                                      std::size_t n) {
  if (n == 0) throw InvalidInput("pixel count must be positive");
  const auto keys = decode_keys(bytes, count);
  std::vector<IndexPair> pairs(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) pairs[i] = {keys[i] / n, keys[i] % n};
  return pairs;
}

std::size_t IndexSizeTracker::delta(std::uint64_t key) const {
  auto next = keys_.lower_bound(key);
  const bool has_next = next != keys_.end();
  const bool has_prev = next != keys_.begin();
  std::size_t removed = 0, added = 0;
  if (has_prev) {
    const auto prev = *std::prev(next);
    added += varint_length(key - prev);
    if (has_next) {
      removed += varint_length(*next - prev);
      added += varint_length(*next - key);
    }
  } else {
    added += varint_length(key);
    if (has_next) {
      removed += varint_length(*next);
      added += varint_length(*next - key);
    }
  }
  return added - removed;
}

std::size_t IndexSizeTracker::bytes_with(std::uint64_t key) const {
  if (keys_.count(key)) throw InvalidInput("index already present");
  return bytes_ + delta(key);
}

void IndexSizeTracker::insert(std::uint64_t key) {
  bytes_ = bytes_with(key);
  keys_.insert(key);
}

bool IndexSizeTracker::contains(std::uint64_t key) const { return keys_.count(key) > 0; }

}  // namespace halfspec
