#include "atlas/descriptor.hpp"

#include <bit>

#include "atlas/errors.hpp"

namespace atlas {

int BinaryDescriptor::hamming_distance(const BinaryDescriptor& other) const {
  if (num_bits_ != other.num_bits_) {
    throw LengthMismatch("hamming_distance: descriptor lengths differ");
  }
  int dist = 0;
  for (std::size_t i = 0; i < bytes_.size(); ++i) {
    dist += std::popcount(static_cast<unsigned>(bytes_[i] ^ other.bytes_[i]));
  }
  return dist;
}

std::string BinaryDescriptor::to_hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes_.size() * 2);
  for (std::uint8_t b : bytes_) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

namespace {
int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

BinaryDescriptor BinaryDescriptor::from_hex(const std::string& hex, int num_bits) {
  const std::size_t expected_bytes = (num_bits + 7) / 8;
  if (hex.size() != expected_bytes * 2) {
    throw LengthMismatch("descriptor hex length " + std::to_string(hex.size()) +
                         " does not encode " + std::to_string(num_bits) + " bits");
  }
  std::vector<std::uint8_t> bytes(expected_bytes);
  for (std::size_t i = 0; i < expected_bytes; ++i) {
    const int hi = hex_value(hex[2 * i]);
    const int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) {
      throw MalformedLog("invalid hex digit in descriptor: " + hex);
    }
    bytes[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return BinaryDescriptor(num_bits, std::move(bytes));
}

}  // namespace atlas
