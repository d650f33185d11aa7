#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace atlas {

// Bit-packed binary appearance descriptor. Bit i lives in byte i/8,
// LSB-first within the byte.
class BinaryDescriptor {
 public:
  BinaryDescriptor() : num_bits_(0) {}
  explicit BinaryDescriptor(int num_bits)
      : num_bits_(num_bits), bytes_((num_bits + 7) / 8, 0) {}
  BinaryDescriptor(int num_bits, std::vector<std::uint8_t> bytes)
      : num_bits_(num_bits), bytes_(std::move(bytes)) {}

  int size() const { return num_bits_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  bool bit(int i) const { return (bytes_[i >> 3] >> (i & 7)) & 1; }
  void set_bit(int i, bool value) {
    const std::uint8_t mask = static_cast<std::uint8_t>(1u << (i & 7));
    if (value) {
      bytes_[i >> 3] |= mask;
    } else {
      bytes_[i >> 3] &= static_cast<std::uint8_t>(~mask);
    }
  }
  void flip_bit(int i) { bytes_[i >> 3] ^= static_cast<std::uint8_t>(1u << (i & 7)); }

  int hamming_distance(const BinaryDescriptor& other) const;

  std::string to_hex() const;
  // Throws MalformedLog on bad hex, LengthMismatch if the string does not
  // encode exactly (num_bits+7)/8 bytes.
  static BinaryDescriptor from_hex(const std::string& hex, int num_bits);

  bool operator==(const BinaryDescriptor& other) const {
    return num_bits_ == other.num_bits_ && bytes_ == other.bytes_;
  }

 private:
  int num_bits_;
  std::vector<std::uint8_t> bytes_;
};

}  // namespace atlas
