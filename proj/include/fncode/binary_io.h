#ifndef FNCODE_BINARY_IO_H_
#define FNCODE_BINARY_IO_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fncode {

// Little-endian encoder into an in-memory buffer.
class ByteWriter {
 public:
  void U8(uint8_t v);
  void U32(uint32_t v);
  void F32(float v);
  void Bytes(std::string_view bytes);
  void F32Array(std::span<const float> values);

  const std::string& buffer() const { return buffer_; }

 private:
  std::string buffer_;
};

// Little-endian decoder over a byte buffer. Every read names the field it
// decodes so truncation errors point at the offending field.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  uint8_t U8(const char* field);
  uint32_t U32(const char* field);
  float F32(const char* field);
  std::string Bytes(size_t n, const char* field);
  std::vector<float> F32Array(size_t n, const char* field);

  size_t remaining() const { return data_.size() - pos_; }
  // Throws if unread bytes remain.
  void ExpectEnd(const char* field) const;

 private:
  void Require(size_t n, const char* field) const;

  std::string_view data_;
  size_t pos_ = 0;
};

std::string ReadFileBytes(const std::string& path);
void WriteFileBytes(const std::string& path, std::string_view bytes);

// 64-bit FNV-1a, used for manifest output hashes.
uint64_t Fnv1a64(std::string_view bytes);
std::string HexDigest(uint64_t hash);

}  // namespace fncode

#endif  // FNCODE_BINARY_IO_H_
