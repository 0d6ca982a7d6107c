#include "fncode/binary_io.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "fncode/error.h"

namespace fncode {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace {
bool g_warnings_enabled = true;
}  // namespace

void Warn(const std::string& message) {
  if (g_warnings_enabled) std::cerr << "warning: " << message << "\n";
}

void SetWarningsEnabled(bool enabled) { g_warnings_enabled = enabled; }

void ByteWriter::U8(uint8_t v) { buffer_.push_back(static_cast<char>(v)); }

void ByteWriter::U32(uint32_t v) {
  char raw[4];
  std::memcpy(raw, &v, 4);
  buffer_.append(raw, 4);
}

void ByteWriter::F32(float v) {
  char raw[4];
  std::memcpy(raw, &v, 4);
  buffer_.append(raw, 4);
}

void ByteWriter::Bytes(std::string_view bytes) { buffer_.append(bytes); }

void ByteWriter::F32Array(std::span<const float> values) {
  const size_t offset = buffer_.size();
  buffer_.resize(offset + values.size_bytes());
  if (!values.empty()) {
    std::memcpy(buffer_.data() + offset, values.data(), values.size_bytes());
  }
}

void ByteReader::Require(size_t n, const char* field) const {
  if (remaining() < n) {
    throw FormatError(FormatErrorKind::kTruncated, field,
                      "need " + std::to_string(n) + " bytes, " +
                          std::to_string(remaining()) + " remain");
  }
}

uint8_t ByteReader::U8(const char* field) {
  Require(1, field);
  return static_cast<uint8_t>(data_[pos_++]);
}

uint32_t ByteReader::U32(const char* field) {
  Require(4, field);
  uint32_t v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

float ByteReader::F32(const char* field) {
  Require(4, field);
  float v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

std::string ByteReader::Bytes(size_t n, const char* field) {
  Require(n, field);
  std::string out(data_.substr(pos_, n));
  pos_ += n;
  return out;
}

std::vector<float> ByteReader::F32Array(size_t n, const char* field) {
  if (n > remaining() / sizeof(float)) {
    throw FormatError(FormatErrorKind::kTruncated, field,
                      "declared " + std::to_string(n) + " floats, only " +
                          std::to_string(remaining()) + " bytes remain");
  }
  std::vector<float> out(n);
  if (n > 0) std::memcpy(out.data(), data_.data() + pos_, n * sizeof(float));
  pos_ += n * sizeof(float);
  return out;
}

void ByteReader::ExpectEnd(const char* field) const {
  if (remaining() != 0) {
    throw FormatError(FormatErrorKind::kTrailingBytes, field,
                      std::to_string(remaining()) + " unexpected trailing bytes");
  }
}

std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path + "'");
  return ss.str();
}

void WriteFileBytes(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

uint64_t Fnv1a64(std::string_view bytes) {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string HexDigest(uint64_t hash) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << hash;
  return ss.str();
}

}  // namespace fncode
