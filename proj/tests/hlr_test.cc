#include "fncode/hlr.h"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "fncode/binary_io.h"
#include "fncode/error.h"
#include "test_util.h"

namespace fncode {
namespace {

// Hand-rolled little-endian writer, independent of ByteWriter.
void PutU32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutF32(std::string& s, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  PutU32(s, v);
}

std::string RawHlr(uint32_t n, uint32_t dim, bool labels, const std::string& tag,
                   const std::vector<float>& vectors,
                   const std::vector<uint32_t>& label_values) {
  std::string s = "HLR1";
  PutU32(s, 1);
  PutU32(s, n);
  PutU32(s, dim);
  s.push_back(labels ? 1 : 0);
  s.push_back(static_cast<char>(tag.size()));
  s += tag;
  for (float f : vectors) PutF32(s, f);
  for (uint32_t l : label_values) PutU32(s, l);
  return s;
}

FormatErrorKind KindOf(std::string_view bytes) {
  try {
    DecodeHlr(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode succeeded";
  return FormatErrorKind::kBadValue;
}

TEST(AveragePoolTest, ConstantChannelsAndHandExample) {
  ActivationTensor t{2, 2, 2, {1, 2, 3, 4, 0, 0, 0, 8}, {}};
  EXPECT_EQ(AveragePool(t), (std::vector<double>{2.5, 2.0}));

  ActivationTensor c{3, 5, 4, std::vector<double>(60), {}};
  for (int ch = 0; ch < 3; ++ch) {
    for (int i = 0; i < 20; ++i) c.values[ch * 20 + i] = ch + 0.25;
  }
  const std::vector<double> pooled = AveragePool(c);
  for (int ch = 0; ch < 3; ++ch) EXPECT_DOUBLE_EQ(pooled[ch], ch + 0.25);
}

TEST(AveragePoolTest, SixtyFourChannelsReduceToSixtyFour) {
  ActivationTensor t{64, 56, 56, std::vector<double>(64 * 56 * 56, 1.0), {}};
  EXPECT_EQ(AveragePool(t).size(), 64u);
}

TEST(AveragePoolTest, EmptyOrMisSizedRejected) {
  EXPECT_THROW(AveragePool(ActivationTensor{}), InvalidArgument);
  EXPECT_THROW(AveragePool(ActivationTensor{2, 2, 2, {1, 2, 3}, {}}), InvalidArgument);
}

TEST(NormalizeTest, Examples) {
  const std::vector<double> v = {3, 4};
  const std::vector<double> n = Normalize(v);
  EXPECT_DOUBLE_EQ(n[0], 0.6);
  EXPECT_DOUBLE_EQ(n[1], 0.8);
  EXPECT_EQ(Normalize(n), n);

  SetWarningsEnabled(false);
  bool was_zero = false;
  const std::vector<double> zero = {0, 0};
  EXPECT_EQ(Normalize(zero, &was_zero), zero);
  EXPECT_TRUE(was_zero);
  SetWarningsEnabled(true);
}

TEST(BuildHlrDatasetTest, PoolsNormalizesAndKeepsLabels) {
  std::vector<ActivationTensor> ts = {
      {2, 1, 2, {3, 3, 4, 4}, 5u},
      {2, 1, 2, {0, 0, 1, 1}, 2u},
  };
  const HlrDataset d = BuildHlrDataset(ts, "L2");
  EXPECT_EQ(d.n_samples, 2u);
  EXPECT_EQ(d.dim, 2u);
  EXPECT_EQ(d.layer_tag, "L2");
  EXPECT_FLOAT_EQ(d.row(0)[0], 0.6f);
  EXPECT_FLOAT_EQ(d.row(0)[1], 0.8f);
  EXPECT_FLOAT_EQ(d.row(1)[1], 1.0f);
  ASSERT_TRUE(d.labels.has_value());
  EXPECT_EQ(*d.labels, (std::vector<uint32_t>{5, 2}));
  for (uint32_t i = 0; i < d.n_samples; ++i) {
    double s = 0;
    for (float f : d.row(i)) s += f * f;
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-5);
  }
}

TEST(BuildHlrDatasetTest, CountsZeroVectors) {
  SetWarningsEnabled(false);
  std::vector<ActivationTensor> ts = {{1, 1, 1, {0}, {}}, {1, 1, 1, {2}, {}}};
  const HlrDataset d = BuildHlrDataset(ts, "L1");
  SetWarningsEnabled(true);
  EXPECT_EQ(d.zero_vectors, 1u);
  EXPECT_FALSE(d.labels.has_value());
}

TEST(HlrFormatTest, MatchesHandWrittenLayout) {
  const std::string raw = RawHlr(2, 3, true, "L1", {1, 0, 0, 0, 0.6f, 0.8f}, {4, 7});
  const HlrDataset d = DecodeHlr(raw);
  EXPECT_EQ(d.n_samples, 2u);
  EXPECT_EQ(d.dim, 3u);
  EXPECT_EQ(d.layer_tag, "L1");
  EXPECT_EQ(d.vectors, (std::vector<float>{1, 0, 0, 0, 0.6f, 0.8f}));
  EXPECT_EQ(*d.labels, (std::vector<uint32_t>{4, 7}));
  EXPECT_EQ(EncodeHlr(d), raw);
}

TEST(HlrFormatTest, AbsentLabels) {
  const HlrDataset d = DecodeHlr(RawHlr(1, 2, false, "conv3", {0.6f, 0.8f}, {}));
  EXPECT_FALSE(d.labels.has_value());
  EXPECT_EQ(d.layer_tag, "conv3");
}

TEST(HlrFormatTest, RoundTripIncludingLabelsAndTag) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const uint32_t n = 1 + static_cast<uint32_t>(rng.UniformIndex(30));
    const uint32_t dim = 1 + static_cast<uint32_t>(rng.UniformIndex(20));
    HlrDataset d;
    d.n_samples = n;
    d.dim = dim;
    for (uint32_t i = 0; i < n * dim; ++i) d.vectors.push_back(static_cast<float>(rng.Normal()));
    if (trial % 2 == 0) {
      d.labels.emplace();
      for (uint32_t i = 0; i < n; ++i) d.labels->push_back(static_cast<uint32_t>(rng.UniformIndex(1000)));
    }
    d.layer_tag = "layer" + std::to_string(trial);
    EXPECT_EQ(DecodeHlr(EncodeHlr(d)), d);
  }
}

TEST(HlrFormatTest, FileRoundTrip) {
  testing::TempDir dir("hlr_file");
  const HlrDataset d = testing::MakeDataset({{0.6f, 0.8f}, {1, 0}}, std::vector<uint32_t>{1, 2});
  WriteHlr(d, dir.file("a.hlr"));
  EXPECT_EQ(ReadHlr(dir.file("a.hlr")), d);
  EXPECT_THROW(ReadHlr(dir.file("none.hlr")), IoError);
}

TEST(HlrFormatTest, DistinctErrors) {
  const std::string good = RawHlr(2, 2, true, "L1", {1, 0, 0, 1}, {0, 1});
  std::string magic = good;
  magic[3] = '2';
  EXPECT_EQ(KindOf(magic), FormatErrorKind::kBadMagic);

  std::string version = good;
  version[4] = 2;
  EXPECT_EQ(KindOf(version), FormatErrorKind::kBadVersion);

  EXPECT_EQ(KindOf(good.substr(0, good.size() - 1)), FormatErrorKind::kTruncated);
  EXPECT_EQ(KindOf(good + "z"), FormatErrorKind::kTrailingBytes);
  EXPECT_EQ(KindOf(RawHlr(5, 2, true, "L1", {1, 0, 0, 1}, {0, 1})),
            FormatErrorKind::kTruncated);
  EXPECT_EQ(KindOf(RawHlr(0xffffffffu, 0xffffffffu, false, "L1", {}, {})),
            FormatErrorKind::kOverflow);

  std::string flag = good;
  flag[16] = 2;
  EXPECT_EQ(KindOf(flag), FormatErrorKind::kBadValue);
  EXPECT_EQ(KindOf("HL"), FormatErrorKind::kTruncated);
}

TEST(HlrFormatTest, ErrorNamesField) {
  try {
    DecodeHlr(RawHlr(5, 2, true, "L1", {1, 0, 0, 1}, {0, 1}));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.field(), "vectors");
    EXPECT_NE(std::string(e.what()).find("vectors"), std::string::npos);
  }
}

TEST(BinaryIoTest, ReaderReportsTruncationAndTrailingBytes) {
  ByteWriter w;
  w.U32(7);
  w.F32(1.5f);
  w.U8(3);
  ByteReader r(w.buffer());
  EXPECT_EQ(r.U32("a"), 7u);
  EXPECT_EQ(r.F32("b"), 1.5f);
  EXPECT_THROW(r.ExpectEnd("end"), FormatError);
  EXPECT_EQ(r.U8("c"), 3);
  EXPECT_NO_THROW(r.ExpectEnd("end"));
  EXPECT_THROW(r.U8("d"), FormatError);
}

TEST(BinaryIoTest, Fnv1aKnownValues) {
  EXPECT_EQ(Fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(Fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(HexDigest(0xaf63dc4c8601ec8cull), "af63dc4c8601ec8c");
}

}  // namespace
}  // namespace fncode
