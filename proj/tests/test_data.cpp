#include "eqreg/data.hpp"

#include "eqreg/linops.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

namespace {

using namespace eqreg;
using Bytes = std::vector<std::uint8_t>;

TEST(Idx, SinglePixelFixture) {
  const Bytes b = {0, 0, 0x08, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0xFF};
  const Dataset d = parse_idx(b);
  ASSERT_EQ(d.size(), 1);
  ASSERT_EQ(d.dim(), 1);
  EXPECT_EQ(d.sample(0)[0], 1.0);
  EXPECT_EQ(d.provenance(), Provenance::kIdxFile);
  EXPECT_EQ(d.shape_hint(), (ImageShape{1, 1}));
}

TEST(Idx, RowMajorFlattening) {
  const Bytes b = {0, 0, 0x08, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 0, 51, 102, 153, 204, 255, 0, 0};
  const Dataset d = parse_idx(b);
  ASSERT_EQ(d.size(), 2);
  ASSERT_EQ(d.dim(), 4);
  const double expect0[] = {0.0, 0.2, 0.4, 0.6};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(d.sample(0)[k], expect0[k], 1e-15);
  EXPECT_NEAR(d.sample(1)[0], 0.8, 1e-15);
  EXPECT_EQ(d.sample(1)[1], 1.0);
  EXPECT_EQ(d.sample(1)[3], 0.0);
}

TEST(Idx, TruncatedPayloadNamesByteCounts) {
  const Bytes b = {0, 0, 0x08, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2, 3};
  try {
    parse_idx(b);
    FAIL();
  } catch (const ParseError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("expected 8"), std::string::npos) << what;
    EXPECT_NE(what.find("got 3"), std::string::npos) << what;
    EXPECT_EQ(e.offset(), b.size());
  }
}

TEST(Idx, HeaderErrorsCarryOffsets) {
  auto offset_of = [](const Bytes& b) {
    try {
      parse_idx(b);
    } catch (const ParseError& e) {
      return static_cast<long long>(e.offset());
    }
    return -1LL;
  };
  EXPECT_EQ(offset_of({0, 0, 8}), 3);
  EXPECT_EQ(offset_of({1, 0, 8, 1, 0, 0, 0, 0}), 0);
  EXPECT_EQ(offset_of({0, 0, 0x0B, 1, 0, 0, 0, 0}), 2);
  EXPECT_EQ(offset_of({0, 0, 8, 0}), 3);
  EXPECT_EQ(offset_of({0, 0, 8, 2, 0, 0, 0, 1}), 8);
  EXPECT_EQ(offset_of({0, 0, 8, 1, 0, 0, 0, 1, 7, 7}), 9);
}

TEST(Idx, FloatPayloadIsBigEndian) {
  // 1.5f = 0x3FC00000, -2.0f = 0xC0000000
  const Bytes b = {0, 0, 0x0D, 2, 0, 0, 0, 1, 0, 0, 0, 2, 0x3F, 0xC0, 0, 0, 0xC0, 0, 0, 0};
  const Dataset d = parse_idx(b);
  EXPECT_EQ(d.sample(0)[0], 1.5);
  EXPECT_EQ(d.sample(0)[1], -2.0);
  EXPECT_FALSE(d.shape_hint());
}

TEST(Idx, RoundTripIsBitExact) {
  const Bytes ubyte = {0, 0, 0x08, 3, 0, 0, 0, 3, 0, 0, 0, 2, 0, 0, 0, 3,
                       0, 1, 2, 3, 4, 5, 250, 251, 252, 253, 254, 255, 9, 8, 7, 6, 5, 4};
  EXPECT_EQ(serialize_idx(parse_idx(ubyte), IdxDtype::kUnsignedByte), ubyte);

  const Bytes flt = {0, 0, 0x0D, 2, 0, 0, 0, 2, 0, 0, 0, 1, 0x3F, 0xC0, 0, 0, 0x42, 0x28, 0, 1};
  EXPECT_EQ(serialize_idx(parse_idx(flt), IdxDtype::kFloat), flt);

  const auto path = std::filesystem::temp_directory_path() / "eqreg_idx_roundtrip.idx";
  write_file_bytes(path, ubyte);
  const Dataset d = load_idx_file(path);
  std::filesystem::remove(path);
  EXPECT_EQ(d.size(), 3);
  for (Index i = 0; i < d.size(); ++i) {
    EXPECT_GE(d.sample(i).minCoeff(), 0.0);
    EXPECT_LE(d.sample(i).maxCoeff(), 1.0);
  }
}

TEST(Idx, UnsignedByteNeedsUnitRange) {
  EXPECT_THROW(serialize_idx(Dataset(Matrix::Constant(2, 1, 1.5), Provenance::kSynthetic),
                             IdxDtype::kUnsignedByte),
               InvalidArgument);
}

TEST(Synthetic, SamplesLieInTheFrame) {
  const SyntheticSet s = make_synthetic(40, 7, 25, 110);
  EXPECT_EQ(s.data.size(), 25);
  EXPECT_EQ(s.subspace.q(), 7);
  EXPECT_LE((s.subspace.basis.transpose() * s.subspace.basis - Matrix::Identity(7, 7)).cwiseAbs().maxCoeff(),
            1e-10);
  for (Index i = 0; i < s.data.size(); ++i) {
    const Vector x = s.data.sample(i);
    EXPECT_LE((s.subspace.apply(x) - x).norm(), 1e-10 * (1 + x.norm()));
  }
}

TEST(Synthetic, Cases) {
  const SyntheticSet full = make_synthetic(6, 6, 4, 111);
  EXPECT_LE((full.subspace.to_dense() - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-12);

  const SyntheticSet zero = make_synthetic(5, 2, 1, 112, 0.0);
  EXPECT_EQ(zero.data.sample(0), Vector::Zero(5));

  EXPECT_EQ(make_synthetic(8, 3, 5, 113).data.samples(), make_synthetic(8, 3, 5, 113).data.samples());
  EXPECT_NE(make_synthetic(8, 3, 5, 113).data.samples(), make_synthetic(8, 3, 5, 114).data.samples());
  EXPECT_THROW(make_synthetic(4, 5, 1, 0), InvalidArgument);
}

Dataset indexed(Index n) {
  Matrix m(2, n);
  for (Index i = 0; i < n; ++i) m.col(i) << static_cast<double>(i), -static_cast<double>(i);
  return Dataset(m, Provenance::kSynthetic);
}

TEST(Split, DisjointAndDeterministic) {
  const Dataset d = indexed(50);
  const auto [train, test] = split(d, 30, 15, 7);
  EXPECT_EQ(train.size(), 30);
  EXPECT_EQ(test.size(), 15);
  std::set<double> seen;
  for (Index i = 0; i < train.size(); ++i) seen.insert(train.sample(i)[0]);
  for (Index i = 0; i < test.size(); ++i) EXPECT_FALSE(seen.count(test.sample(i)[0]));

  const auto again = split(d, 30, 15, 7);
  EXPECT_EQ(again.first.samples(), train.samples());
  EXPECT_EQ(again.second.samples(), test.samples());
  EXPECT_NE(split(d, 30, 15, 8).first.samples(), train.samples());
}

TEST(Split, EdgeCases) {
  const Dataset d = indexed(5);
  EXPECT_TRUE(split(d, 5, 0, 1).second.empty());
  EXPECT_THROW(split(d, 4, 2, 1), InvalidArgument);
}

}  // namespace
