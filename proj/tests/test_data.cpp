#include "data.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>

namespace gfe::data {
namespace {

ImageArray tiny_images(int count, std::uint32_t rows, std::uint32_t cols) {
  ImageArray a;
  a.rows = rows;
  a.cols = cols;
  for (int i = 0; i < count; ++i) {
    Vector v(rows * cols);
    for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = ((i * 37 + j * 11) % 256) / 255.0;
    a.images.push_back(v);
  }
  return a;
}

// Hand-built IDX bytes, independent of the serializer.
std::vector<std::uint8_t> handmade_images() {
  return {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 2, 0, 255, 51, 102};
}

TEST(Idx, ParsesHandBuiltImages) {
  const auto a = parse_idx_images(handmade_images());
  ASSERT_EQ(a.images.size(), 2u);
  EXPECT_EQ(a.rows, 1u);
  EXPECT_EQ(a.cols, 2u);
  EXPECT_EQ(a.images[0][0], 0.0);
  EXPECT_EQ(a.images[0][1], 1.0);
  EXPECT_DOUBLE_EQ(a.images[1][0], 0.2);
  EXPECT_DOUBLE_EQ(a.images[1][1], 0.4);
}

TEST(Idx, ParsesHandBuiltLabels) {
  const std::vector<std::uint8_t> b = {0, 0, 8, 1, 0, 0, 0, 3, 7, 0, 9};
  EXPECT_EQ(parse_idx_labels(b), (std::vector<int>{7, 0, 9}));
}

TEST(Idx, RoundTrip) {
  const auto a = tiny_images(5, 3, 4);
  const auto bytes = serialize_idx_images(a);
  EXPECT_EQ(bytes.size(), 16u + 5 * 12);
  const auto back = parse_idx_images(bytes);
  EXPECT_EQ(back.rows, 3u);
  EXPECT_EQ(back.cols, 4u);
  for (std::size_t i = 0; i < a.images.size(); ++i) EXPECT_EQ(back.images[i], a.images[i]);
  const std::vector<int> labels = {1, 2, 3, 4, 9};
  EXPECT_EQ(parse_idx_labels(serialize_idx_labels(labels)), labels);
}

TEST(Idx, TruncationReportsOffset) {
  auto bytes = handmade_images();
  bytes.pop_back();
  try {
    parse_idx_images(bytes);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), bytes.size());
  }
  EXPECT_THROW(parse_idx_images(std::vector<std::uint8_t>{0, 0, 8}), ParseError);
  EXPECT_THROW(parse_idx_labels(std::vector<std::uint8_t>{0, 0, 8, 1, 0, 0, 0, 4, 1}), ParseError);
}

TEST(Idx, WrongMagicRejected) {
  auto bytes = handmade_images();
  bytes[3] = 1;
  try {
    parse_idx_images(bytes);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  EXPECT_THROW(parse_idx_labels(handmade_images()), ParseError);
}

TEST(Idx, OverflowingDimensionsRejected) {
  const std::vector<std::uint8_t> b = {0, 0, 8, 3, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255};
  EXPECT_THROW(parse_idx_images(b), ParseError);
}

TEST(Dataset, LoadFromFilesAndErrors) {
  const auto img = testing::temp_path("train-images-idx3-ubyte");
  const auto lbl = testing::temp_path("train-labels-idx1-ubyte");
  {
    const auto a = serialize_idx_images(tiny_images(4, 2, 2));
    const auto l = serialize_idx_labels({0, 5, 3, 8});
    std::ofstream(img, std::ios::binary).write(reinterpret_cast<const char*>(a.data()), a.size());
    std::ofstream(lbl, std::ios::binary).write(reinterpret_cast<const char*>(l.data()), l.size());
  }
  const auto ds = load_mnist_dir(std::filesystem::path(img).parent_path().string(), Split::train);
  EXPECT_EQ(ds.size(), 4u);
  EXPECT_EQ(ds.samples[1].label, 5);
  for (const auto& s : ds.samples) {
    EXPECT_GE(s.image.minCoeff(), 0.0);
    EXPECT_LE(s.image.maxCoeff(), 1.0);
  }
  EXPECT_THROW(load_mnist_dir("/nonexistent/dir", Split::test), IoError);
  const auto l3 = serialize_idx_labels({1, 2, 3});
  std::ofstream(lbl, std::ios::binary).write(reinterpret_cast<const char*>(l3.data()), l3.size());
  EXPECT_THROW(load_idx_dataset(img, lbl, Split::train), UsageError);
}

Dataset labelled(const std::vector<int>& labels) {
  return make_dataset(tiny_images(static_cast<int>(labels.size()), 1, 3), labels, Split::test);
}

TEST(Dataset, SegmentedSplitByLabel) {
  const auto ds = labelled({0, 5, 9, 4, 1, 7});
  const auto parts = split_segmented(ds);
  EXPECT_EQ(parts.train.size(), 3u);
  EXPECT_EQ(parts.test.size(), 3u);
  for (const auto& s : parts.train.samples) EXPECT_LT(s.label, 5);
  for (const auto& s : parts.test.samples) EXPECT_GE(s.label, 5);
  EXPECT_EQ(parts.test.rows, 1u);
}

TEST(Dataset, Head) {
  const auto ds = labelled({0, 1, 2, 3});
  EXPECT_EQ(head(ds, 2).size(), 2u);
  EXPECT_EQ(head(ds, 0).size(), 4u);
  EXPECT_EQ(head(ds, 10).size(), 4u);
  EXPECT_EQ(head(ds, 2).samples[1].label, 1);
}

TEST(BatchStream, SeededAndInRange) {
  BatchStream a(10, 4, 3), b(10, 4, 3), c(10, 4, 4);
  bool differs = false;
  for (int i = 0; i < 20; ++i) {
    const auto x = a.next(), y = b.next(), z = c.next();
    EXPECT_EQ(x, y);
    differs |= x != z;
    EXPECT_EQ(x.size(), 4u);
    for (auto k : x) EXPECT_LT(k, 10u);
  }
  EXPECT_TRUE(differs);
}

TEST(BatchStream, WithoutReplacementCoversEachEpoch) {
  BatchStream s(10, 4, 1, false);
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::multiset<std::size_t> seen;
    std::vector<std::size_t> sizes;
    while (seen.size() < 10) {
      const auto b = s.next();
      sizes.push_back(b.size());
      seen.insert(b.begin(), b.end());
    }
    EXPECT_EQ(sizes, (std::vector<std::size_t>{4, 4, 2}));
    for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(seen.count(k), 1u);
  }
}

TEST(BatchStream, RejectsEmpty) {
  EXPECT_THROW(BatchStream(0, 4, 1), UsageError);
  EXPECT_THROW(BatchStream(4, 0, 1), UsageError);
}

}  // namespace
}  // namespace gfe::data
