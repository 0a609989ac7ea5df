#pragma once

#include "common.hpp"
#include "model.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace gfe::data {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct ImageArray {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<Vector> images;  // each rows*cols, scaled by 1/255
};

// Big-endian IDX containers. Both throw ParseError with the failing offset.
ImageArray parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes);

// Inverse of the parsers for images whose intensities are multiples of 1/255.
std::vector<std::uint8_t> serialize_idx_images(const ImageArray& images);
std::vector<std::uint8_t> serialize_idx_labels(const std::vector<int>& labels);

std::vector<std::uint8_t> read_file(const std::string& path);

enum class Split : std::uint8_t { train, test };

struct Dataset {
  std::vector<Sample> samples;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  Split split = Split::train;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

Dataset make_dataset(const ImageArray& images, const std::vector<int>& labels, Split split);
Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                         Split split);
// Standard MNIST-family file names inside `dir` (train-* or t10k-*).
Dataset load_mnist_dir(const std::string& dir, Split split);

struct SegmentedSplit {
  Dataset train;  // labels 0-4
  Dataset test;   // labels 5-9
};
SegmentedSplit split_segmented(const Dataset& ds);

// First n samples (or all when n == 0 or n >= size).
Dataset head(const Dataset& ds, std::size_t n);

/// Seeded stream of index batches over a dataset.
///
/// With replacement every batch draws `batch_size` indices uniformly. Without
/// replacement the indices of each epoch are a fresh permutation, and a batch
/// never straddles two epochs (the last batch of an epoch may be short).
class BatchStream {
 public:
  BatchStream(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed,
              bool with_replacement = true);
  std::vector<std::size_t> next();

 private:
  std::size_t n_;
  std::size_t batch_size_;
  bool with_replacement_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> perm_;
  std::size_t cursor_ = 0;
};

}  // namespace gfe::data
