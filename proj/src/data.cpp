#include "data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>

namespace gfe::data {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (bytes.size() < offset + 4) throw ParseError("IDX header truncated", bytes.size());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void expect_magic(std::uint32_t got, std::uint32_t want) {
  if (got != want) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "IDX magic 0x%08x, expected 0x%08x", got, want);
    throw ParseError(buf, 0);
  }
}

}  // namespace

ImageArray parse_idx_images(std::span<const std::uint8_t> bytes) {
  expect_magic(read_be32(bytes, 0), kIdxImageMagic);
  const std::uint64_t count = read_be32(bytes, 4);
  ImageArray out;
  out.rows = read_be32(bytes, 8);
  out.cols = read_be32(bytes, 12);
  const std::uint64_t pixels = std::uint64_t{out.rows} * out.cols;
  if (pixels == 0 && count > 0) throw ParseError("IDX image dimensions are zero", 8);
  // count * pixels cannot overflow 64 bits: both factors are below 2^32 and 2^64.
  if (pixels > 0 && count > (std::uint64_t{1} << 63) / pixels)
    throw ParseError("IDX dimensions overflow", 4);
  const std::uint64_t payload = count * pixels;
  constexpr std::size_t header = 16;
  if (bytes.size() - header < payload)
    throw ParseError("IDX image payload truncated: need " + std::to_string(payload) +
                         " bytes, have " + std::to_string(bytes.size() - header),
                     bytes.size());
  out.images.reserve(count);
  const std::uint8_t* p = bytes.data() + header;
  for (std::uint64_t i = 0; i < count; ++i) {
    Vector img(static_cast<Eigen::Index>(pixels));
    for (std::uint64_t j = 0; j < pixels; ++j) img[static_cast<Eigen::Index>(j)] = *p++ / 255.0;
    out.images.push_back(std::move(img));
  }
  return out;
}

std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  expect_magic(read_be32(bytes, 0), kIdxLabelMagic);
  const std::uint64_t count = read_be32(bytes, 4);
  constexpr std::size_t header = 8;
  if (bytes.size() - header < count)
    throw ParseError("IDX label payload truncated: need " + std::to_string(count) +
                         " bytes, have " + std::to_string(bytes.size() - header),
                     bytes.size());
  return {bytes.begin() + header, bytes.begin() + header + static_cast<std::ptrdiff_t>(count)};
}

std::vector<std::uint8_t> serialize_idx_images(const ImageArray& images) {
  std::vector<std::uint8_t> out;
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(images.images.size()));
  write_be32(out, images.rows);
  write_be32(out, images.cols);
  for (const auto& img : images.images)
    for (Eigen::Index j = 0; j < img.size(); ++j)
      out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(img[j], 0.0, 1.0) * 255.0)));
  return out;
}

std::vector<std::uint8_t> serialize_idx_labels(const std::vector<int>& labels) {
  std::vector<std::uint8_t> out;
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) out.push_back(static_cast<std::uint8_t>(l));
  return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset make_dataset(const ImageArray& images, const std::vector<int>& labels, Split split) {
  if (images.images.size() != labels.size())
    throw UsageError("dataset: " + std::to_string(images.images.size()) + " images but " +
                     std::to_string(labels.size()) + " labels");
  Dataset ds;
  ds.rows = images.rows;
  ds.cols = images.cols;
  ds.split = split;
  ds.samples.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) ds.samples.push_back({images.images[i], labels[i]});
  return ds;
}

Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                         Split split) {
  const auto img_bytes = read_file(images_path);
  const auto lbl_bytes = read_file(labels_path);
  return make_dataset(parse_idx_images(img_bytes), parse_idx_labels(lbl_bytes), split);
}

Dataset load_mnist_dir(const std::string& dir, Split split) {
  const std::string prefix = dir + "/" + (split == Split::train ? "train" : "t10k");
  return load_idx_dataset(prefix + "-images-idx3-ubyte", prefix + "-labels-idx1-ubyte", split);
}

SegmentedSplit split_segmented(const Dataset& ds) {
  SegmentedSplit out;
  for (auto* part : {&out.train, &out.test}) {
    part->rows = ds.rows;
    part->cols = ds.cols;
  }
  out.train.split = Split::train;
  out.test.split = Split::test;
  for (const auto& s : ds.samples) (s.label < 5 ? out.train : out.test).samples.push_back(s);
  return out;
}

Dataset head(const Dataset& ds, std::size_t n) {
  if (n == 0 || n >= ds.size()) return ds;
  Dataset out;
  out.rows = ds.rows;
  out.cols = ds.cols;
  out.split = ds.split;
  out.samples.assign(ds.samples.begin(), ds.samples.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

BatchStream::BatchStream(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed,
                         bool with_replacement)
    : n_(dataset_size), batch_size_(batch_size), with_replacement_(with_replacement), rng_(seed) {
  if (n_ == 0) throw UsageError("batch stream over an empty dataset");
  if (batch_size_ == 0) throw UsageError("batch size must be positive");
}

std::vector<std::size_t> BatchStream::next() {
  std::vector<std::size_t> batch;
  batch.reserve(batch_size_);
  if (with_replacement_) {
    std::uniform_int_distribution<std::size_t> pick(0, n_ - 1);
    for (std::size_t i = 0; i < batch_size_; ++i) batch.push_back(pick(rng_));
    return batch;
  }
  if (cursor_ == perm_.size()) {
    perm_.resize(n_);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    std::shuffle(perm_.begin(), perm_.end(), rng_);
    cursor_ = 0;
  }
  const std::size_t take = std::min(batch_size_, perm_.size() - cursor_);
  batch.assign(perm_.begin() + static_cast<std::ptrdiff_t>(cursor_),
               perm_.begin() + static_cast<std::ptrdiff_t>(cursor_ + take));
  cursor_ += take;
  return batch;
}

}  // namespace gfe::data
