#include "network.hpp"

#include <cstring>

namespace gfe {

Network::Network(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw UsageError("network needs at least one layer; use Network::identity");
  std::size_t offset = 0;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.in <= 0 || l.out <= 0) throw UsageError("layer widths must be positive");
    if (k > 0 && layers_[k - 1].out != l.in)
      throw UsageError("layer " + std::to_string(k) + " input width " + std::to_string(l.in) +
                       " does not match previous output width " +
                       std::to_string(layers_[k - 1].out));
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(l.out) * l.in + l.out;
  }
  params_ = Vector::Zero(static_cast<Eigen::Index>(offset));
  input_dim_ = layers_.front().in;
  output_dim_ = layers_.back().out;
}

Network Network::identity(int dim) {
  if (dim <= 0) throw UsageError("identity network dimension must be positive");
  Network n;
  n.input_dim_ = dim;
  n.output_dim_ = dim;
  return n;
}

Eigen::Map<const RowMatrix> Network::weights(std::size_t k) const {
  const auto& l = layers_.at(k);
  return {params_.data() + offsets_[k], l.out, l.in};
}

Eigen::Map<RowMatrix> Network::weights(std::size_t k) {
  const auto& l = layers_.at(k);
  return {params_.data() + offsets_[k], l.out, l.in};
}

Eigen::Map<const Vector> Network::bias(std::size_t k) const {
  return {params_.data() + bias_offset(k), layers_.at(k).out};
}

Eigen::Map<Vector> Network::bias(std::size_t k) {
  return {params_.data() + bias_offset(k), layers_.at(k).out};
}

std::uint64_t Network::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& l : layers_) {
    mix(&l.in, sizeof l.in);
    mix(&l.out, sizeof l.out);
  }
  mix(params_.data(), sizeof(double) * static_cast<std::size_t>(params_.size()));
  return h;
}

}  // namespace gfe
