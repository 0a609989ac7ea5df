#pragma once

#include "common.hpp"

#include <cstdint>
#include <vector>

namespace gfe {

enum class Activation : std::uint8_t { identity = 0, elu = 1, sigmoid = 2 };

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation act = Activation::identity;
  // Frozen layers still transform their input but report zero parameter gradients.
  bool frozen = false;
};

/// A stack of affine layers, each followed by an elementwise activation.
///
/// All weights and biases live in one flat parameter vector so optimizers and
/// gradients can treat the network as a single block. Layer k occupies
/// `out*in` row-major weights followed by `out` biases.
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<LayerSpec> layers);

  // Zero-layer network: D(z) = z.
  static Network identity(int dim);

  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  std::size_t num_layers() const { return layers_.size(); }
  const LayerSpec& layer(std::size_t k) const { return layers_.at(k); }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  void set_frozen(std::size_t k, bool frozen) { layers_.at(k).frozen = frozen; }

  std::size_t param_count() const { return static_cast<std::size_t>(params_.size()); }
  const Vector& params() const { return params_; }
  Vector& params() { return params_; }

  std::size_t weight_offset(std::size_t k) const { return offsets_.at(k); }
  std::size_t bias_offset(std::size_t k) const {
    return offsets_.at(k) + static_cast<std::size_t>(layers_[k].out) * layers_[k].in;
  }

  Eigen::Map<const RowMatrix> weights(std::size_t k) const;
  Eigen::Map<RowMatrix> weights(std::size_t k);
  Eigen::Map<const Vector> bias(std::size_t k) const;
  Eigen::Map<Vector> bias(std::size_t k);

  // FNV-1a over the parameter bytes; used to detect stale trajectories.
  std::uint64_t checksum() const;

  bool all_finite() const { return params_.allFinite(); }

 private:
  std::vector<LayerSpec> layers_;
  std::vector<std::size_t> offsets_;
  Vector params_;
  int input_dim_ = 0;
  int output_dim_ = 0;
};

}  // namespace gfe
