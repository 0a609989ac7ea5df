#include "model.hpp"

#include "autodiff.hpp"

#include <cmath>
#include <random>

namespace gfe {

namespace {

std::vector<LayerSpec> chain(const std::vector<int>& widths, Activation hidden, Activation last) {
  if (widths.size() < 2) throw UsageError("need at least two layer widths");
  std::vector<LayerSpec> layers;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const bool is_last = k + 2 == widths.size();
    layers.push_back({widths[k], widths[k + 1], is_last ? last : hidden});
  }
  return layers;
}

}  // namespace

Network make_decoder(const std::vector<int>& widths) {
  return Network(chain(widths, Activation::elu, Activation::sigmoid));
}

Network make_encoder(const std::vector<int>& decoder_widths) {
  std::vector<int> rev(decoder_widths.rbegin(), decoder_widths.rend());
  return Network(chain(rev, Activation::elu, Activation::identity));
}

void init_params(Network& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    const double bound = std::sqrt(6.0 / net.layer(k).in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto W = net.weights(k);
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = dist(rng);
    net.bias(k).setZero();
  }
}

Vector decode(const Network& decoder, std::span<const double> z) {
  ad::ComputationRecord rec(decoder);
  rec.run(z);
  return rec.output();
}

Vector encode(const Network& encoder, std::span<const double> y) {
  ad::ComputationRecord rec(encoder);
  rec.run(y);
  return rec.output();
}

std::vector<int> widths_of(const Network& net) {
  std::vector<int> w;
  if (net.num_layers() == 0) return {net.input_dim()};
  w.push_back(net.layer(0).in);
  for (const auto& l : net.layers()) w.push_back(l.out);
  return w;
}

}  // namespace gfe
