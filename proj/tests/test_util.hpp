#pragma once

// Shared fixtures for the unit tests. The reference evaluator here is a plain
// loop implementation that shares no code with the tape in autodiff.cpp, so
// finite differences taken through it are an independent oracle.

#include "data.hpp"
#include "model.hpp"
#include "network.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace gfe::testing {

inline double ref_act(Activation a, double x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::elu: return x > 0 ? x : std::exp(x) - 1.0;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

// Forward pass reading weights straight out of the flat parameter vector.
inline std::vector<double> ref_forward(const Network& net, const std::vector<double>& z) {
  std::vector<double> x = z;
  const Vector& p = net.params();
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    const auto& l = net.layer(k);
    const std::size_t w = net.weight_offset(k), b = net.bias_offset(k);
    std::vector<double> y(static_cast<std::size_t>(l.out));
    for (int r = 0; r < l.out; ++r) {
      double s = p[static_cast<Eigen::Index>(b + r)];
      for (int c = 0; c < l.in; ++c)
        s += p[static_cast<Eigen::Index>(w + static_cast<std::size_t>(r) * l.in + c)] * x[c];
      y[r] = ref_act(l.act, s);
    }
    x = std::move(y);
  }
  return x;
}

inline double ref_loss(LossKind k, const std::vector<double>& y, const std::vector<double>& yh) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (k == LossKind::bce) {
      const double p = std::min(std::max(yh[i], 1e-12), 1.0 - 1e-12);
      s -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
    } else {
      s += (yh[i] - y[i]) * (yh[i] - y[i]);
    }
  }
  if (k == LossKind::bce) return s / static_cast<double>(y.size());
  if (k == LossKind::half_l2) return 0.5 * s;
  return s;
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline double ref_objective(const Network& net, const Vector& z, const Vector& y, LossKind k) {
  return ref_loss(k, to_std(y), ref_forward(net, to_std(z)));
}

inline double rel_err(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

inline Vector random_vector(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Random decoder-shaped network: 1-3 layers of width 1-6, ELU hidden,
// sigmoid output, parameters jittered away from the initialisation.
inline Network random_decoder(std::mt19937_64& rng) {
  const int depth = std::uniform_int_distribution<int>(1, 3)(rng);
  std::uniform_int_distribution<int> width(1, 6);
  std::vector<int> w(static_cast<std::size_t>(depth) + 1);
  for (auto& x : w) x = width(rng);
  Network net = make_decoder(w);
  init_params(net, rng());
  std::normal_distribution<double> jitter(0.0, 0.3);
  for (auto& p : net.params()) p += jitter(rng);
  return net;
}

inline std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "gfe_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

// Writes a tiny MNIST-layout directory with `n` 4x4 images per split.
inline std::string make_idx_dir(const std::string& name, int n) {
  const auto dir = temp_path(name);
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(3);
  for (const char* prefix : {"train", "t10k"}) {
    data::ImageArray imgs;
    imgs.rows = imgs.cols = 4;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      Vector v(16);
      for (auto& x : v) x = static_cast<double>(rng() % 256) / 255.0;
      imgs.images.push_back(v);
      labels.push_back(i % 10);
    }
    const auto a = data::serialize_idx_images(imgs);
    const auto b = data::serialize_idx_labels(labels);
    std::ofstream(dir + "/" + prefix + "-images-idx3-ubyte", std::ios::binary)
        .write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(a.size()));
    std::ofstream(dir + "/" + prefix + "-labels-idx1-ubyte", std::ios::binary)
        .write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  }
  return dir;
}

}  // namespace gfe::testing
