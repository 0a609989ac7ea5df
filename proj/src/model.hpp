#pragma once

#include "common.hpp"
#include "loss.hpp"
#include "network.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gfe {

struct Sample {
  Vector image;  // intensities in [0, 1], row-major
  int label = 0;
};

inline const std::vector<int> kDefaultDecoderWidths{32, 64, 128, 256, 784};

// widths = {latent, hidden..., pixels}; ELU between layers, sigmoid output.
Network make_decoder(const std::vector<int>& widths);
// Mirror of make_decoder(widths): pixels -> ... -> latent, ELU between layers,
// unbounded (identity) output.
Network make_encoder(const std::vector<int>& decoder_widths);

// Fan-in scaled uniform initialisation: weights of a layer with fan-in n are
// drawn from U(-sqrt(6/n), sqrt(6/n)); biases start at zero.
void init_params(Network& net, std::uint64_t seed);

Vector decode(const Network& decoder, std::span<const double> z);
Vector encode(const Network& encoder, std::span<const double> y);

std::vector<int> widths_of(const Network& net);

}  // namespace gfe
