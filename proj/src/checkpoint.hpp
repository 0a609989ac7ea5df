#pragma once

// Binary checkpoint, all integers and doubles little-endian:
//
//   char[8]  magic "GFECKPT\0"
//   u32      version (1)
//   u8       method tag (gfe::Method)
//   u8       has_encoder
//   network  decoder
//   network  encoder            (only when has_encoder)
//   u8       optimizer kind     (0 = none, 1 = rmsprop, 2 = adam)
//   f64 x6   lr, rms_alpha, rms_eps, beta1, beta2, adam_eps
//   u64      step
//   u64      n
//   f64[n]   first moment       (adam only)
//   f64[n]   second moment
//
// network := u32 n_layers, then per layer {u32 in, u32 out, u8 act, u8 frozen},
//            u64 n_params, f64[n_params] row-major weights then bias per layer.

#include "config.hpp"
#include "network.hpp"
#include "optim.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gfe {

inline constexpr char kCheckpointMagic[8] = {'G', 'F', 'E', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Method method = Method::gfe_amd;
  Network decoder;
  std::optional<Network> encoder;
  std::optional<OptimizerState> optimizer;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gfe
