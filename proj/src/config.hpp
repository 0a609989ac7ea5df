#pragma once

// Run configuration and its flat key=value text form.
//
// Every field is addressable by a dotted key (flow.tau=5.0); flow keys also
// accept the bare field name (beta=0.5). Lines are
// `key = value`; blank lines and lines starting with '#' are ignored. Unknown
// keys and malformed values raise ConfigError naming the line.

#include "flow.hpp"
#include "loss.hpp"
#include "optim.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gfe {

enum class Method : std::uint8_t { ae, gfe_rk4_adjoint, gfe_rk4_approx, gfe_nesterov, gfe_amd };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);
bool is_gfe(Method m);

enum class SplitMode : std::uint8_t { standard, segmented };

struct TrainConfig {
  Method method = Method::gfe_amd;
  OptimizerHyper optimizer;
  LossKind loss = LossKind::bce;
  std::vector<int> widths = {32, 64, 128, 256, 784};

  int batch_size = 64;
  std::uint64_t images = 5760;  // training image budget
  bool with_replacement = true;
  int eval_every = 0;           // steps between validation rows; 0 = final only
  std::size_t eval_samples = 500;  // validation subset for periodic rows
  std::size_t test_samples = 0;    // final evaluation subset; 0 = whole set
  std::uint64_t seed = 1;       // network initialisation
  std::uint64_t data_seed = 7;  // batch sampling
  int threads = 1;
  SplitMode split = SplitMode::standard;

  flow::FlowConfig flow;

  // Throws ConfigError naming the first violated constraint.
  void validate() const;
};

// Applies one key=value assignment.
void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const TrainConfig& cfg, std::string_view key);
std::vector<std::string> config_keys();

// Parses key=value text on top of `cfg` (missing keys keep their value).
void apply_config_text(TrainConfig& cfg, std::string_view text);
TrainConfig load_config(const std::string& path);
// All keys, one `key=value` per line, in config_keys() order.
std::string resolved_config_text(const TrainConfig& cfg);

}  // namespace gfe
