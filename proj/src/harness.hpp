#pragma once

// Training and evaluation loops for the GFE variants and the AE baseline,
// plus the artifact writers (metrics table, PGM reconstructions, latents).

#include "autodiff.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "data.hpp"
#include "model.hpp"
#include "optim.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace gfe::harness {

struct Model {
  Method method = Method::gfe_amd;
  Network decoder;
  std::optional<Network> encoder;  // AE only
  OptimizerState opt;              // over decoder params, then encoder params

  // Seeded initialisation from cfg (widths, seed, optimizer, method).
  static Model create(const TrainConfig& cfg);
  static Model from_checkpoint(Checkpoint ckpt);
  Checkpoint to_checkpoint() const;
};

// How a sample is mapped to its latent at evaluation time.
enum class Encoding : std::uint8_t { gfe_amd, encoder };
Encoding default_encoding(const Model& model);

struct BatchGradient {
  Vector grad;  // summed over the samples that did not diverge
  double loss_sum = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;
  ad::PassCounter passes;
};

using Batch = std::vector<const Sample*>;

// Per-sample latent solve with the configured GFE solver followed by the
// matching backward pass; per-sample gradients are summed in batch order.
BatchGradient gfe_batch_gradient(const Batch& batch, const Network& decoder, const TrainConfig& cfg);
// Encoder -> decoder reconstruction gradient over [decoder; encoder] params.
BatchGradient ae_batch_gradient(const Batch& batch, const Network& decoder, const Network& encoder,
                                const TrainConfig& cfg);

struct StepMetrics {
  double train_loss = 0.0;  // mean over used samples
  std::size_t skipped = 0;
  std::uint64_t passes = 0;
  double wall_time_s = 0.0;
};

StepMetrics train_step_gfe(const Batch& batch, Model& model, const TrainConfig& cfg);
StepMetrics train_step_ae(const Batch& batch, Model& model, const TrainConfig& cfg);
StepMetrics train_step(const Batch& batch, Model& model, const TrainConfig& cfg);

struct Encoded {
  Vector z;
  ad::PassCounter passes;
};
Encoded encode_sample(const Model& model, const Sample& s, const TrainConfig& cfg, Encoding enc);

// Mean over samples of the per-pixel cross-entropy between each image and its
// reconstruction D(encode(y)). `limit` = 0 evaluates every sample.
double evaluate(const data::Dataset& ds, const Model& model, const TrainConfig& cfg, Encoding enc,
                std::size_t limit = 0);

struct MetricsRow {
  std::uint64_t images_seen = 0;
  double wall_time_s = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::uint64_t model_calls = 0;  // cumulative decoder weight passes
  std::uint64_t skipped = 0;      // cumulative diverged samples
  std::string method;
  std::uint64_t seed = 0;
};

inline constexpr const char* kMetricsHeader =
    "images_seen,wall_time_s,train_loss,val_loss,model_calls,skipped,method,seed";

// Appends rows; writes the header first when the file is new or empty.
void write_metrics(const std::vector<MetricsRow>& rows, const std::string& path);
std::vector<MetricsRow> read_metrics(const std::string& path);

struct RunSummary {
  std::vector<MetricsRow> rows;
  double final_val_loss = 0.0;
  std::uint64_t images_seen = 0;
  double wall_time_s = 0.0;
  std::uint64_t skipped = 0;
};

using ProgressFn = std::function<void(const MetricsRow&)>;

// Trains on exactly cfg.images images (the last batch is cut short if
// needed). Emits a metrics row every cfg.eval_every steps (validated on
// cfg.eval_samples samples) and a final row validated on cfg.test_samples
// samples (0 = all of `val`).
RunSummary train(Model& model, const data::Dataset& train_set, const data::Dataset& val,
                 const TrainConfig& cfg, const std::string& metrics_path = {},
                 const ProgressFn& progress = {});

struct PgmImage {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;
};
void write_pgm(const std::string& path, std::uint32_t rows, std::uint32_t cols,
               std::span<const double> intensities);
PgmImage read_pgm(const std::string& path);

// Writes recon_NNNN.pgm (and orig_NNNN.pgm) per sample into `dir`; returns the
// reconstruction paths.
std::vector<std::string> dump_reconstructions(const data::Dataset& ds, const Model& model,
                                              const TrainConfig& cfg, Encoding enc,
                                              const std::string& dir, std::size_t limit = 0);

// One line per sample: label, then the latent coordinates, comma separated,
// 17 significant digits.
void dump_latents(const data::Dataset& ds, const Model& model, const TrainConfig& cfg,
                  Encoding enc, const std::string& path, std::size_t limit = 0);

// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace gfe::harness
