#include "harness.hpp"

#include "flow.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace gfe::harness {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Vector concat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

}  // namespace

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

Model Model::create(const TrainConfig& cfg) {
  cfg.validate();
  Model m;
  m.method = cfg.method;
  m.decoder = make_decoder(cfg.widths);
  init_params(m.decoder, cfg.seed);
  std::size_t n = m.decoder.param_count();
  if (cfg.method == Method::ae) {
    m.encoder = make_encoder(cfg.widths);
    init_params(*m.encoder, cfg.seed + 0x9e3779b97f4a7c15ULL);
    n += m.encoder->param_count();
  }
  m.opt = OptimizerState::create(cfg.optimizer, n);
  return m;
}

Model Model::from_checkpoint(Checkpoint ckpt) {
  Model m;
  m.method = ckpt.method;
  m.decoder = std::move(ckpt.decoder);
  m.encoder = std::move(ckpt.encoder);
  const std::size_t n = m.decoder.param_count() + (m.encoder ? m.encoder->param_count() : 0);
  if (ckpt.optimizer) {
    if (ckpt.optimizer->size() != n)
      throw ParseError("checkpoint optimizer state does not match the networks", 0);
    m.opt = std::move(*ckpt.optimizer);
  } else {
    m.opt = OptimizerState::create(OptimizerHyper{}, n);
  }
  return m;
}

Checkpoint Model::to_checkpoint() const { return {method, decoder, encoder, opt}; }

Encoding default_encoding(const Model& model) {
  return model.encoder ? Encoding::encoder : Encoding::gfe_amd;
}

namespace {

struct SampleOutcome {
  Vector grad;
  double loss = 0.0;
  bool skipped = false;
  ad::PassCounter passes;
};

SampleOutcome gfe_sample(const Sample& s, const Network& decoder, const TrainConfig& cfg) {
  SampleOutcome out;
  flow::LatentObjective obj(decoder, as_span(s.image), cfg.loss);
  try {
    Vector z_star;
    switch (cfg.method) {
      case Method::gfe_rk4_adjoint: {
        auto sol = flow::solve_fixed_rk4(obj, cfg.flow);
        out.grad = flow::adjoint_backward(obj, sol.trajectory, cfg.flow).param_grad;
        out.loss = sol.final_loss;
        z_star = std::move(sol.z_star);
        break;
      }
      case Method::gfe_rk4_approx:
      case Method::gfe_nesterov: {
        auto sol = cfg.method == Method::gfe_nesterov ? flow::solve_nesterov(obj, cfg.flow)
                                                      : flow::solve_fixed_rk4(obj, cfg.flow);
        out.loss = sol.final_loss;
        z_star = std::move(sol.z_star);
        break;
      }
      case Method::gfe_amd: {
        auto sol = flow::solve_amd(obj, cfg.flow);
        out.loss = sol.loss_curve.back();
        z_star = std::move(sol.z_star);
        break;
      }
      case Method::ae:
        throw UsageError("gfe_batch_gradient called for the AE method");
    }
    if (out.grad.size() == 0) out.grad = flow::approx_backward(obj, z_star);
    if (!std::isfinite(out.loss) || !out.grad.allFinite())
      throw DivergenceError("non-finite loss or gradient after the latent solve", -1);
  } catch (const DivergenceError& e) {
    out.skipped = true;
    out.grad.resize(0);
    std::cerr << "warning: sample skipped: " << e.what() << "\n";
  }
  out.passes = obj.counter();
  return out;
}

BatchGradient reduce(std::vector<SampleOutcome>& outcomes, std::size_t n_params) {
  BatchGradient bg;
  bg.grad = Vector::Zero(static_cast<Eigen::Index>(n_params));
  for (auto& o : outcomes) {
    bg.passes += o.passes;
    if (o.skipped) {
      ++bg.skipped;
      continue;
    }
    bg.grad += o.grad;
    bg.loss_sum += o.loss;
    ++bg.used;
  }
  return bg;
}

}  // namespace

BatchGradient gfe_batch_gradient(const Batch& batch, const Network& decoder, const TrainConfig& cfg) {
  if (!decoder.all_finite()) throw UsageError("decoder parameters are not finite");
  std::vector<SampleOutcome> outcomes(batch.size());
  parallel_for(batch.size(), cfg.threads,
               [&](std::size_t i) { outcomes[i] = gfe_sample(*batch[i], decoder, cfg); });
  return reduce(outcomes, decoder.param_count());
}

BatchGradient ae_batch_gradient(const Batch& batch, const Network& decoder, const Network& encoder,
                                const TrainConfig& cfg) {
  std::vector<SampleOutcome> outcomes(batch.size());
  parallel_for(batch.size(), cfg.threads, [&](std::size_t i) {
    auto& out = outcomes[i];
    const auto y = as_span(batch[i]->image);
    ad::ComputationRecord enc(encoder, &out.passes);
    enc.run(y);
    ad::ComputationRecord dec(decoder, &out.passes);
    out.loss = dec.run(as_span(enc.output()), y, cfg.loss);
    const Vector g_dec = ad::grad_wrt_params(dec);
    const Vector g_z = ad::grad_wrt_latent(dec);
    const Vector g_enc = ad::vjp(enc, g_z, false, true).params;
    out.grad = concat(g_dec, g_enc);
  });
  return reduce(outcomes, decoder.param_count() + encoder.param_count());
}

namespace {

StepMetrics finish_step(const BatchGradient& bg, Clock::time_point t0) {
  StepMetrics m;
  m.train_loss = bg.used ? bg.loss_sum / static_cast<double>(bg.used) : 0.0;
  m.skipped = bg.skipped;
  m.passes = bg.passes.weight_passes();
  m.wall_time_s = seconds_since(t0);
  return m;
}

}  // namespace

StepMetrics train_step_gfe(const Batch& batch, Model& model, const TrainConfig& cfg) {
  const auto t0 = Clock::now();
  if (model.encoder) throw UsageError("train_step_gfe: model carries an encoder");
  auto bg = gfe_batch_gradient(batch, model.decoder, cfg);
  if (bg.used > 0) apply_update(model.decoder.params(), bg.grad, model.opt);
  return finish_step(bg, t0);
}

StepMetrics train_step_ae(const Batch& batch, Model& model, const TrainConfig& cfg) {
  const auto t0 = Clock::now();
  if (!model.encoder) throw UsageError("train_step_ae: model has no encoder");
  auto bg = ae_batch_gradient(batch, model.decoder, *model.encoder, cfg);
  Vector theta = concat(model.decoder.params(), model.encoder->params());
  apply_update(theta, bg.grad, model.opt);
  const auto nd = static_cast<Eigen::Index>(model.decoder.param_count());
  model.decoder.params() = theta.head(nd);
  model.encoder->params() = theta.tail(theta.size() - nd);
  return finish_step(bg, t0);
}

StepMetrics train_step(const Batch& batch, Model& model, const TrainConfig& cfg) {
  return cfg.method == Method::ae ? train_step_ae(batch, model, cfg)
                                  : train_step_gfe(batch, model, cfg);
}

Encoded encode_sample(const Model& model, const Sample& s, const TrainConfig& cfg, Encoding enc) {
  Encoded out;
  if (enc == Encoding::encoder) {
    if (!model.encoder) throw UsageError("encoder evaluation requested for a decoder-only model");
    ad::ComputationRecord rec(*model.encoder, &out.passes);
    rec.run(as_span(s.image));
    out.z = rec.output();
    return out;
  }
  flow::LatentObjective obj(model.decoder, as_span(s.image), cfg.loss);
  out.z = flow::solve_amd(obj, cfg.flow).z_star;
  out.passes = obj.counter();
  return out;
}

double evaluate(const data::Dataset& ds, const Model& model, const TrainConfig& cfg, Encoding enc,
                std::size_t limit) {
  const std::size_t n = limit == 0 ? ds.size() : std::min(limit, ds.size());
  if (n == 0) throw UsageError("evaluate: empty dataset");
  std::vector<double> losses(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    const auto& s = ds.samples[i];
    const Vector z = encode_sample(model, s, cfg, enc).z;
    losses[i] = bce_loss(as_span(s.image), as_span(decode(model.decoder, as_span(z))));
  });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(n);
}

void write_metrics(const std::vector<MetricsRow>& rows, const std::string& path) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open metrics file '" + path + "'");
  if (fresh) out << kMetricsHeader << '\n';
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%llu,%.6f,%.17g,%.17g,%llu,%llu,%s,%llu\n",
                  static_cast<unsigned long long>(r.images_seen), r.wall_time_s, r.train_loss,
                  r.val_loss, static_cast<unsigned long long>(r.model_calls),
                  static_cast<unsigned long long>(r.skipped), r.method.c_str(),
                  static_cast<unsigned long long>(r.seed));
    out << buf;
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw ParseError("metrics file '" + path + "' has an unexpected header", 0);
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[8];
    for (auto& field : f)
      if (!std::getline(ss, field, ',')) throw ParseError("metrics row has too few fields", 0);
    MetricsRow r;
    r.images_seen = std::stoull(f[0]);
    r.wall_time_s = std::stod(f[1]);
    r.train_loss = std::stod(f[2]);
    r.val_loss = std::stod(f[3]);
    r.model_calls = std::stoull(f[4]);
    r.skipped = std::stoull(f[5]);
    r.method = f[6];
    r.seed = std::stoull(f[7]);
    rows.push_back(std::move(r));
  }
  return rows;
}

RunSummary train(Model& model, const data::Dataset& train_set, const data::Dataset& val,
                 const TrainConfig& cfg, const std::string& metrics_path,
                 const ProgressFn& progress) {
  cfg.validate();
  if (train_set.empty()) throw UsageError("train: empty training set");
  if (val.empty()) throw UsageError("train: empty validation set");
  if ((cfg.method == Method::ae) != model.encoder.has_value())
    throw UsageError("train: model does not match method " + std::string(to_string(cfg.method)));
  if (widths_of(model.decoder) != cfg.widths) throw UsageError("train: decoder widths differ from the config");

  const Encoding enc = default_encoding(model);
  data::BatchStream stream(train_set.size(), static_cast<std::size_t>(cfg.batch_size),
                           cfg.data_seed, cfg.with_replacement);
  RunSummary sum;
  double wall = 0.0;
  std::uint64_t passes = 0;
  double loss_acc = 0.0;
  std::size_t loss_steps = 0;
  int step = 0;

  auto emit = [&](std::size_t eval_limit) {
    MetricsRow r;
    r.images_seen = sum.images_seen;
    r.train_loss = loss_steps ? loss_acc / static_cast<double>(loss_steps) : 0.0;
    r.val_loss = evaluate(val, model, cfg, enc, eval_limit);
    r.model_calls = passes;
    r.skipped = sum.skipped;
    r.method = std::string(to_string(cfg.method));
    r.seed = cfg.seed;
    r.wall_time_s = wall;
    loss_acc = 0.0;
    loss_steps = 0;
    sum.rows.push_back(r);
    if (!metrics_path.empty()) write_metrics({r}, metrics_path);
    if (progress) progress(r);
  };

  while (sum.images_seen < cfg.images) {
    auto idx = stream.next();
    // The last batch is cut so the run ends exactly on the image budget.
    const auto left = cfg.images - sum.images_seen;
    if (idx.size() > left) idx.resize(static_cast<std::size_t>(left));
    Batch batch;
    batch.reserve(idx.size());
    for (auto i : idx) batch.push_back(&train_set.samples[i]);
    const auto m = train_step(batch, model, cfg);
    sum.images_seen += batch.size();
    sum.skipped += m.skipped;
    passes += m.passes;
    wall += m.wall_time_s;
    loss_acc += m.train_loss;
    ++loss_steps;
    ++step;
    if (cfg.eval_every > 0 && step % cfg.eval_every == 0 && sum.images_seen < cfg.images)
      emit(cfg.eval_samples);
  }
  emit(cfg.test_samples);
  sum.final_val_loss = sum.rows.back().val_loss;
  sum.wall_time_s = wall;
  return sum;
}

void write_pgm(const std::string& path, std::uint32_t rows, std::uint32_t cols,
               std::span<const double> intensities) {
  if (std::size_t{rows} * cols != intensities.size())
    throw UsageError("write_pgm: " + std::to_string(intensities.size()) +
                     " intensities do not fill " + std::to_string(rows) + "x" + std::to_string(cols));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "P5\n" << cols << ' ' << rows << "\n255\n";
  for (double v : intensities)
    out.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  if (!out) throw IoError("write failed for '" + path + "'");
}

PgmImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string magic;
  unsigned maxval = 0;
  PgmImage img;
  in >> magic >> img.cols >> img.rows >> maxval;
  if (magic != "P5" || maxval != 255 || !in) throw ParseError("not an 8-bit binary PGM: " + path, 0);
  in.get();
  img.pixels.resize(std::size_t{img.rows} * img.cols);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw ParseError("PGM payload truncated: " + path, static_cast<std::size_t>(in.gcount()));
  return img;
}

std::vector<std::string> dump_reconstructions(const data::Dataset& ds, const Model& model,
                                              const TrainConfig& cfg, Encoding enc,
                                              const std::string& dir, std::size_t limit) {
  std::filesystem::create_directories(dir);
  const std::size_t n = limit == 0 ? ds.size() : std::min(limit, ds.size());
  std::vector<std::string> paths(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    const auto& s = ds.samples[i];
    const Vector z = encode_sample(model, s, cfg, enc).z;
    const Vector yhat = decode(model.decoder, as_span(z));
    char name[64];
    std::snprintf(name, sizeof name, "/recon_%04zu.pgm", i);
    paths[i] = dir + name;
    write_pgm(paths[i], ds.rows, ds.cols, as_span(yhat));
    std::snprintf(name, sizeof name, "/orig_%04zu.pgm", i);
    write_pgm(dir + name, ds.rows, ds.cols, as_span(s.image));
  });
  return paths;
}

void dump_latents(const data::Dataset& ds, const Model& model, const TrainConfig& cfg,
                  Encoding enc, const std::string& path, std::size_t limit) {
  const std::size_t n = limit == 0 ? ds.size() : std::min(limit, ds.size());
  std::vector<Vector> latents(n);
  parallel_for(n, cfg.threads,
               [&](std::size_t i) { latents[i] = encode_sample(model, ds.samples[i], cfg, enc).z; });
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  char buf[40];
  for (std::size_t i = 0; i < n; ++i) {
    out << ds.samples[i].label;
    for (Eigen::Index j = 0; j < latents[i].size(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", latents[i][j]);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace gfe::harness
