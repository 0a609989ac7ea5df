#include "gfe/gfe.h"

#include "checkpoint.hpp"
#include "config.hpp"
#include "data.hpp"
#include "harness.hpp"
#include "selfcheck.hpp"

#include <cstring>
#include <fstream>
#include <new>
#include <string>

struct gfe_config {
  gfe::TrainConfig cfg;
};

struct gfe_dataset {
  gfe::data::Dataset ds;
};

struct gfe_model {
  gfe::harness::Model model;
};

namespace {

thread_local std::string g_last_error;

gfe_status fail(gfe_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class F>
gfe_status guarded(F&& f) {
  try {
    f();
    return GFE_OK;
  } catch (const gfe::UsageError& e) {
    return fail(GFE_ERR_USAGE, e.what());
  } catch (const gfe::ConfigError& e) {
    return fail(GFE_ERR_CONFIG, e.what());
  } catch (const gfe::ParseError& e) {
    return fail(GFE_ERR_PARSE, e.what());
  } catch (const gfe::IoError& e) {
    return fail(GFE_ERR_IO, e.what());
  } catch (const gfe::DivergenceError& e) {
    return fail(GFE_ERR_DIVERGED, e.what());
  } catch (const std::bad_alloc&) {
    return fail(GFE_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(GFE_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(GFE_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw gfe::UsageError(what);
}

gfe_status copy_out(const std::string& s, char* buf, size_t cap, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (cap == 0) return GFE_OK;
  if (!buf) return fail(GFE_ERR_USAGE, "buffer is NULL but capacity is nonzero");
  if (cap < s.size() + 1) return fail(GFE_ERR_USAGE, "buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return GFE_OK;
}

gfe::harness::Encoding resolve(gfe_encoding enc, const gfe::harness::Model& m) {
  switch (enc) {
    case GFE_ENCODE_DEFAULT: return gfe::harness::default_encoding(m);
    case GFE_ENCODE_AMD: return gfe::harness::Encoding::gfe_amd;
    case GFE_ENCODE_ENCODER: return gfe::harness::Encoding::encoder;
  }
  throw gfe::UsageError("unknown encoding " + std::to_string(static_cast<int>(enc)));
}

gfe::data::Split to_split(gfe_split s) {
  if (s == GFE_SPLIT_TRAIN) return gfe::data::Split::train;
  if (s == GFE_SPLIT_TEST) return gfe::data::Split::test;
  throw gfe::UsageError("unknown split " + std::to_string(static_cast<int>(s)));
}

}  // namespace

extern "C" {

const char* gfe_last_error(void) { return g_last_error.c_str(); }

const char* gfe_status_name(gfe_status status) {
  switch (status) {
    case GFE_OK: return "ok";
    case GFE_ERR_USAGE: return "usage error";
    case GFE_ERR_CONFIG: return "config error";
    case GFE_ERR_PARSE: return "parse error";
    case GFE_ERR_IO: return "i/o error";
    case GFE_ERR_DIVERGED: return "diverged";
    case GFE_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

gfe_status gfe_config_create(gfe_config** out) {
  return guarded([&] {
    require(out, "gfe_config_create: out is NULL");
    *out = new gfe_config{};
  });
}

gfe_status gfe_config_load(const char* path, gfe_config** out) {
  return guarded([&] {
    require(path && out, "gfe_config_load: NULL argument");
    *out = new gfe_config{gfe::load_config(path)};
  });
}

gfe_status gfe_config_apply_text(gfe_config* cfg, const char* text) {
  return guarded([&] {
    require(cfg && text, "gfe_config_apply_text: NULL argument");
    gfe::TrainConfig copy = cfg->cfg;
    gfe::apply_config_text(copy, text);
    cfg->cfg = std::move(copy);
  });
}

gfe_status gfe_config_set(gfe_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg && key && value, "gfe_config_set: NULL argument");
    gfe::set_config_value(cfg->cfg, key, value);
  });
}

gfe_status gfe_config_get(const gfe_config* cfg, const char* key, char* buf, size_t cap,
                          size_t* needed) {
  std::string value;
  const gfe_status s = guarded([&] {
    require(cfg && key, "gfe_config_get: NULL argument");
    value = gfe::get_config_value(cfg->cfg, key);
  });
  return s == GFE_OK ? copy_out(value, buf, cap, needed) : s;
}

gfe_status gfe_config_validate(const gfe_config* cfg) {
  return guarded([&] {
    require(cfg, "gfe_config_validate: cfg is NULL");
    cfg->cfg.validate();
  });
}

gfe_status gfe_config_write_resolved(const gfe_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg && path, "gfe_config_write_resolved: NULL argument");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw gfe::IoError(std::string("cannot write '") + path + "'");
    out << gfe::resolved_config_text(cfg->cfg);
    if (!out) throw gfe::IoError(std::string("write failed for '") + path + "'");
  });
}

void gfe_config_destroy(gfe_config* cfg) { delete cfg; }

gfe_status gfe_dataset_load_dir(const char* dir, gfe_split split, gfe_dataset** out) {
  return guarded([&] {
    require(dir && out, "gfe_dataset_load_dir: NULL argument");
    *out = new gfe_dataset{gfe::data::load_mnist_dir(dir, to_split(split))};
  });
}

gfe_status gfe_dataset_load_idx(const char* images_path, const char* labels_path, gfe_split split,
                                gfe_dataset** out) {
  return guarded([&] {
    require(images_path && labels_path && out, "gfe_dataset_load_idx: NULL argument");
    *out = new gfe_dataset{gfe::data::load_idx_dataset(images_path, labels_path, to_split(split))};
  });
}

gfe_status gfe_dataset_split_segmented(const gfe_dataset* ds, gfe_dataset** low,
                                       gfe_dataset** high) {
  return guarded([&] {
    require(ds && low && high, "gfe_dataset_split_segmented: NULL argument");
    auto parts = gfe::data::split_segmented(ds->ds);
    auto* a = new gfe_dataset{std::move(parts.train)};
    auto* b = new (std::nothrow) gfe_dataset{std::move(parts.test)};
    if (!b) {
      delete a;
      throw std::bad_alloc();
    }
    *low = a;
    *high = b;
  });
}

gfe_status gfe_dataset_head(const gfe_dataset* ds, size_t n, gfe_dataset** out) {
  return guarded([&] {
    require(ds && out, "gfe_dataset_head: NULL argument");
    *out = new gfe_dataset{gfe::data::head(ds->ds, n)};
  });
}

size_t gfe_dataset_size(const gfe_dataset* ds) { return ds ? ds->ds.size() : 0; }

void gfe_dataset_destroy(gfe_dataset* ds) { delete ds; }

gfe_status gfe_model_create(const gfe_config* cfg, gfe_model** out) {
  return guarded([&] {
    require(cfg && out, "gfe_model_create: NULL argument");
    *out = new gfe_model{gfe::harness::Model::create(cfg->cfg)};
  });
}

gfe_status gfe_model_load(const char* path, gfe_model** out) {
  return guarded([&] {
    require(path && out, "gfe_model_load: NULL argument");
    *out = new gfe_model{gfe::harness::Model::from_checkpoint(gfe::load_checkpoint(path))};
  });
}

gfe_status gfe_model_save(const gfe_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "gfe_model_save: NULL argument");
    gfe::save_checkpoint(model->model.to_checkpoint(), path);
  });
}

gfe_status gfe_model_method(const gfe_model* model, char* buf, size_t cap, size_t* needed) {
  if (!model) return fail(GFE_ERR_USAGE, "gfe_model_method: model is NULL");
  return copy_out(std::string(gfe::to_string(model->model.method)), buf, cap, needed);
}

size_t gfe_model_param_count(const gfe_model* model) {
  if (!model) return 0;
  const auto& m = model->model;
  return m.decoder.param_count() + (m.encoder ? m.encoder->param_count() : 0);
}

void gfe_model_destroy(gfe_model* model) { delete model; }

gfe_status gfe_train(gfe_model* model, const gfe_dataset* train, const gfe_dataset* val,
                     const gfe_config* cfg, const char* metrics_path, gfe_run_summary* summary) {
  return guarded([&] {
    require(model && train && val && cfg, "gfe_train: NULL argument");
    require(model->model.method == cfg->cfg.method, "gfe_train: model was created for another method");
    const auto s = gfe::harness::train(model->model, train->ds, val->ds, cfg->cfg,
                                       metrics_path ? metrics_path : "");
    if (summary) *summary = {s.final_val_loss, s.images_seen, s.wall_time_s, s.skipped};
  });
}

gfe_status gfe_evaluate(const gfe_model* model, const gfe_dataset* ds, const gfe_config* cfg,
                        gfe_encoding enc, size_t limit, double* mean_loss) {
  return guarded([&] {
    require(model && ds && cfg && mean_loss, "gfe_evaluate: NULL argument");
    *mean_loss = gfe::harness::evaluate(ds->ds, model->model, cfg->cfg, resolve(enc, model->model), limit);
  });
}

gfe_status gfe_dump_reconstructions(const gfe_model* model, const gfe_dataset* ds,
                                    const gfe_config* cfg, gfe_encoding enc, const char* dir,
                                    size_t limit) {
  return guarded([&] {
    require(model && ds && cfg && dir, "gfe_dump_reconstructions: NULL argument");
    gfe::harness::dump_reconstructions(ds->ds, model->model, cfg->cfg, resolve(enc, model->model),
                                       dir, limit);
  });
}

gfe_status gfe_dump_latents(const gfe_model* model, const gfe_dataset* ds, const gfe_config* cfg,
                            gfe_encoding enc, const char* path, size_t limit) {
  return guarded([&] {
    require(model && ds && cfg && path, "gfe_dump_latents: NULL argument");
    gfe::harness::dump_latents(ds->ds, model->model, cfg->cfg, resolve(enc, model->model), path,
                               limit);
  });
}

gfe_status gfe_fixture_check(uint64_t seed, gfe_report_fn report, void* user, int* failures) {
  return guarded([&] {
    int failed = 0;
    for (const auto& r : gfe::run_self_checks(seed)) {
      if (!r.passed) ++failed;
      if (report) report(r.name.c_str(), r.passed ? 1 : 0, r.detail.c_str(), user);
    }
    if (failures) *failures = failed;
  });
}

}  // extern "C"
