#include "cli_args.hpp"

#include <gfe/gfe.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>

namespace {

namespace fs = std::filesystem;
using gfe::cli::Command;
using gfe::cli::RunSpec;

struct Failure {
  gfe_status status;
  std::string msg;
};

void check(gfe_status s) {
  if (s != GFE_OK) throw Failure{s, gfe_last_error()};
}

struct ConfigDel {
  void operator()(gfe_config* c) const { gfe_config_destroy(c); }
};
struct DatasetDel {
  void operator()(gfe_dataset* d) const { gfe_dataset_destroy(d); }
};
struct ModelDel {
  void operator()(gfe_model* m) const { gfe_model_destroy(m); }
};
using ConfigPtr = std::unique_ptr<gfe_config, ConfigDel>;
using DatasetPtr = std::unique_ptr<gfe_dataset, DatasetDel>;
using ModelPtr = std::unique_ptr<gfe_model, ModelDel>;

std::string config_get(const gfe_config* cfg, const char* key) {
  size_t need = 0;
  check(gfe_config_get(cfg, key, nullptr, 0, &need));
  std::string out(need, '\0');
  check(gfe_config_get(cfg, key, out.data(), out.size(), &need));
  out.resize(need - 1);
  return out;
}

ConfigPtr build_config(const RunSpec& spec) {
  gfe_config* raw = nullptr;
  if (spec.config_path.empty()) check(gfe_config_create(&raw));
  else check(gfe_config_load(spec.config_path.c_str(), &raw));
  ConfigPtr cfg(raw);
  for (const auto& [k, v] : spec.overrides) check(gfe_config_set(cfg.get(), k.c_str(), v.c_str()));
  check(gfe_config_validate(cfg.get()));
  return cfg;
}

DatasetPtr load(const RunSpec& spec, gfe_split split) {
  gfe_dataset* raw = nullptr;
  check(gfe_dataset_load_dir(spec.data_dir.c_str(), split, &raw));
  return DatasetPtr(raw);
}

// Standard split: the whole split. Segmented: labels 0-4 for training and
// 5-9 for testing.
DatasetPtr select(DatasetPtr ds, bool segmented, bool training) {
  if (!segmented) return ds;
  gfe_dataset *low = nullptr, *high = nullptr;
  check(gfe_dataset_split_segmented(ds.get(), &low, &high));
  DatasetPtr a(low), b(high);
  return training ? std::move(a) : std::move(b);
}

gfe_encoding encoding_of(const std::string& name) {
  if (name == "amd") return GFE_ENCODE_AMD;
  if (name == "encoder") return GFE_ENCODE_ENCODER;
  return GFE_ENCODE_DEFAULT;
}

std::string path_in(const RunSpec& spec, const char* name) {
  return (fs::path(spec.out_dir) / name).string();
}

void report(const char* name, int passed, const char* detail, void*) {
  std::printf("%s %s: %s\n", passed ? "PASS" : "FAIL", name, detail);
}

int run(const RunSpec& spec) {
  if (spec.command == Command::fixture_check) {
    int failures = 0;
    check(gfe_fixture_check(spec.check_seed, report, nullptr, &failures));
    std::printf("fixture-check: %d failing\n", failures);
    return failures == 0 ? 0 : 1;
  }

  ConfigPtr cfg = build_config(spec);
  const bool segmented = config_get(cfg.get(), "split") == "segmented";
  fs::create_directories(spec.out_dir);
  check(gfe_config_write_resolved(cfg.get(), path_in(spec, "resolved-config.txt").c_str()));

  if (spec.command == Command::train) {
    DatasetPtr train = select(load(spec, GFE_SPLIT_TRAIN), segmented, true);
    DatasetPtr test = select(load(spec, GFE_SPLIT_TEST), segmented, false);
    gfe_model* raw = nullptr;
    check(gfe_model_create(cfg.get(), &raw));
    ModelPtr model(raw);
    const std::string metrics = path_in(spec, "metrics.csv");
    fs::remove(metrics);
    gfe_run_summary s{};
    check(gfe_train(model.get(), train.get(), test.get(), cfg.get(), metrics.c_str(), &s));
    check(gfe_model_save(model.get(), path_in(spec, "checkpoint.bin").c_str()));
    std::printf("train %s: final_val_loss=%.6f images_seen=%llu wall_time_s=%.1f skipped=%llu\n",
                config_get(cfg.get(), "method").c_str(), s.final_val_loss,
                static_cast<unsigned long long>(s.images_seen), s.wall_time_s,
                static_cast<unsigned long long>(s.skipped));
    return 0;
  }

  gfe_model* raw = nullptr;
  check(gfe_model_load(spec.checkpoint.c_str(), &raw));
  ModelPtr model(raw);
  DatasetPtr test = select(load(spec, GFE_SPLIT_TEST), segmented, false);
  const gfe_encoding enc = encoding_of(spec.encoding);

  switch (spec.command) {
    case Command::eval: {
      size_t limit = spec.limit;
      if (limit == 0) limit = std::stoull(config_get(cfg.get(), "test_samples"));
      double loss = 0.0;
      check(gfe_evaluate(model.get(), test.get(), cfg.get(), enc, limit, &loss));
      const std::string out = path_in(spec, "eval.txt");
      if (FILE* f = std::fopen(out.c_str(), "w")) {
        std::fprintf(f, "encoding=%s\nsamples=%zu\nval_loss=%.17g\n", spec.encoding.c_str(),
                     limit == 0 ? gfe_dataset_size(test.get()) : limit, loss);
        std::fclose(f);
      } else {
        throw Failure{GFE_ERR_IO, "cannot write '" + out + "'"};
      }
      std::printf("eval (%s): val_loss=%.6f\n", spec.encoding.c_str(), loss);
      return 0;
    }
    case Command::reconstruct: {
      const size_t limit = spec.limit == 0 ? 16 : spec.limit;
      const std::string dir = path_in(spec, "reconstructions");
      check(gfe_dump_reconstructions(model.get(), test.get(), cfg.get(), enc, dir.c_str(), limit));
      std::printf("reconstruct: %zu samples written to %s\n", limit, dir.c_str());
      return 0;
    }
    case Command::latents: {
      const std::string out = path_in(spec, "latents.csv");
      check(gfe_dump_latents(model.get(), test.get(), cfg.get(), enc, out.c_str(), spec.limit));
      std::printf("latents: written to %s\n", out.c_str());
      return 0;
    }
    default:
      return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  RunSpec spec;
  try {
    spec = gfe::cli::parse_args(argc, argv, std::getenv("GFE_DATA_DIR"));
    gfe::cli::validate_paths(spec);
  } catch (const gfe::cli::UsageError& e) {
    (e.status() == 0 ? std::cout : std::cerr) << e.what() << "\n";
    return e.status();
  }
  try {
    return run(spec);
  } catch (const Failure& f) {
    std::cerr << "error (" << gfe_status_name(f.status) << "): " << f.msg << "\n";
    return f.status == GFE_ERR_CONFIG || f.status == GFE_ERR_USAGE ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
