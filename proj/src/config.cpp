#include "config.hpp"

#include "data.hpp"

#include <charconv>
#include <functional>
#include <sstream>

namespace gfe {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::ae: return "ae";
    case Method::gfe_rk4_adjoint: return "gfe_rk4_adjoint";
    case Method::gfe_rk4_approx: return "gfe_rk4_approx";
    case Method::gfe_nesterov: return "gfe_nesterov";
    case Method::gfe_amd: return "gfe_amd";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (auto m : {Method::ae, Method::gfe_rk4_adjoint, Method::gfe_rk4_approx, Method::gfe_nesterov,
                 Method::gfe_amd})
    if (name == to_string(m)) return m;
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (expected ae, gfe_rk4_adjoint, gfe_rk4_approx, gfe_nesterov or gfe_amd)");
}

bool is_gfe(Method m) { return m != Method::ae; }

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (images < 1) fail("images must be >= 1");
  if (eval_every < 0) fail("eval_every must be >= 0");
  if (threads < 1) fail("threads must be >= 1");
  if (!(optimizer.lr > 0.0)) fail("lr must be > 0");
  if (!(optimizer.rms_alpha >= 0.0 && optimizer.rms_alpha < 1.0)) fail("rmsprop.alpha must lie in [0, 1)");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) fail("adam.beta1 must lie in [0, 1)");
  if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) fail("adam.beta2 must lie in [0, 1)");
  if (!(optimizer.rms_eps > 0.0) || !(optimizer.adam_eps > 0.0)) fail("optimizer eps must be > 0");
  if (widths.size() < 2) fail("widths needs at least two entries");
  for (int w : widths)
    if (w < 1) fail("widths must be positive");
  flow.validate();
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end)
    throw ConfigError("key '" + std::string(key) + "': '" + std::string(v) + "' is not a number");
  return out;
}

template <class Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end)
    throw ConfigError("key '" + std::string(key) + "': '" + std::string(v) +
                      "' is not a valid integer");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + std::string(key) + "': expected true or false, got '" +
                    std::string(v) + "'");
}

std::string fmt_double(double d) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, p);
}

template <class Int>
std::string fmt_int(Int i) {
  return std::to_string(i);
}

struct Key {
  const char* name;
  std::function<void(TrainConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define GFE_DOUBLE_KEY(NAME, FIELD)                                                      \
  Key {                                                                                  \
    NAME, [](TrainConfig& c, std::string_view v) { c.FIELD = parse_double(NAME, v); }, \
        [](const TrainConfig& c) { return fmt_double(c.FIELD); }                         \
  }
#define GFE_INT_KEY(NAME, FIELD)                                                          \
  Key {                                                                                   \
    NAME,                                                                                 \
        [](TrainConfig& c, std::string_view v) {                                          \
          c.FIELD = parse_int<decltype(c.FIELD)>(NAME, v);                                \
        },                                                                                \
        [](const TrainConfig& c) { return fmt_int(c.FIELD); }                             \
  }

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = {
      {"method", [](TrainConfig& c, std::string_view v) { c.method = parse_method(v); },
       [](const TrainConfig& c) { return std::string(to_string(c.method)); }},
      {"optimizer",
       [](TrainConfig& c, std::string_view v) { c.optimizer.kind = parse_optimizer_kind(v); },
       [](const TrainConfig& c) { return std::string(to_string(c.optimizer.kind)); }},
      GFE_DOUBLE_KEY("lr", optimizer.lr),
      GFE_DOUBLE_KEY("rmsprop.alpha", optimizer.rms_alpha),
      GFE_DOUBLE_KEY("rmsprop.eps", optimizer.rms_eps),
      GFE_DOUBLE_KEY("adam.beta1", optimizer.beta1),
      GFE_DOUBLE_KEY("adam.beta2", optimizer.beta2),
      GFE_DOUBLE_KEY("adam.eps", optimizer.adam_eps),
      {"loss", [](TrainConfig& c, std::string_view v) { c.loss = parse_loss_kind(v); },
       [](const TrainConfig& c) { return std::string(to_string(c.loss)); }},
      {"widths",
       [](TrainConfig& c, std::string_view v) {
         std::vector<int> w;
         std::string s(v);
         std::stringstream ss(s);
         for (std::string item; std::getline(ss, item, ',');) w.push_back(parse_int<int>("widths", trim(item)));
         c.widths = std::move(w);
       },
       [](const TrainConfig& c) {
         std::string out;
         for (std::size_t i = 0; i < c.widths.size(); ++i)
           out += (i ? "," : "") + std::to_string(c.widths[i]);
         return out;
       }},
      GFE_INT_KEY("batch_size", batch_size),
      GFE_INT_KEY("images", images),
      {"with_replacement",
       [](TrainConfig& c, std::string_view v) { c.with_replacement = parse_bool("with_replacement", v); },
       [](const TrainConfig& c) { return std::string(c.with_replacement ? "true" : "false"); }},
      GFE_INT_KEY("eval_every", eval_every),
      GFE_INT_KEY("eval_samples", eval_samples),
      GFE_INT_KEY("test_samples", test_samples),
      GFE_INT_KEY("seed", seed),
      GFE_INT_KEY("data_seed", data_seed),
      GFE_INT_KEY("threads", threads),
      {"split",
       [](TrainConfig& c, std::string_view v) {
         if (v == "standard") c.split = SplitMode::standard;
         else if (v == "segmented") c.split = SplitMode::segmented;
         else throw ConfigError("key 'split': expected standard or segmented, got '" + std::string(v) + "'");
       },
       [](const TrainConfig& c) {
         return std::string(c.split == SplitMode::standard ? "standard" : "segmented");
       }},
      GFE_DOUBLE_KEY("flow.tau", flow.tau),
      GFE_INT_KEY("flow.n_slices", flow.n_slices),
      {"flow.alpha_mode",
       [](TrainConfig& c, std::string_view v) { c.flow.alpha_mode = flow::parse_alpha_mode(v); },
       [](const TrainConfig& c) { return std::string(flow::to_string(c.flow.alpha_mode)); }},
      GFE_DOUBLE_KEY("flow.grid_ratio", flow.grid_ratio),
      GFE_DOUBLE_KEY("flow.eps", flow.eps),
      GFE_DOUBLE_KEY("flow.beta", flow.beta),
      GFE_DOUBLE_KEY("flow.s0", flow.s0),
      GFE_DOUBLE_KEY("flow.s_max", flow.s_max),
      GFE_DOUBLE_KEY("flow.kappa", flow.kappa),
      GFE_DOUBLE_KEY("flow.conv_threshold", flow.conv_threshold),
      GFE_INT_KEY("flow.conv_window", flow.conv_window),
      GFE_INT_KEY("flow.max_steps", flow.max_steps),
      GFE_INT_KEY("flow.max_backtracks", flow.max_backtracks),
      GFE_DOUBLE_KEY("flow.amd_tau", flow.amd_tau),
  };
  return keys;
}

#undef GFE_DOUBLE_KEY
#undef GFE_INT_KEY

// Flow keys may also be given without their "flow." prefix.
const Key& find_key(std::string_view name) {
  for (const auto& k : registry())
    if (name == k.name) return k;
  const std::string dotted = "flow." + std::string(name);
  for (const auto& k : registry())
    if (dotted == k.name) return k;
  throw ConfigError("unknown config key '" + std::string(name) + "'");
}

}  // namespace

void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value) {
  find_key(key).set(cfg, trim(value));
}

std::string get_config_value(const TrainConfig& cfg, std::string_view key) {
  return find_key(key).get(cfg);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.emplace_back(k.name);
  return out;
}

void apply_config_text(TrainConfig& cfg, std::string_view text) {
  std::istringstream in{std::string(text)};
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    try {
      set_config_value(cfg, trim(std::string_view(t).substr(0, eq)),
                       std::string_view(t).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

TrainConfig load_config(const std::string& path) {
  const auto bytes = data::read_file(path);
  TrainConfig cfg;
  apply_config_text(cfg, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  cfg.validate();
  return cfg;
}

std::string resolved_config_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& k : registry()) out += std::string(k.name) + "=" + k.get(cfg) + "\n";
  return out;
}

}  // namespace gfe
