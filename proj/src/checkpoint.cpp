#include "checkpoint.hpp"

#include "data.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace gfe {

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double d) { u64(std::bit_cast<std::uint64_t>(d)); }
  void vec(const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw ParseError("checkpoint truncated", pos_);
  }
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b_[pos_++]} << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  Vector vec(std::uint64_t n) {
    if (n > (b_.size() - pos_) / 8) throw ParseError("checkpoint array exceeds file size", pos_);
    Vector v(static_cast<Eigen::Index>(n));
    for (std::uint64_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = f64();
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

void write_network(Writer& w, const Network& net) {
  w.u32(static_cast<std::uint32_t>(net.num_layers()));
  for (const auto& l : net.layers()) {
    w.u32(static_cast<std::uint32_t>(l.in));
    w.u32(static_cast<std::uint32_t>(l.out));
    w.u8(static_cast<std::uint8_t>(l.act));
    w.u8(l.frozen ? 1 : 0);
  }
  w.u64(net.param_count());
  w.vec(net.params());
}

Network read_network(Reader& r) {
  const std::size_t at = r.pos();
  const std::uint32_t n_layers = r.u32();
  if (n_layers == 0 || n_layers > 1024) throw ParseError("checkpoint: bad layer count", at);
  std::vector<LayerSpec> layers;
  for (std::uint32_t k = 0; k < n_layers; ++k) {
    const std::size_t lat = r.pos();
    LayerSpec l;
    l.in = static_cast<int>(r.u32());
    l.out = static_cast<int>(r.u32());
    const auto act = r.u8();
    if (act > 2) throw ParseError("checkpoint: unknown activation", lat + 8);
    l.act = static_cast<Activation>(act);
    l.frozen = r.u8() != 0;
    if (l.in <= 0 || l.out <= 0 || l.in > (1 << 24) || l.out > (1 << 24))
      throw ParseError("checkpoint: bad layer width", lat);
    layers.push_back(l);
  }
  Network net;
  try {
    net = Network(std::move(layers));
  } catch (const UsageError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), at);
  }
  const std::size_t pat = r.pos();
  const std::uint64_t n = r.u64();
  if (n != net.param_count()) throw ParseError("checkpoint: parameter count does not match layers", pat);
  net.params() = r.vec(n);
  return net;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(ckpt.method));
  w.u8(ckpt.encoder ? 1 : 0);
  write_network(w, ckpt.decoder);
  if (ckpt.encoder) write_network(w, *ckpt.encoder);
  if (!ckpt.optimizer) {
    w.u8(0);
    return w.take();
  }
  const auto& o = *ckpt.optimizer;
  w.u8(static_cast<std::uint8_t>(o.hyper.kind));
  for (double d : {o.hyper.lr, o.hyper.rms_alpha, o.hyper.rms_eps, o.hyper.beta1, o.hyper.beta2,
                   o.hyper.adam_eps})
    w.f64(d);
  w.u64(o.step);
  w.u64(o.size());
  if (o.hyper.kind == OptimizerKind::adam) w.vec(o.first_moment);
  w.vec(o.second_moment);
  return w.take();
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.raw(sizeof kCheckpointMagic);
  if (std::memcmp(magic.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw ParseError("not a checkpoint file (bad magic)", 0);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 8);
  Checkpoint ck;
  const std::size_t mat = r.pos();
  const auto method = r.u8();
  if (method > static_cast<std::uint8_t>(Method::gfe_amd))
    throw ParseError("checkpoint: unknown method tag", mat);
  ck.method = static_cast<Method>(method);
  const bool has_encoder = r.u8() != 0;
  ck.decoder = read_network(r);
  if (has_encoder) ck.encoder = read_network(r);
  const std::size_t oat = r.pos();
  const auto kind = r.u8();
  if (kind != 0) {
    if (kind != 1 && kind != 2) throw ParseError("checkpoint: unknown optimizer kind", oat);
    OptimizerState o;
    o.hyper.kind = static_cast<OptimizerKind>(kind);
    o.hyper.lr = r.f64();
    o.hyper.rms_alpha = r.f64();
    o.hyper.rms_eps = r.f64();
    o.hyper.beta1 = r.f64();
    o.hyper.beta2 = r.f64();
    o.hyper.adam_eps = r.f64();
    o.step = r.u64();
    const std::uint64_t n = r.u64();
    if (o.hyper.kind == OptimizerKind::adam) o.first_moment = r.vec(n);
    o.second_moment = r.vec(n);
    ck.optimizer = std::move(o);
  }
  if (!r.done()) throw ParseError("checkpoint has trailing bytes", r.pos());
  return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(data::read_file(path)); }

}  // namespace gfe
