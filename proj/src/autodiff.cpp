#include "autodiff.hpp"

#include <cmath>
#include <string>

namespace gfe::ad {

double activate(Activation act, double x) {
  switch (act) {
    case Activation::identity: return x;
    case Activation::elu: return x > 0.0 ? x : std::expm1(x);
    case Activation::sigmoid:
      if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
      else {
        const double e = std::exp(x);
        return e / (1.0 + e);
      }
  }
  return x;
}

double activate_d1(Activation act, double x) {
  switch (act) {
    case Activation::identity: return 1.0;
    case Activation::elu: return x > 0.0 ? 1.0 : std::exp(x);
    case Activation::sigmoid: {
      const double s = activate(act, x);
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

double activate_d2(Activation act, double x) {
  switch (act) {
    case Activation::identity: return 0.0;
    case Activation::elu: return x > 0.0 ? 0.0 : std::exp(x);
    case Activation::sigmoid: {
      const double s = activate(act, x);
      return s * (1.0 - s) * (1.0 - 2.0 * s);
    }
  }
  return 0.0;
}

ComputationRecord::ComputationRecord(const Network& net, PassCounter* counter)
    : net_(&net), counter_(counter) {
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    ops_.push_back({OpKind::affine, k});
    if (net.layer(k).act != Activation::identity)
      ops_.push_back({OpKind::activation, k, net.layer(k).act});
  }
}

void ComputationRecord::forward(std::span<const double> z) {
  if (static_cast<int>(z.size()) != net_->input_dim())
    throw UsageError("record: latent has " + std::to_string(z.size()) + " entries, network expects " +
                     std::to_string(net_->input_dim()));
  values_.clear();
  values_.reserve(ops_.size() + 1);
  values_.emplace_back(as_vector(z));
  for (const auto& op : ops_) {
    const Vector& in = values_.back();
    Vector out;
    if (op.kind == OpKind::affine) {
      out = net_->weights(op.layer) * in + net_->bias(op.layer);
    } else {
      out.resize(in.size());
      for (Eigen::Index i = 0; i < in.size(); ++i) out[i] = activate(op.act, in[i]);
    }
    values_.push_back(std::move(out));
  }
  if (counter_) ++counter_->forward;
}

void ComputationRecord::run(std::span<const double> z) {
  if (has_loss_) ops_.pop_back();
  has_loss_ = false;
  finalized_ = false;
  forward(z);
  finalized_ = true;
}

double ComputationRecord::run(std::span<const double> z, std::span<const double> target,
                              LossKind loss) {
  if (static_cast<int>(target.size()) != net_->output_dim())
    throw UsageError("record: target has " + std::to_string(target.size()) +
                     " entries, network output has " + std::to_string(net_->output_dim()));
  if (has_loss_) ops_.pop_back();
  has_loss_ = false;
  finalized_ = false;
  forward(z);
  target_ = as_vector(target);
  loss_kind_ = loss;
  ops_.push_back({OpKind::loss, 0, Activation::identity, loss});
  loss_ = loss_value(loss, as_span(target_), as_span(values_.back()));
  has_loss_ = true;
  finalized_ = true;
  return loss_;
}

double ComputationRecord::loss() const {
  if (!finalized_ || !has_loss_) throw UsageError("record has no completed loss evaluation");
  return loss_;
}

const Vector& ComputationRecord::output() const {
  if (!finalized_) throw UsageError("record not finalized");
  return values_.back();
}

const Vector& ComputationRecord::latent() const {
  if (!finalized_) throw UsageError("record not finalized");
  return values_.front();
}

namespace {

void require_loss(const ComputationRecord& r, const char* who) {
  if (!r.finalized() || !r.has_loss())
    throw UsageError(std::string(who) + ": record does not hold a completed forward pass with loss");
}

void require_lambda(const ComputationRecord& r, const Vector& lambda, const char* who) {
  if (lambda.size() != r.network().input_dim())
    throw UsageError(std::string(who) + ": adjoint vector has " + std::to_string(lambda.size()) +
                     " entries, latent has " + std::to_string(r.network().input_dim()));
}

std::size_t network_op_count(const ComputationRecord& r) {
  return r.ops().size() - (r.has_loss() ? 1 : 0);
}

// Reverse sweep from a cotangent `g` on the network output. When `tangent` is
// given (tangent[i] = forward tangent of values()[i]) the reverse sweep is
// differentiated along it as well, starting from `gdot`.
struct SweepResult {
  Vector input;
  Vector params;
  Vector input_dot;
  Vector params_dot;
};

SweepResult reverse_sweep(const ComputationRecord& r, Vector g, const std::vector<Vector>* tangent,
                          Vector gdot, bool want_input, bool want_params, bool want_input_dot,
                          bool want_params_dot) {
  const Network& net = r.network();
  const auto& vals = r.values();
  const auto& ops = r.ops();
  SweepResult out;
  if (want_params) out.params = Vector::Zero(static_cast<Eigen::Index>(net.param_count()));
  if (want_params_dot) out.params_dot = Vector::Zero(static_cast<Eigen::Index>(net.param_count()));

  const std::size_t n_ops = network_op_count(r);
  for (std::size_t i = n_ops; i-- > 0;) {
    const Primitive& op = ops[i];
    const Vector& in = vals[i];
    if (op.kind == OpKind::activation) {
      for (Eigen::Index j = 0; j < in.size(); ++j) {
        const double d1 = activate_d1(op.act, in[j]);
        if (tangent) {
          const double d2 = activate_d2(op.act, in[j]);
          gdot[j] = d2 * (*tangent)[i][j] * g[j] + d1 * gdot[j];
        }
        g[j] *= d1;
      }
      continue;
    }
    // affine
    const auto k = op.layer;
    const auto W = net.weights(k);
    const bool frozen = net.layer(k).frozen;
    if (want_params && !frozen) {
      Eigen::Map<RowMatrix> dW(out.params.data() + net.weight_offset(k), W.rows(), W.cols());
      dW.noalias() += g * in.transpose();
      out.params.segment(static_cast<Eigen::Index>(net.bias_offset(k)), g.size()) += g;
    }
    if (want_params_dot && !frozen) {
      Eigen::Map<RowMatrix> dW(out.params_dot.data() + net.weight_offset(k), W.rows(), W.cols());
      dW.noalias() += gdot * in.transpose();
      dW.noalias() += g * (*tangent)[i].transpose();
      out.params_dot.segment(static_cast<Eigen::Index>(net.bias_offset(k)), gdot.size()) += gdot;
    }
    const bool need_below = i > 0 || want_input || want_input_dot;
    if (need_below) {
      if (tangent) gdot = W.transpose() * gdot;
      g = W.transpose() * g;
    }
  }
  if (want_input) out.input = g;
  if (want_input_dot) out.input_dot = gdot;

  if (auto* c = r.counter()) {
    ++c->reverse;
    if (want_params) ++c->param_accumulate;
    if (tangent) ++c->tangent_reverse;
    if (want_params_dot) c->param_accumulate += 2;
  }
  return out;
}

}  // namespace

Backprop vjp(const ComputationRecord& record, const Vector& output_cotangent, bool want_input,
             bool want_params) {
  if (!record.finalized()) throw UsageError("vjp: record not finalized");
  if (output_cotangent.size() != record.network().output_dim())
    throw UsageError("vjp: cotangent size mismatch");
  auto s = reverse_sweep(record, output_cotangent, nullptr, Vector(), want_input, want_params,
                         false, false);
  return {std::move(s.input), std::move(s.params)};
}

Vector grad_wrt_latent(const ComputationRecord& record, double seed) {
  require_loss(record, "grad_wrt_latent");
  const Vector& yhat = record.output();
  Vector g = seed * loss_gradient(record.ops().back().loss, as_span(record.target()), as_span(yhat));
  return reverse_sweep(record, std::move(g), nullptr, Vector(), true, false, false, false).input;
}

Vector grad_wrt_params(const ComputationRecord& record, double seed) {
  require_loss(record, "grad_wrt_params");
  const Vector& yhat = record.output();
  Vector g = seed * loss_gradient(record.ops().back().loss, as_span(record.target()), as_span(yhat));
  return reverse_sweep(record, std::move(g), nullptr, Vector(), false, true, false, false).params;
}

SecondOrder second_order(const ComputationRecord& record, const Vector& lambda, bool want_hvp,
                         bool want_mixed) {
  require_loss(record, "second_order");
  require_lambda(record, lambda, "second_order");
  const Network& net = record.network();
  const auto& vals = record.values();
  const auto& ops = record.ops();
  const std::size_t n_ops = network_op_count(record);

  std::vector<Vector> tangent;
  tangent.reserve(n_ops + 1);
  tangent.push_back(lambda);
  for (std::size_t i = 0; i < n_ops; ++i) {
    const Primitive& op = ops[i];
    const Vector& t = tangent.back();
    Vector next;
    if (op.kind == OpKind::affine) {
      next = net.weights(op.layer) * t;
    } else {
      next.resize(t.size());
      for (Eigen::Index j = 0; j < t.size(); ++j) next[j] = activate_d1(op.act, vals[i][j]) * t[j];
    }
    tangent.push_back(std::move(next));
  }
  if (auto* c = record.counter()) ++c->tangent_forward;

  const LossKind loss = ops.back().loss;
  const auto target = as_span(record.target());
  const auto yhat = as_span(vals.back());
  Vector g = loss_gradient(loss, target, yhat);
  Vector gdot = loss_hessian_diag(loss, target, yhat).cwiseProduct(tangent.back());

  auto s = reverse_sweep(record, std::move(g), &tangent, std::move(gdot), false, false, want_hvp,
                         want_mixed);
  return {std::move(s.input_dot), std::move(s.params_dot)};
}

Vector hessian_vector_latent(const ComputationRecord& record, const Vector& lambda) {
  return second_order(record, lambda, true, false).hvp;
}

Vector mixed_grad_params(const ComputationRecord& record, const Vector& lambda) {
  return second_order(record, lambda, false, true).mixed;
}

}  // namespace gfe::ad
