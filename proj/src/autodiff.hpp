#pragma once

// Differentiation core for layer-stack decoders.
//
// A ComputationRecord is a tape of the primitives evaluated for one input
// (affine maps, elementwise activations and an optional terminal loss
// reduction) together with every intermediate value. The free functions below
// replay that tape backwards: plain reverse mode gives first-order gradients,
// and reverse mode carried on top of a forward tangent (forward-over-reverse)
// gives Hessian-vector products in the latent and the mixed parameter-latent
// product  d/dtheta <lambda, grad_z l>.

#include "common.hpp"
#include "loss.hpp"
#include "network.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace gfe::ad {

// Counts traversals of the decoder's weight matrices. A primal sweep, a
// reverse sweep, a tangent sweep and a rank-one accumulation into a parameter
// gradient each touch every weight once, so the total is proportional to the
// arithmetic cost of whatever ran.
struct PassCounter {
  std::uint64_t forward = 0;
  std::uint64_t reverse = 0;
  std::uint64_t tangent_forward = 0;
  std::uint64_t tangent_reverse = 0;
  std::uint64_t param_accumulate = 0;

  std::uint64_t weight_passes() const {
    return forward + reverse + tangent_forward + tangent_reverse + param_accumulate;
  }
  PassCounter& operator+=(const PassCounter& o) {
    forward += o.forward;
    reverse += o.reverse;
    tangent_forward += o.tangent_forward;
    tangent_reverse += o.tangent_reverse;
    param_accumulate += o.param_accumulate;
    return *this;
  }
};

enum class OpKind : std::uint8_t { affine, activation, loss };

struct Primitive {
  OpKind kind;
  std::size_t layer = 0;                 // affine: index into the network
  Activation act = Activation::identity; // activation
  LossKind loss = LossKind::bce;         // loss
};

class ComputationRecord {
 public:
  // The network is borrowed read-only and must outlive the record.
  explicit ComputationRecord(const Network& net, PassCounter* counter = nullptr);

  // Network only. Afterwards output() holds D(z).
  void run(std::span<const double> z);
  // Network followed by a loss reduction against `target`. Returns the loss.
  double run(std::span<const double> z, std::span<const double> target, LossKind loss);

  bool finalized() const { return finalized_; }
  bool has_loss() const { return has_loss_; }
  double loss() const;
  const Vector& output() const;
  const Vector& latent() const;
  const Vector& target() const { return target_; }

  const std::vector<Primitive>& ops() const { return ops_; }
  // values()[0] is the input; values()[i + 1] is the output of network op i.
  const std::vector<Vector>& values() const { return values_; }
  const Network& network() const { return *net_; }
  PassCounter* counter() const { return counter_; }

 private:
  void forward(std::span<const double> z);

  const Network* net_;
  PassCounter* counter_;
  std::vector<Primitive> ops_;
  std::vector<Vector> values_;
  Vector target_;
  double loss_ = 0.0;
  LossKind loss_kind_ = LossKind::bce;
  bool has_loss_ = false;
  bool finalized_ = false;
};

struct Backprop {
  Vector input;   // empty unless requested
  Vector params;  // empty unless requested
};

// Vector-Jacobian product of the network part of the record with a cotangent
// on its output. Used for records without a loss (the AE encoder).
Backprop vjp(const ComputationRecord& record, const Vector& output_cotangent, bool want_input,
             bool want_params);

// d(seed * l)/dz for a record that ends in a loss.
Vector grad_wrt_latent(const ComputationRecord& record, double seed = 1.0);
// d(seed * l)/dtheta with the latent held constant.
Vector grad_wrt_params(const ComputationRecord& record, double seed = 1.0);

struct SecondOrder {
  Vector hvp;    // lambda^T grad_z^2 l
  Vector mixed;  // d/dtheta <lambda, grad_z l>
};

// One forward-over-reverse sweep producing either or both products.
SecondOrder second_order(const ComputationRecord& record, const Vector& lambda, bool want_hvp,
                         bool want_mixed);

Vector hessian_vector_latent(const ComputationRecord& record, const Vector& lambda);
Vector mixed_grad_params(const ComputationRecord& record, const Vector& lambda);

// Elementwise activation and its first two derivatives (ELU uses alpha = 1).
double activate(Activation act, double x);
double activate_d1(Activation act, double x);
double activate_d2(Activation act, double x);

}  // namespace gfe::ad
