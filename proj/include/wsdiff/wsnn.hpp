#pragma once

// Sparse weight-sharing ReLU networks.
//
// Hidden layer i maps a to relu( sum_j R_i^(j) (W_i Q_i^(j) a + b_i) ), where
// the Q/R are permutations and W_i, b_i are shared across the m_i replicas.
// The output layer is affine: W_L a + b_L. With one identity replica per layer
// this is an ordinary sparse MLP.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "wsdiff/numerics.hpp"

namespace wsdiff {

// Permutation of {0, ..., n-1} stored as an index map. As a matrix P it has
// P(mapping[i], i) = 1, so (P v)[mapping[i]] = v[i].
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<int> mapping);

  static Permutation identity(int n);
  // Exchanges positions a and b.
  static Permutation transposition(int n, int a, int b);

  int size() const noexcept { return static_cast<int>(mapping_.size()); }
  std::span<const int> mapping() const noexcept { return mapping_; }
  bool is_identity() const;

  Permutation inverse() const;
  Vector apply(const Vector& v) const;
  Vector apply_transpose(const Vector& v) const;
  Matrix dense() const;

  bool operator==(const Permutation&) const = default;

 private:
  std::vector<int> mapping_;
};

struct LayerPerms {
  std::vector<Permutation> q;  // each of size d_i
  std::vector<Permutation> r;  // each of size d_{i+1}

  int replicas() const noexcept { return static_cast<int>(q.size()); }
};

struct WsnnArchitecture {
  int depth = 2;                   // L
  std::vector<int> widths;         // d_1 .. d_{L+1}
  std::vector<LayerPerms> perms;   // one entry per hidden layer (L - 1)
  // Structural nonzero patterns, row-major d_{i+1} x d_i per layer; an empty
  // mask means dense.
  std::vector<std::vector<std::uint8_t>> weight_masks;
  std::vector<std::vector<std::uint8_t>> bias_masks;
  long sparsity = 0;               // s
  double magnitude = 1.0;          // M

  // Plain (m_i = 1, identity permutations) dense network with s set to the
  // parameter count.
  static WsnnArchitecture mlp(std::vector<int> widths, double magnitude = 1e3);

  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
  std::vector<int> replicas() const;
  // Number of entries the mask pattern allows to be nonzero.
  long structural_parameter_count() const;
  bool weight_allowed(int layer, int row, int col) const;
  bool bias_allowed(int layer, int row) const;

  // Throws InvalidArgument / DimensionMismatch on inconsistent fields.
  void validate() const;
};

struct WsnnParams {
  std::vector<Matrix> weights;  // W_i: d_{i+1} x d_i
  std::vector<Vector> biases;   // b_i: d_{i+1}

  std::size_t layers() const noexcept { return weights.size(); }
};

WsnnParams zero_params(const WsnnArchitecture& arch);
// He-style fan-in scaled normal weights on the allowed pattern, zero biases.
WsnnParams init_params(const WsnnArchitecture& arch, Rng& rng);

Vector forward(const WsnnArchitecture& arch, const WsnnParams& params, const Vector& input);

struct Gradients {
  WsnnParams params;
  Vector input;
};

Gradients backward(const WsnnArchitecture& arch, const WsnnParams& params,
                   const Vector& input, const Vector& grad_output);

// Per-layer record of a (possibly linearized) pass: the input to each layer
// and the ReLU derivative of each hidden layer (1 where the pre-activation is
// strictly positive).
struct LayerTrace {
  std::vector<Vector> inputs;
  std::vector<Vector> gates;
  Vector output;
};

LayerTrace forward_trace(const WsnnArchitecture& arch, const WsnnParams& params,
                         const Vector& input);

// Pushes `direction` through the network linearized at `primal`: biases are
// dropped and ReLUs become the primal gates. The output is J(x) * direction.
LayerTrace tangent_trace(const WsnnArchitecture& arch, const WsnnParams& params,
                         const LayerTrace& primal, const Vector& direction);

// Reverse-mode accumulation through a recorded trace. Adds into `grads`
// (which must be shaped like params); bias gradients are skipped when
// `with_bias` is false. `grad_input` may be null.
void accumulate_backward(const WsnnArchitecture& arch, const WsnnParams& params,
                         const LayerTrace& trace, const Vector& grad_output,
                         WsnnParams& grads, Vector* grad_input, bool with_bias = true);

// Dense sum_j R^(j) W Q^(j) for a hidden layer, or W itself for the output layer.
Matrix materialize_weight(const WsnnArchitecture& arch, const WsnnParams& params, int layer);
Vector materialize_bias(const WsnnArchitecture& arch, const WsnnParams& params, int layer);
// Forward pass through the materialized dense matrices.
Vector dense_forward(const WsnnArchitecture& arch, const WsnnParams& params, const Vector& input);

long nnz(const WsnnParams& params);
double max_abs_entry(const WsnnParams& params);
bool satisfies_constraints(const WsnnArchitecture& arch, const WsnnParams& params);

// Clips every entry into [-magnitude, magnitude].
WsnnParams project_params(WsnnParams params, double magnitude);

// Valid 2-D convolution of a side x side image by a filter_side x filter_side
// filter, expressed as one shared weight row permuted into place.
struct ConvLayout {
  int input_width = 0;   // input_side^2
  int output_width = 0;  // (input_side - filter_side + 1)^2
  LayerPerms perms;
  std::vector<std::uint8_t> weight_mask;  // nonzero only in row 0, columns [0, filter_side^2)

  // Shared weight block for a row-major flattened filter.
  Matrix weight_template(const Vector& filter) const;
};

ConvLayout conv_as_wsnn(int input_side, int filter_side);

// Dimensions that enter the covering-number bound.
struct CoveringShape {
  int depth = 2;
  int max_width = 1;
  int max_replicas = 1;
  long sparsity = 1;
  double magnitude = 1.0;
};

CoveringShape covering_shape(const WsnnArchitecture& arch);

// 4 L^2 |d|^2 { |m| |d| max(M,1) }^L (L + C + 2)
double covering_numerator(const CoveringShape& shape, double box_half_width);

// (s + 1) log(numerator / delta): upper bound on the log delta-covering
// number of the class in sup norm over [-C, C]^{d_1}.
double covering_log_bound(const CoveringShape& shape, double box_half_width, double delta);
double covering_log_bound(const WsnnArchitecture& arch, double box_half_width, double delta);

// Text checkpoint; the field order is documented in README.md.
void save_checkpoint(std::ostream& out, const WsnnArchitecture& arch, const WsnnParams& params);
void load_checkpoint(std::istream& in, WsnnArchitecture& arch, WsnnParams& params);

}  // namespace wsdiff
