#include "wsdiff/wsnn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wsdiff {

Permutation::Permutation(std::vector<int> mapping) : mapping_(std::move(mapping)) {
  std::vector<char> seen(mapping_.size(), 0);
  for (int image : mapping_) {
    if (image < 0 || image >= size() || seen[static_cast<std::size_t>(image)]) {
      throw Error(ErrorKind::InvalidArgument, "permutation mapping is not a bijection");
    }
    seen[static_cast<std::size_t>(image)] = 1;
  }
}

Permutation Permutation::identity(int n) {
  std::vector<int> m(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i)] = i;
  return Permutation(std::move(m));
}

Permutation Permutation::transposition(int n, int a, int b) {
  std::vector<int> m(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i)] = i;
  std::swap(m.at(static_cast<std::size_t>(a)), m.at(static_cast<std::size_t>(b)));
  return Permutation(std::move(m));
}

bool Permutation::is_identity() const {
  for (int i = 0; i < size(); ++i) {
    if (mapping_[static_cast<std::size_t>(i)] != i) return false;
  }
  return true;
}

Permutation Permutation::inverse() const {
  std::vector<int> inv(mapping_.size());
  for (int i = 0; i < size(); ++i) inv[static_cast<std::size_t>(mapping_[static_cast<std::size_t>(i)])] = i;
  return Permutation(std::move(inv));
}

Vector Permutation::apply(const Vector& v) const {
  if (v.size() != size()) throw Error(ErrorKind::DimensionMismatch, "permutation apply");
  Vector out(v.size());
  for (int i = 0; i < size(); ++i) out[mapping_[static_cast<std::size_t>(i)]] = v[i];
  return out;
}

Vector Permutation::apply_transpose(const Vector& v) const {
  if (v.size() != size()) throw Error(ErrorKind::DimensionMismatch, "permutation apply_transpose");
  Vector out(v.size());
  for (int i = 0; i < size(); ++i) out[i] = v[mapping_[static_cast<std::size_t>(i)]];
  return out;
}

Matrix Permutation::dense() const {
  Matrix p = Matrix::Zero(size(), size());
  for (int i = 0; i < size(); ++i) p(mapping_[static_cast<std::size_t>(i)], i) = 1.0;
  return p;
}

WsnnArchitecture WsnnArchitecture::mlp(std::vector<int> widths, double magnitude) {
  WsnnArchitecture arch;
  arch.depth = static_cast<int>(widths.size()) - 1;
  arch.widths = std::move(widths);
  for (int i = 0; i + 1 < arch.depth; ++i) {
    LayerPerms p;
    p.q.push_back(Permutation::identity(arch.widths[static_cast<std::size_t>(i)]));
    p.r.push_back(Permutation::identity(arch.widths[static_cast<std::size_t>(i) + 1]));
    arch.perms.push_back(std::move(p));
  }
  arch.weight_masks.assign(static_cast<std::size_t>(std::max(arch.depth, 0)), {});
  arch.bias_masks.assign(static_cast<std::size_t>(std::max(arch.depth, 0)), {});
  arch.magnitude = magnitude;
  arch.sparsity = arch.structural_parameter_count();
  return arch;
}

std::vector<int> WsnnArchitecture::replicas() const {
  std::vector<int> m;
  for (const auto& p : perms) m.push_back(p.replicas());
  return m;
}

bool WsnnArchitecture::weight_allowed(int layer, int row, int col) const {
  const auto& mask = weight_masks[static_cast<std::size_t>(layer)];
  if (mask.empty()) return true;
  return mask[static_cast<std::size_t>(row) * static_cast<std::size_t>(widths[static_cast<std::size_t>(layer)]) +
              static_cast<std::size_t>(col)] != 0;
}

bool WsnnArchitecture::bias_allowed(int layer, int row) const {
  const auto& mask = bias_masks[static_cast<std::size_t>(layer)];
  if (mask.empty()) return true;
  return mask[static_cast<std::size_t>(row)] != 0;
}

long WsnnArchitecture::structural_parameter_count() const {
  long count = 0;
  for (int i = 0; i < depth; ++i) {
    const auto rows = widths[static_cast<std::size_t>(i) + 1];
    const auto cols = widths[static_cast<std::size_t>(i)];
    const auto& wm = weight_masks[static_cast<std::size_t>(i)];
    const auto& bm = bias_masks[static_cast<std::size_t>(i)];
    count += wm.empty() ? static_cast<long>(rows) * cols : std::count(wm.begin(), wm.end(), 1);
    count += bm.empty() ? rows : std::count(bm.begin(), bm.end(), 1);
  }
  return count;
}

void WsnnArchitecture::validate() const {
  if (depth < 2) throw Error(ErrorKind::InvalidArgument, "depth must be >= 2");
  if (static_cast<int>(widths.size()) != depth + 1) {
    throw Error(ErrorKind::DimensionMismatch, "widths must have depth + 1 entries");
  }
  for (int w : widths) {
    if (w < 1) throw Error(ErrorKind::InvalidArgument, "layer widths must be positive");
  }
  if (static_cast<int>(perms.size()) != depth - 1) {
    throw Error(ErrorKind::DimensionMismatch, "need one permutation set per hidden layer");
  }
  for (int i = 0; i + 1 < depth; ++i) {
    const auto& p = perms[static_cast<std::size_t>(i)];
    if (p.q.empty() || p.q.size() != p.r.size()) {
      throw Error(ErrorKind::DimensionMismatch, "|Q_i| must equal |R_i| and be >= 1");
    }
    for (const auto& q : p.q) {
      if (q.size() != widths[static_cast<std::size_t>(i)]) {
        throw Error(ErrorKind::DimensionMismatch, "Q permutation has wrong size");
      }
    }
    for (const auto& r : p.r) {
      if (r.size() != widths[static_cast<std::size_t>(i) + 1]) {
        throw Error(ErrorKind::DimensionMismatch, "R permutation has wrong size");
      }
    }
  }
  if (static_cast<int>(weight_masks.size()) != depth ||
      static_cast<int>(bias_masks.size()) != depth) {
    throw Error(ErrorKind::DimensionMismatch, "need one mask slot per layer");
  }
  for (int i = 0; i < depth; ++i) {
    const auto rows = static_cast<std::size_t>(widths[static_cast<std::size_t>(i) + 1]);
    const auto cols = static_cast<std::size_t>(widths[static_cast<std::size_t>(i)]);
    const auto& wm = weight_masks[static_cast<std::size_t>(i)];
    const auto& bm = bias_masks[static_cast<std::size_t>(i)];
    if (!wm.empty() && wm.size() != rows * cols) {
      throw Error(ErrorKind::DimensionMismatch, "weight mask size");
    }
    if (!bm.empty() && bm.size() != rows) throw Error(ErrorKind::DimensionMismatch, "bias mask size");
  }
  if (sparsity < 1) throw Error(ErrorKind::InvalidArgument, "sparsity budget must be >= 1");
  if (!(magnitude > 0.0)) throw Error(ErrorKind::InvalidArgument, "magnitude bound must be > 0");
}

WsnnParams zero_params(const WsnnArchitecture& arch) {
  WsnnParams p;
  for (int i = 0; i < arch.depth; ++i) {
    p.weights.push_back(Matrix::Zero(arch.widths[static_cast<std::size_t>(i) + 1],
                                     arch.widths[static_cast<std::size_t>(i)]));
    p.biases.push_back(Vector::Zero(arch.widths[static_cast<std::size_t>(i) + 1]));
  }
  return p;
}

WsnnParams init_params(const WsnnArchitecture& arch, Rng& rng) {
  arch.validate();
  WsnnParams p = zero_params(arch);
  for (int i = 0; i < arch.depth; ++i) {
    Matrix& w = p.weights[static_cast<std::size_t>(i)];
    const int replicas = i + 1 < arch.depth ? arch.perms[static_cast<std::size_t>(i)].replicas() : 1;
    const double fan_in = static_cast<double>(w.cols()) * replicas;
    const double scale = std::sqrt(2.0 / fan_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        const double z = rng.normal();
        if (arch.weight_allowed(i, static_cast<int>(r), static_cast<int>(c))) w(r, c) = scale * z;
      }
    }
  }
  return p;
}

namespace {

void check_shapes(const WsnnArchitecture& arch, const WsnnParams& params, const Vector& input) {
  if (static_cast<int>(params.weights.size()) != arch.depth ||
      static_cast<int>(params.biases.size()) != arch.depth) {
    throw Error(ErrorKind::DimensionMismatch, "parameter layer count does not match depth");
  }
  for (int i = 0; i < arch.depth; ++i) {
    const auto& w = params.weights[static_cast<std::size_t>(i)];
    if (w.rows() != arch.widths[static_cast<std::size_t>(i) + 1] ||
        w.cols() != arch.widths[static_cast<std::size_t>(i)] ||
        params.biases[static_cast<std::size_t>(i)].size() != w.rows()) {
      throw Error(ErrorKind::DimensionMismatch, "layer " + std::to_string(i) + " has wrong shape");
    }
  }
  if (input.size() != arch.input_width()) {
    throw Error(ErrorKind::DimensionMismatch,
                "input width " + std::to_string(input.size()) + " vs " +
                    std::to_string(arch.input_width()));
  }
}

// sum_j R_j (W Q_j a + b), or W a + b for the output layer.
Vector layer_affine(const WsnnArchitecture& arch, const WsnnParams& params, int layer,
                    const Vector& a, bool with_bias) {
  const auto li = static_cast<std::size_t>(layer);
  const Matrix& w = params.weights[li];
  if (layer + 1 == arch.depth) {
    Vector z = w * a;
    if (with_bias) z += params.biases[li];
    return z;
  }
  const auto& p = arch.perms[li];
  Vector z = Vector::Zero(w.rows());
  for (int j = 0; j < p.replicas(); ++j) {
    const auto& q = p.q[static_cast<std::size_t>(j)];
    const auto& r = p.r[static_cast<std::size_t>(j)];
    Vector u = w * (q.is_identity() ? a : q.apply(a));
    if (with_bias) u += params.biases[li];
    z += r.is_identity() ? u : r.apply(u);
  }
  return z;
}

void mask_gradient(const WsnnArchitecture& arch, int layer, Matrix& gw, Vector* gb) {
  const auto li = static_cast<std::size_t>(layer);
  const auto& wm = arch.weight_masks[li];
  if (!wm.empty()) {
    for (Eigen::Index r = 0; r < gw.rows(); ++r) {
      for (Eigen::Index c = 0; c < gw.cols(); ++c) {
        if (!wm[static_cast<std::size_t>(r * gw.cols() + c)]) gw(r, c) = 0.0;
      }
    }
  }
  const auto& bm = arch.bias_masks[li];
  if (gb && !bm.empty()) {
    for (Eigen::Index r = 0; r < gb->size(); ++r) {
      if (!bm[static_cast<std::size_t>(r)]) (*gb)[r] = 0.0;
    }
  }
}

}  // namespace

LayerTrace forward_trace(const WsnnArchitecture& arch, const WsnnParams& params,
                         const Vector& input) {
  check_shapes(arch, params, input);
  LayerTrace trace;
  trace.inputs.reserve(static_cast<std::size_t>(arch.depth));
  trace.gates.reserve(static_cast<std::size_t>(arch.depth - 1));
  Vector a = input;
  for (int i = 0; i + 1 < arch.depth; ++i) {
    Vector z = layer_affine(arch, params, i, a, true);
    Vector gate = (z.array() > 0.0).cast<double>();
    trace.inputs.push_back(std::move(a));
    a = z.cwiseMax(0.0);
    trace.gates.push_back(std::move(gate));
  }
  trace.output = layer_affine(arch, params, arch.depth - 1, a, true);
  trace.inputs.push_back(std::move(a));
  return trace;
}

LayerTrace tangent_trace(const WsnnArchitecture& arch, const WsnnParams& params,
                         const LayerTrace& primal, const Vector& direction) {
  if (direction.size() != arch.input_width()) {
    throw Error(ErrorKind::DimensionMismatch, "tangent direction width");
  }
  LayerTrace trace;
  trace.gates = primal.gates;
  Vector a = direction;
  for (int i = 0; i + 1 < arch.depth; ++i) {
    Vector z = layer_affine(arch, params, i, a, false);
    trace.inputs.push_back(std::move(a));
    a = z.cwiseProduct(primal.gates[static_cast<std::size_t>(i)]);
  }
  trace.output = layer_affine(arch, params, arch.depth - 1, a, false);
  trace.inputs.push_back(std::move(a));
  return trace;
}

void accumulate_backward(const WsnnArchitecture& arch, const WsnnParams& params,
                         const LayerTrace& trace, const Vector& grad_output, WsnnParams& grads,
                         Vector* grad_input, bool with_bias) {
  if (grad_output.size() != arch.output_width()) {
    throw Error(ErrorKind::DimensionMismatch, "grad_output width");
  }
  Vector delta = grad_output;
  for (int i = arch.depth - 1; i >= 0; --i) {
    const auto li = static_cast<std::size_t>(i);
    const Matrix& w = params.weights[li];
    const Vector& a = trace.inputs[li];
    Matrix gw = Matrix::Zero(w.rows(), w.cols());
    Vector gb = Vector::Zero(w.rows());
    Vector ga;
    if (i + 1 == arch.depth) {
      gw.noalias() = delta * a.transpose();
      gb = delta;
      if (i > 0 || grad_input) ga = w.transpose() * delta;
    } else {
      const auto& p = arch.perms[li];
      ga = Vector::Zero(w.cols());
      for (int j = 0; j < p.replicas(); ++j) {
        const auto& q = p.q[static_cast<std::size_t>(j)];
        const auto& r = p.r[static_cast<std::size_t>(j)];
        const Vector u = r.is_identity() ? delta : r.apply_transpose(delta);
        const Vector qa = q.is_identity() ? a : q.apply(a);
        gw.noalias() += u * qa.transpose();
        gb += u;
        const Vector back = w.transpose() * u;
        ga += q.is_identity() ? back : q.apply_transpose(back);
      }
    }
    mask_gradient(arch, i, gw, &gb);
    grads.weights[li] += gw;
    if (with_bias) grads.biases[li] += gb;
    if (i > 0) {
      delta = ga.cwiseProduct(trace.gates[li - 1]);
    } else if (grad_input) {
      *grad_input = ga;
    }
  }
}

Vector forward(const WsnnArchitecture& arch, const WsnnParams& params, const Vector& input) {
  check_shapes(arch, params, input);
  Vector a = input;
  for (int i = 0; i + 1 < arch.depth; ++i) a = layer_affine(arch, params, i, a, true).cwiseMax(0.0);
  return layer_affine(arch, params, arch.depth - 1, a, true);
}

Gradients backward(const WsnnArchitecture& arch, const WsnnParams& params, const Vector& input,
                   const Vector& grad_output) {
  const LayerTrace trace = forward_trace(arch, params, input);
  Gradients g{zero_params(arch), Vector::Zero(input.size())};
  accumulate_backward(arch, params, trace, grad_output, g.params, &g.input, true);
  return g;
}

Matrix materialize_weight(const WsnnArchitecture& arch, const WsnnParams& params, int layer) {
  const auto li = static_cast<std::size_t>(layer);
  const Matrix& w = params.weights[li];
  if (layer + 1 == arch.depth) return w;
  Matrix dense = Matrix::Zero(w.rows(), w.cols());
  const auto& p = arch.perms[li];
  for (int j = 0; j < p.replicas(); ++j) {
    dense += p.r[static_cast<std::size_t>(j)].dense() * w * p.q[static_cast<std::size_t>(j)].dense();
  }
  return dense;
}

Vector materialize_bias(const WsnnArchitecture& arch, const WsnnParams& params, int layer) {
  const auto li = static_cast<std::size_t>(layer);
  const Vector& b = params.biases[li];
  if (layer + 1 == arch.depth) return b;
  Vector dense = Vector::Zero(b.size());
  for (const auto& r : arch.perms[li].r) dense += r.dense() * b;
  return dense;
}

Vector dense_forward(const WsnnArchitecture& arch, const WsnnParams& params, const Vector& input) {
  check_shapes(arch, params, input);
  Vector a = input;
  for (int i = 0; i < arch.depth; ++i) {
    Vector z = materialize_weight(arch, params, i) * a + materialize_bias(arch, params, i);
    a = (i + 1 < arch.depth) ? Vector(z.cwiseMax(0.0)) : z;
  }
  return a;
}

long nnz(const WsnnParams& params) {
  long count = 0;
  for (const auto& w : params.weights) count += (w.array() != 0.0).count();
  for (const auto& b : params.biases) count += (b.array() != 0.0).count();
  return count;
}

double max_abs_entry(const WsnnParams& params) {
  double m = 0.0;
  for (const auto& w : params.weights) {
    if (w.size()) m = std::max(m, w.cwiseAbs().maxCoeff());
  }
  for (const auto& b : params.biases) {
    if (b.size()) m = std::max(m, b.cwiseAbs().maxCoeff());
  }
  return m;
}

bool satisfies_constraints(const WsnnArchitecture& arch, const WsnnParams& params) {
  return max_abs_entry(params) <= arch.magnitude && nnz(params) <= arch.sparsity;
}

WsnnParams project_params(WsnnParams params, double magnitude) {
  if (!(magnitude > 0.0)) throw Error(ErrorKind::InvalidArgument, "magnitude must be > 0");
  for (auto& w : params.weights) w = w.cwiseMax(-magnitude).cwiseMin(magnitude);
  for (auto& b : params.biases) b = b.cwiseMax(-magnitude).cwiseMin(magnitude);
  return params;
}

Matrix ConvLayout::weight_template(const Vector& filter) const {
  Matrix w = Matrix::Zero(output_width, input_width);
  for (Eigen::Index k = 0; k < filter.size(); ++k) w(0, k) = filter[k];
  return w;
}

ConvLayout conv_as_wsnn(int input_side, int filter_side) {
  if (input_side < 1 || filter_side < 1 || filter_side > input_side) {
    throw Error(ErrorKind::InvalidSize, "conv_as_wsnn needs 1 <= filter_side <= input_side");
  }
  const int out_side = input_side - filter_side + 1;
  const int filter_size = filter_side * filter_side;
  ConvLayout layout;
  layout.input_width = input_side * input_side;
  layout.output_width = out_side * out_side;
  layout.weight_mask.assign(static_cast<std::size_t>(layout.input_width) * layout.output_width, 0);
  for (int k = 0; k < filter_size; ++k) layout.weight_mask[static_cast<std::size_t>(k)] = 1;

  for (int oy = 0; oy < out_side; ++oy) {
    for (int ox = 0; ox < out_side; ++ox) {
      // Q gathers the receptive field of output (oy, ox) into positions
      // [0, filter_size); the remaining pixels fill the tail in order.
      std::vector<int> mapping(static_cast<std::size_t>(layout.input_width), -1);
      for (int ky = 0; ky < filter_side; ++ky) {
        for (int kx = 0; kx < filter_side; ++kx) {
          const int src = (oy + ky) * input_side + (ox + kx);
          mapping[static_cast<std::size_t>(src)] = ky * filter_side + kx;
        }
      }
      int next = filter_size;
      for (auto& m : mapping) {
        if (m < 0) m = next++;
      }
      const int j = oy * out_side + ox;
      layout.perms.q.emplace_back(std::move(mapping));
      layout.perms.r.push_back(Permutation::transposition(layout.output_width, 0, j));
    }
  }
  return layout;
}

CoveringShape covering_shape(const WsnnArchitecture& arch) {
  CoveringShape shape;
  shape.depth = arch.depth;
  shape.max_width = *std::max_element(arch.widths.begin(), arch.widths.end());
  const auto reps = arch.replicas();
  shape.max_replicas = reps.empty() ? 1 : *std::max_element(reps.begin(), reps.end());
  shape.sparsity = arch.sparsity;
  shape.magnitude = arch.magnitude;
  return shape;
}

double covering_numerator(const CoveringShape& s, double box_half_width) {
  const double depth = s.depth;
  const double width = s.max_width;
  const double base = s.max_replicas * width * std::max(s.magnitude, 1.0);
  return 4.0 * depth * depth * width * width * std::pow(base, depth) * (depth + box_half_width + 2.0);
}

double covering_log_bound(const CoveringShape& s, double box_half_width, double delta) {
  if (!(delta > 0.0) || !(box_half_width > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "covering bound needs C > 0 and delta > 0");
  }
  const double numerator = covering_numerator(s, box_half_width);
  double log_ratio;
  if (std::isfinite(numerator)) {
    log_ratio = std::log(numerator / delta);
  } else {
    const double depth = s.depth;
    const double width = s.max_width;
    log_ratio = std::log(4.0) + 2.0 * std::log(depth) + 2.0 * std::log(width) +
                depth * (std::log(static_cast<double>(s.max_replicas)) + std::log(width) +
                         std::log(std::max(s.magnitude, 1.0))) +
                std::log(depth + box_half_width + 2.0) - std::log(delta);
  }
  return (static_cast<double>(s.sparsity) + 1.0) * log_ratio;
}

double covering_log_bound(const WsnnArchitecture& arch, double box_half_width, double delta) {
  return covering_log_bound(covering_shape(arch), box_half_width, delta);
}

}  // namespace wsdiff
