#include <doctest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"
#include "wsdiff/wsnn.hpp"

using namespace wsdiff;
using namespace wsdiff::testing;

namespace {

bool same_gates(const LayerTrace& a, const LayerTrace& b) {
  for (std::size_t i = 0; i < a.gates.size(); ++i) {
    if (a.gates[i] != b.gates[i]) return false;
  }
  return true;
}

// Direct valid 2-D convolution (cross-correlation), row-major flattening.
Vector direct_conv(const Vector& image, int side, const Vector& filter, int fside) {
  const int out = side - fside + 1;
  Vector y = Vector::Zero(out * out);
  for (int oy = 0; oy < out; ++oy)
    for (int ox = 0; ox < out; ++ox)
      for (int ky = 0; ky < fside; ++ky)
        for (int kx = 0; kx < fside; ++kx)
          y[oy * out + ox] += filter[ky * fside + kx] * image[(oy + ky) * side + ox + kx];
  return y;
}

WsnnArchitecture conv_network(const ConvLayout& layout) {
  WsnnArchitecture arch;
  arch.depth = 2;
  arch.widths = {layout.input_width, layout.output_width, layout.output_width};
  arch.perms = {layout.perms};
  arch.weight_masks = {layout.weight_mask, {}};
  arch.bias_masks = {std::vector<std::uint8_t>(static_cast<std::size_t>(layout.output_width), 0), {}};
  arch.sparsity = arch.structural_parameter_count();
  arch.magnitude = 10.0;
  arch.validate();
  return arch;
}

}  // namespace

TEST_CASE("permutation semantics and inverse") {
  Rng rng(1);
  const Permutation p(std::vector<int>{2, 0, 1});
  Vector v(3);
  v << 10, 20, 30;
  const Vector pv = p.apply(v);
  CHECK(pv[2] == 10);
  CHECK(pv[0] == 20);
  CHECK(pv[1] == 30);
  CHECK((p.dense() * v - pv).norm() == 0.0);
  CHECK((p.dense().transpose() * v - p.apply_transpose(v)).norm() == 0.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(20));
    const auto q = random_permutation(n, rng);
    const Vector x = standard_normal(rng, n);
    CHECK(q.inverse().apply(q.apply(x)) == x);
    CHECK(q.apply_transpose(q.apply(x)) == x);
  }
  CHECK(Permutation::identity(4).is_identity());
  CHECK_FALSE(Permutation::transposition(4, 0, 3).is_identity());
}

TEST_CASE("invalid permutation is rejected") {
  CHECK_THROWS_AS(Permutation(std::vector<int>{0, 0, 1}), Error);
}

TEST_CASE("single identity replica equals a plain MLP") {
  Rng rng(2);
  const auto arch = WsnnArchitecture::mlp({3, 5, 4, 2});
  const auto params = random_params(arch, rng);
  const Vector x = standard_normal(rng, 3);
  Vector a = x;
  for (int i = 0; i < 2; ++i) a = (params.weights[i] * a + params.biases[i]).cwiseMax(0.0);
  const Vector expect = params.weights[2] * a + params.biases[2];
  CHECK((forward(arch, params, x) - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("zero parameters give zero output") {
  const auto arch = WsnnArchitecture::mlp({3, 4, 2});
  const Vector x = Vector::Ones(3);
  CHECK(forward(arch, zero_params(arch), x).norm() == 0.0);
}

TEST_CASE("replica sum matches the materialized dense network") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto arch = random_architecture(rng, 4, 8, 4);
    const auto params = random_params(arch, rng);
    const Vector x = standard_normal(rng, arch.input_width());
    const Vector y = forward(arch, params, x);
    const Vector yd = dense_forward(arch, params, x);
    CHECK((y - yd).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + yd.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("materialized hidden weight is the explicit sum of permuted blocks") {
  Rng rng(4);
  const auto arch = random_architecture(rng, 3, 6, 3);
  const auto params = random_params(arch, rng);
  const auto& lp = arch.perms[0];
  Matrix expect = Matrix::Zero(arch.widths[1], arch.widths[0]);
  Vector bias = Vector::Zero(arch.widths[1]);
  for (int j = 0; j < lp.replicas(); ++j) {
    expect += lp.r[j].dense() * params.weights[0] * lp.q[j].dense();
    bias += lp.r[j].dense() * params.biases[0];
  }
  CHECK((materialize_weight(arch, params, 0) - expect).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((materialize_bias(arch, params, 0) - bias).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backward: zero upstream gradient gives zero gradients") {
  Rng rng(5);
  const auto arch = random_architecture(rng);
  const auto params = random_params(arch, rng);
  const auto g = backward(arch, params, standard_normal(rng, arch.input_width()), Vector::Zero(arch.output_width()));
  CHECK(g.input.norm() == 0.0);
  for (std::size_t i = 0; i < g.params.layers(); ++i) {
    CHECK(g.params.weights[i].norm() == 0.0);
    CHECK(g.params.biases[i].norm() == 0.0);
  }
}

TEST_CASE("backward: linear regime gives W^T g") {
  Rng rng(6);
  const auto arch = WsnnArchitecture::mlp({3, 4, 2});
  auto params = random_params(arch, rng, 0.1);
  params.biases[0].setConstant(10.0);  // all hidden units active
  const Vector x = standard_normal(rng, 3);
  const Vector g = standard_normal(rng, 2);
  const auto grads = backward(arch, params, x, g);
  const Vector expect = params.weights[0].transpose() * (params.weights[1].transpose() * g);
  CHECK((grads.input - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("backward matches central finite differences") {
  Rng rng(7);
  const double eps = 1e-5;
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const auto arch = random_architecture(rng, 4, 6, 3);
    auto params = random_params(arch, rng);
    const Vector x = standard_normal(rng, arch.input_width());
    const Vector g = standard_normal(rng, arch.output_width());
    const auto grads = backward(arch, params, x, g);
    const LayerTrace primal = forward_trace(arch, params, x);
    auto p_entries = entries(params);
    auto gp = grads.params;
    auto g_entries = entries(gp);
    const auto allowed = entry_allowed(arch, params);
    for (std::size_t k = 0; k < p_entries.size(); ++k) {
      if (!allowed[k]) {
        CHECK(*g_entries[k] == 0.0);  // structurally zero entries never move
        continue;
      }
      const double saved = *p_entries[k];
      *p_entries[k] = saved + eps;
      const LayerTrace up = forward_trace(arch, params, x);
      *p_entries[k] = saved - eps;
      const LayerTrace down = forward_trace(arch, params, x);
      *p_entries[k] = saved;
      if (!same_gates(primal, up) || !same_gates(primal, down)) continue;  // straddles a kink
      const double fd = (g.dot(up.output) - g.dot(down.output)) / (2 * eps);
      CHECK(close_rel(fd, *g_entries[k], 1e-5));
      ++checked;
    }
    for (int k = 0; k < arch.input_width(); ++k) {
      Vector xp = x;
      Vector xm = x;
      xp[k] += eps;
      xm[k] -= eps;
      const LayerTrace up = forward_trace(arch, params, xp);
      const LayerTrace down = forward_trace(arch, params, xm);
      if (!same_gates(primal, up) || !same_gates(primal, down)) continue;
      const double fd = (g.dot(up.output) - g.dot(down.output)) / (2 * eps);
      CHECK(close_rel(fd, grads.input[k], 1e-5));
      ++checked;
    }
  }
  CHECK(checked > 500);
}

TEST_CASE("tangent trace is the Jacobian-vector product") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto arch = random_architecture(rng);
    const auto params = random_params(arch, rng);
    const Vector x = standard_normal(rng, arch.input_width());
    const Vector v = standard_normal(rng, arch.input_width());
    const LayerTrace primal = forward_trace(arch, params, x);
    const double eps = 1e-6;
    const LayerTrace up = forward_trace(arch, params, x + eps * v);
    const LayerTrace down = forward_trace(arch, params, x - eps * v);
    if (!same_gates(primal, up) || !same_gates(primal, down)) continue;
    const Vector fd = (up.output - down.output) / (2 * eps);
    const Vector jv = tangent_trace(arch, params, primal, v).output;
    CHECK((fd - jv).cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + jv.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("conv_as_wsnn(4, 2) layout") {
  const auto layout = conv_as_wsnn(4, 2);
  CHECK(layout.input_width == 16);
  CHECK(layout.output_width == 9);
  CHECK(layout.perms.replicas() == 9);
}

TEST_CASE("conv_as_wsnn reproduces direct 2-D convolution") {
  Rng rng(9);
  for (int fside : {1, 2, 3}) {
    const auto layout = conv_as_wsnn(4, fside);
    const auto arch = conv_network(layout);
    const Vector filter = standard_normal(rng, fside * fside);
    auto params = zero_params(arch);
    params.weights[0] = layout.weight_template(filter);
    params.weights[1] = Matrix::Identity(layout.output_width, layout.output_width);
    for (int trial = 0; trial < 10; ++trial) {
      const Vector image = standard_normal(rng, 16);
      const Vector conv = direct_conv(image, 4, filter, fside);
      const Vector linear = materialize_weight(arch, params, 0) * image;
      CHECK((linear - conv).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((forward(arch, params, image) - conv.cwiseMax(0.0)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("conv_as_wsnn with a 1x1 filter scales the image") {
  const auto layout = conv_as_wsnn(3, 1);
  const auto arch = conv_network(layout);
  auto params = zero_params(arch);
  params.weights[0] = layout.weight_template(Vector::Constant(1, 2.5));
  const Matrix w = materialize_weight(arch, params, 0);
  CHECK((w - 2.5 * Matrix::Identity(9, 9)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("nnz matches a brute-force count") {
  Rng rng(10);
  const auto arch = random_architecture(rng);
  auto params = random_params(arch, rng);
  params.weights[0](0, 0) = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < params.layers(); ++i) {
    for (Eigen::Index k = 0; k < params.weights[i].size(); ++k) count += params.weights[i].data()[k] != 0.0;
    for (Eigen::Index k = 0; k < params.biases[i].size(); ++k) count += params.biases[i][k] != 0.0;
  }
  CHECK(nnz(params) == count);
}

TEST_CASE("project_params clips, is idempotent and keeps in-bound values") {
  Rng rng(11);
  const auto arch = WsnnArchitecture::mlp({2, 3, 1});
  auto params = random_params(arch, rng, 0.1);
  const auto same = project_params(params, 1.0);
  CHECK(same.weights[0] == params.weights[0]);
  params.weights[0](0, 0) = 2.0;
  params.biases[1][0] = -2.0;
  const auto once = project_params(params, 1.0);
  CHECK(once.weights[0](0, 0) == 1.0);
  CHECK(once.biases[1][0] == -1.0);
  const auto twice = project_params(once, 1.0);
  CHECK(twice.weights[0] == once.weights[0]);
  CHECK(twice.biases[1] == once.biases[1]);
  CHECK(max_abs_entry(once) <= 1.0);
}

TEST_CASE("satisfies_constraints flags magnitude and pattern violations") {
  Rng rng(12);
  auto arch = WsnnArchitecture::mlp({2, 3, 1}, 1.0);
  auto params = random_params(arch, rng, 0.1);
  CHECK(satisfies_constraints(arch, params));
  params.weights[1](0, 0) = 5.0;
  CHECK_FALSE(satisfies_constraints(arch, params));
}

TEST_CASE("covering bound: closed-form value") {
  CoveringShape s{2, 3, 2, 5, 1.0};
  // 4 L^2 |d|^2 (m |d| M)^L (L + C + 2) = 16 * 9 * 36 * 5 = 25920
  CHECK(covering_numerator(s, 1.0) == doctest::Approx(25920.0).epsilon(1e-15));
  CHECK(covering_log_bound(s, 1.0, 0.1) == doctest::Approx(74.7921314607615400842).epsilon(1e-14));
}

TEST_CASE("covering bound: log laws") {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    CoveringShape s{2 + static_cast<int>(rng.uniform_index(6)), 1 + static_cast<int>(rng.uniform_index(64)),
                    1 + static_cast<int>(rng.uniform_index(9)), 1 + static_cast<long>(rng.uniform_index(1000)),
                    0.5 + 5 * rng.uniform()};
    const double c = 0.5 + 3 * rng.uniform();
    const double num = covering_numerator(s, c);
    CHECK(covering_log_bound(s, c, num) == 0.0);
    const double delta = 1e-3 + rng.uniform();
    const double gap = covering_log_bound(s, c, delta / 2) - covering_log_bound(s, c, delta);
    CHECK(gap == doctest::Approx((s.sparsity + 1) * std::log(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("covering bound is monotone in every argument") {
  Rng rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    CoveringShape s{2 + static_cast<int>(rng.uniform_index(5)), 1 + static_cast<int>(rng.uniform_index(32)),
                    1 + static_cast<int>(rng.uniform_index(5)), 1 + static_cast<long>(rng.uniform_index(500)),
                    0.2 + 3 * rng.uniform()};
    const double c = 0.5 + 2 * rng.uniform();
    const double delta = 1e-4 + 0.5 * rng.uniform();
    const double base = covering_log_bound(s, c, delta);
    auto bumped = [&](auto edit) {
      CoveringShape t = s;
      edit(t);
      return covering_log_bound(t, c, delta);
    };
    CHECK(bumped([](CoveringShape& t) { t.depth += 1; }) >= base);
    CHECK(bumped([](CoveringShape& t) { t.sparsity += 7; }) >= base);
    CHECK(bumped([](CoveringShape& t) { t.magnitude *= 1.5; }) >= base);
    CHECK(bumped([](CoveringShape& t) { t.max_width += 3; }) >= base);
    CHECK(bumped([](CoveringShape& t) { t.max_replicas += 1; }) >= base);
    CHECK(covering_log_bound(s, c * 2, delta) >= base);
    CHECK(covering_log_bound(s, c, delta / 3) >= base);
  }
}

TEST_CASE("covering bound survives overflow of the numerator") {
  CoveringShape s{400, 512, 8, 100, 5.0};
  const double v = covering_log_bound(s, 1.0, 0.1);
  CHECK(std::isfinite(v));
  CoveringShape t = s;
  t.depth += 1;
  CHECK(covering_log_bound(t, 1.0, 0.1) > v);
}

TEST_CASE("checkpoint round trip is exact") {
  Rng rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    const auto arch = random_architecture(rng);
    const auto params = random_params(arch, rng);
    std::stringstream buf;
    save_checkpoint(buf, arch, params);
    WsnnArchitecture arch2;
    WsnnParams params2;
    load_checkpoint(buf, arch2, params2);
    CHECK(arch2.widths == arch.widths);
    CHECK(arch2.sparsity == arch.sparsity);
    CHECK(arch2.magnitude == arch.magnitude);
    CHECK(arch2.weight_masks == arch.weight_masks);
    CHECK(arch2.bias_masks == arch.bias_masks);
    for (std::size_t i = 0; i < arch.perms.size(); ++i) {
      CHECK(arch2.perms[i].q == arch.perms[i].q);
      CHECK(arch2.perms[i].r == arch.perms[i].r);
    }
    for (std::size_t i = 0; i < params.layers(); ++i) {
      CHECK(params2.weights[i] == params.weights[i]);
      CHECK(params2.biases[i] == params.biases[i]);
    }
  }
}

TEST_CASE("malformed checkpoint is a ParseError") {
  std::stringstream buf("wsnn-checkpoint 1\ndepth two\n");
  WsnnArchitecture arch;
  WsnnParams params;
  try {
    load_checkpoint(buf, arch, params);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
  }
}

TEST_CASE("init_params is seed-deterministic and respects masks") {
  Rng rng(16);
  const auto arch = random_architecture(rng);
  Rng a(99);
  Rng b(99);
  const auto pa = init_params(arch, a);
  const auto pb = init_params(arch, b);
  for (std::size_t i = 0; i < pa.layers(); ++i) CHECK(pa.weights[i] == pb.weights[i]);
  CHECK(satisfies_constraints(arch, pa));
}
