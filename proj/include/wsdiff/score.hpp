#pragma once

#include <functional>
#include <utility>

#include "wsdiff/numerics.hpp"

namespace wsdiff {

enum class ScoreSource { Learned, Analytic, Zero };

// A time-indexed vector field (x, t) -> approximate grad log p_t(x).
struct ScoreFunction {
  std::function<Vector(const Vector&, double)> fn;
  ScoreSource source = ScoreSource::Learned;

  Vector operator()(const Vector& x, double t) const {
    Vector out = fn(x, t);
    if (out.size() != x.size()) {
      throw Error(ErrorKind::DimensionMismatch, "score output length differs from input length");
    }
    return out;
  }

  static ScoreFunction zero() {
    return {[](const Vector& x, double) { return Vector(Vector::Zero(x.size())); }, ScoreSource::Zero};
  }
};

}  // namespace wsdiff
