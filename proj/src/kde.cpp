#include "wsdiff/kde.hpp"

#include <cmath>
#include <numbers>

namespace wsdiff {

double pooled_std(const Matrix& data) {
  const Eigen::Index n = data.rows();
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "pooled_std needs n >= 2");
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const double ss = (data.rowwise() - mean).squaredNorm();
  return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(data.cols()));
}

double scott_bandwidth(const Matrix& data) {
  const double n = static_cast<double>(data.rows());
  const double dim = static_cast<double>(data.cols());
  return std::pow(n, -1.0 / (dim + 4.0)) * pooled_std(data);
}

KdeModel fit(const Dataset& data, Kernel kernel, std::optional<double> bandwidth) {
  if (data.size() < 1) throw Error(ErrorKind::EmptyDataset, "KDE fit on an empty dataset");
  KdeModel model{data.samples, 1.0, kernel};
  model.bandwidth = bandwidth ? *bandwidth : scott_bandwidth(data.samples);
  if (!(model.bandwidth > 0.0)) throw Error(ErrorKind::InvalidArgument, "bandwidth must be > 0");
  return model;
}

double density(const KdeModel& model, const Vector& x) {
  if (x.size() != model.data.cols()) throw Error(ErrorKind::DimensionMismatch, "KDE point dimension");
  const double h = model.bandwidth;
  const double dim = static_cast<double>(x.size());
  const Eigen::Index n = model.data.rows();
  double sum = 0.0;
  if (model.kernel == Kernel::Gaussian) {
    const double norm = std::pow(2.0 * std::numbers::pi * h * h, -0.5 * dim);
    for (Eigen::Index i = 0; i < n; ++i) {
      sum += std::exp(-0.5 * (x - model.data.row(i).transpose()).squaredNorm() / (h * h));
    }
    return norm * sum / static_cast<double>(n);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if ((x - model.data.row(i).transpose()).cwiseAbs().maxCoeff() <= h) sum += 1.0;
  }
  return sum / static_cast<double>(n) / std::pow(2.0 * h, dim);
}

Dataset sample(const KdeModel& model, long n_samples, Rng& rng) {
  if (n_samples < 1) throw Error(ErrorKind::InvalidSize, "KDE sample needs n >= 1");
  const Eigen::Index dim = model.data.cols();
  const double h = model.bandwidth;
  Dataset out;
  out.samples.resize(n_samples, dim);
  for (long s = 0; s < n_samples; ++s) {
    const auto i = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(model.data.rows())));
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double noise = model.kernel == Kernel::Gaussian ? rng.normal() : 2.0 * rng.uniform() - 1.0;
      out.samples(s, j) = model.data(i, j) + h * noise;
    }
  }
  return out;
}

}  // namespace wsdiff
