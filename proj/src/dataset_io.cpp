#include <algorithm>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wsdiff/densities.hpp"

namespace wsdiff {

void write_dataset_csv(std::ostream& out, const Matrix& samples) {
  for (Eigen::Index j = 0; j < samples.cols(); ++j) out << (j ? "," : "") << 'x' << (j + 1);
  out << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    for (Eigen::Index j = 0; j < samples.cols(); ++j) out << (j ? "," : "") << samples(i, j);
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "failed writing dataset CSV");
}

Matrix read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "missing CSV header");
  long dim = 1 + static_cast<long>(std::count(line.begin(), line.end(), ','));
  {
    std::stringstream header(line);
    std::string cell;
    long j = 0;
    while (std::getline(header, cell, ',')) {
      if (cell != "x" + std::to_string(++j)) throw Error(ErrorKind::ParseError, "header must be x1,...,xD");
    }
  }
  std::vector<double> values;
  long rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    long j = 0;
    while (std::getline(row, cell, ',')) {
      try {
        std::size_t pos = 0;
        values.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::logic_error&) {
        throw Error(ErrorKind::ParseError, "bad number '" + cell + "' in row " + std::to_string(rows + 1));
      }
      ++j;
    }
    if (j != dim) throw Error(ErrorKind::ParseError, "row " + std::to_string(rows + 1) + " has wrong width");
    ++rows;
  }
  if (rows == 0) throw Error(ErrorKind::EmptyDataset, "CSV has no samples");
  Matrix samples(rows, dim);
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < dim; ++j) samples(i, j) = values[static_cast<std::size_t>(i * dim + j)];
  }
  return samples;
}

void write_density_metadata(std::ostream& out, const DensitySpec& spec) {
  nlohmann::ordered_json j;
  j["family"] = spec.family;
  j["dim"] = spec.dim;
  j["seed"] = spec.seed;
  if (spec.family == "grid-mrf") {
    j["K"] = spec.side;
    j["precision_diag"] = spec.diag;
    j["precision_coupling"] = spec.coupling;
  }
  if (spec.family == "gauss-mixture") {
    j["M"] = spec.components;
    std::vector<std::vector<double>> means;
    for (Eigen::Index k = 0; k < spec.means.rows(); ++k) {
      means.emplace_back();
      for (Eigen::Index c = 0; c < spec.means.cols(); ++c) means.back().push_back(spec.means(k, c));
    }
    j["means"] = means;
  }
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::IoError, "failed writing metadata");
}

DensitySpec read_density_metadata(std::istream& in) {
  try {
    const auto j = nlohmann::json::parse(in);
    DensitySpec spec;
    spec.family = j.at("family").get<std::string>();
    spec.dim = j.at("dim").get<int>();
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.side = j.value("K", 0);
    spec.diag = j.value("precision_diag", 1.0);
    spec.coupling = j.value("precision_coupling", -0.2);
    spec.components = j.value("M", 0);
    if (j.contains("means")) {
      const auto means = j.at("means").get<std::vector<std::vector<double>>>();
      spec.means.resize(static_cast<Eigen::Index>(means.size()), spec.dim);
      for (std::size_t k = 0; k < means.size(); ++k) {
        if (static_cast<int>(means[k].size()) != spec.dim) {
          throw Error(ErrorKind::ParseError, "mixture mean has wrong length");
        }
        for (int c = 0; c < spec.dim; ++c) spec.means(static_cast<Eigen::Index>(k), c) = means[k][static_cast<std::size_t>(c)];
      }
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

}  // namespace wsdiff
