#pragma once

#include <complex>
#include <cstddef>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace spectest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using cplx = std::complex<double>;

/// Finitely supported probability distribution on the real line.
struct DiscreteDistribution {
  std::vector<double> atoms;
  std::vector<double> weights;

  std::size_t size() const noexcept { return atoms.size(); }

  double total_weight() const {
    return std::accumulate(weights.begin(), weights.end(), 0.0);
  }

  double mean() const {
    double s = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) s += weights[i] * atoms[i];
    return s;
  }

  static DiscreteDistribution point_mass(double atom) { return {{atom}, {1.0}}; }

  /// Uniform weights 1/size on the given atoms.
  static DiscreteDistribution uniform(std::vector<double> atoms) {
    const double w = 1.0 / static_cast<double>(atoms.size());
    std::vector<double> weights(atoms.size(), w);
    return {std::move(atoms), std::move(weights)};
  }
};

}  // namespace spectest
