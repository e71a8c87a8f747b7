#pragma once

#include <complex>
#include <string>
#include <vector>

#include "spectest/error.hpp"

namespace spectest {

/// Real polynomial c_0 + c_1 x + ... + c_d x^d, evaluable on real or complex
/// arguments.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coeffs) : c_(std::move(coeffs)) {
    if (c_.empty()) c_.push_back(0.0);
  }

  static Polynomial monomial(int degree, double scale = 1.0) {
    require(degree >= 0, ErrorCode::InvalidModel, "negative degree");
    std::vector<double> c(degree + 1, 0.0);
    c[degree] = scale;
    return Polynomial(std::move(c));
  }
  static Polynomial constant(double v) { return Polynomial({v}); }

  /// Parses "x^k", "x", or a constant.
  static Polynomial parse(const std::string& text) {
    if (text == "x") return monomial(1);
    if (text.rfind("x^", 0) == 0) {
      try {
        return monomial(std::stoi(text.substr(2)));
      } catch (const std::logic_error&) {
      }
    }
    try {
      std::size_t pos = 0;
      const double v = std::stod(text, &pos);
      if (pos == text.size()) return constant(v);
    } catch (const std::logic_error&) {
    }
    throw Error(ErrorCode::ParseError, "unsupported test function '" + text + "' (use x, x^k or a constant)");
  }

  int degree() const noexcept { return static_cast<int>(c_.size()) - 1; }
  const std::vector<double>& coefficients() const noexcept { return c_; }

  template <typename T>
  T operator()(T x) const {
    T acc = T(c_.back());
    for (int k = static_cast<int>(c_.size()) - 2; k >= 0; --k) acc = acc * x + T(c_[k]);
    return acc;
  }

  Polynomial derivative() const {
    if (c_.size() == 1) return constant(0.0);
    std::vector<double> d(c_.size() - 1);
    for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = static_cast<double>(k) * c_[k];
    return Polynomial(std::move(d));
  }

  std::string to_string() const {
    std::string s;
    for (std::size_t k = 0; k < c_.size(); ++k) {
      if (c_[k] == 0.0 && c_.size() > 1) continue;
      if (!s.empty()) s += " + ";
      s += std::to_string(c_[k]);
      if (k == 1) s += "*x";
      if (k > 1) s += "*x^" + std::to_string(k);
    }
    return s.empty() ? "0" : s;
  }

 private:
  std::vector<double> c_{0.0};
};

}  // namespace spectest
