#pragma once

#include <complex>
#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "gfock/error.hpp"

namespace gfock {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

/// Inclusive integer range [n_min, n_max] of basis labels kept after truncation.
/// Label n lives at row/column n - n_min.
class Window {
 public:
  Window() = default;
  Window(long n_min, long n_max) : n_min_(n_min), n_max_(n_max) {
    if (n_min > n_max) {
      throw Error(ErrorKind::InvalidArgument,
                  "window [" + std::to_string(n_min) + ", " + std::to_string(n_max) + "] is empty");
    }
  }

  long n_min() const noexcept { return n_min_; }
  long n_max() const noexcept { return n_max_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(n_max_ - n_min_ + 1); }
  Eigen::Index dim() const noexcept { return static_cast<Eigen::Index>(size()); }

  bool contains(long n) const noexcept { return n >= n_min_ && n <= n_max_; }

  Eigen::Index index(long n) const {
    if (!contains(n)) {
      throw Error(ErrorKind::OutOfWindow, "label " + std::to_string(n) + " outside " + str());
    }
    return static_cast<Eigen::Index>(n - n_min_);
  }

  long label(Eigen::Index i) const noexcept { return n_min_ + static_cast<long>(i); }

  std::string str() const {
    return "[" + std::to_string(n_min_) + ", " + std::to_string(n_max_) + "]";
  }

  friend bool operator==(const Window&, const Window&) = default;

 private:
  long n_min_ = 0;
  long n_max_ = 0;
};

inline Vector unit_vector(const Window& w, long n) {
  Vector e = Vector::Zero(w.dim());
  e(w.index(n)) = 1.0;
  return e;
}

}  // namespace gfock
