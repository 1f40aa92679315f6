#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rqlab {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Probability vector over latent states.
using Belief = Vector;

/// Action index used as the "previous action" when the first observation is
/// folded into the agent state.
inline constexpr int kNullAction = 0;

/// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double x, double slack = 0.0) const {
    return x >= lo - slack && x <= hi + slack;
  }
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configured size cap (states, histories, kernel entries) was exceeded.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// A belief update was requested for an observation of zero probability.
class UnreachableHistory : public Error {
 public:
  using Error::Error;
};

/// The requested functional or certificate is not available for an IPM kind.
class Unsupported : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Index of the lowest maximiser. Ties are resolved by exact equality.
template <typename Derived>
int argmax_lowest(const Eigen::DenseBase<Derived>& values) {
  int best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values(i) > values(best)) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace rqlab
