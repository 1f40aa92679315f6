#pragma once

#include "rqlab/types.hpp"

#include <string>

namespace rqlab {

enum class IpmKind { TotalVariation, Wasserstein, Mmd };

std::string to_string(IpmKind kind);
/// Accepts "tv", "wasserstein" / "was", "mmd".
IpmKind parse_ipm_kind(const std::string& name);

/// An integral probability metric on a finite space of `size()` points.
struct IpmSpec {
  IpmKind kind = IpmKind::TotalVariation;
  int n = 0;
  Matrix metric;  // Wasserstein ground metric
  Matrix kernel;  // MMD kernel

  static IpmSpec total_variation(int n);
  /// Throws Error unless `metric` satisfies the metric axioms within 1e-9.
  static IpmSpec wasserstein(const Matrix& metric);
  /// Discrete metric d(i, j) = 1{i != j}.
  static IpmSpec wasserstein_discrete(int n);
  /// Throws Error unless `kernel` is symmetric PSD (lambda_min >= -1e-9).
  static IpmSpec mmd(const Matrix& kernel);
  /// l2-distance-induced kernel on one-hot embeddings.
  static IpmSpec mmd(int n);

  int size() const { return n; }
  /// sup of the distance over pairs of distributions (TV: 1, Was: max d).
  double diameter() const;
};

/// k(x, x') = |e_x| + |e_x'| - |e_x - e_x'| on one-hot vectors: 2 on the
/// diagonal, 2 - sqrt(2) elsewhere.
Matrix distance_kernel(int n);

Matrix discrete_metric(int n);
Matrix line_metric(int n);

/// Throws Error naming the first broken axiom.
void require_metric(const Matrix& d, double tol = 1e-9);

double ipm_distance(const IpmSpec& spec, const Vector& mu, const Vector& nu);

double total_variation(const Vector& mu, const Vector& nu);
/// Exact optimal transport cost under `metric` (min-cost flow on the supports).
double wasserstein(const Matrix& metric, const Vector& mu, const Vector& nu);
/// (mu - nu)' K (mu - nu) before clamping.
double mmd_squared(const Matrix& kernel, const Vector& mu, const Vector& nu);

/// Minkowski functional of f for the class behind `spec`:
/// TV -> span(f), Wasserstein -> Lipschitz constant. Throws Unsupported for MMD.
double rho(const IpmSpec& spec, const Vector& f);

double span(const Vector& f);
double lipschitz(const Matrix& metric, const Vector& f);

}  // namespace rqlab
