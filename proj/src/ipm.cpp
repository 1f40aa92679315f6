#include "rqlab/ipm.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rqlab {

std::string to_string(IpmKind kind) {
  switch (kind) {
    case IpmKind::TotalVariation: return "tv";
    case IpmKind::Wasserstein: return "wasserstein";
    case IpmKind::Mmd: return "mmd";
  }
  return "?";
}

IpmKind parse_ipm_kind(const std::string& name) {
  if (name == "tv") return IpmKind::TotalVariation;
  if (name == "wasserstein" || name == "was") return IpmKind::Wasserstein;
  if (name == "mmd") return IpmKind::Mmd;
  throw Error("unknown IPM kind '" + name + "' (expected tv, wasserstein or mmd)");
}

Matrix discrete_metric(int n) {
  return Matrix::Ones(n, n) - Matrix::Identity(n, n);
}

Matrix line_metric(int n) {
  Matrix d(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) d(i, j) = std::abs(i - j);
  }
  return d;
}

Matrix distance_kernel(int n) {
  Matrix k = Matrix::Constant(n, n, 2.0 - std::sqrt(2.0));
  k.diagonal().setConstant(2.0);
  return k;
}

void require_metric(const Matrix& d, double tol) {
  const Eigen::Index n = d.rows();
  if (d.cols() != n) throw Error("metric must be square");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(d(i, i)) > tol) throw Error("metric has nonzero diagonal at " + std::to_string(i));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::isfinite(d(i, j)) || d(i, j) < -tol) throw Error("metric entry is negative or not finite");
      if (std::abs(d(i, j) - d(j, i)) > tol) throw Error("metric is not symmetric");
      for (Eigen::Index k = 0; k < n; ++k) {
        if (d(i, k) > d(i, j) + d(j, k) + tol) {
          std::ostringstream os;
          os << "metric breaks the triangle inequality at (" << i << ", " << j << ", " << k << ")";
          throw Error(os.str());
        }
      }
    }
  }
}

IpmSpec IpmSpec::total_variation(int n) {
  IpmSpec s;
  s.kind = IpmKind::TotalVariation;
  s.n = n;
  return s;
}

IpmSpec IpmSpec::wasserstein(const Matrix& metric) {
  require_metric(metric);
  IpmSpec s;
  s.kind = IpmKind::Wasserstein;
  s.n = static_cast<int>(metric.rows());
  s.metric = metric;
  return s;
}

IpmSpec IpmSpec::wasserstein_discrete(int n) { return wasserstein(discrete_metric(n)); }

IpmSpec IpmSpec::mmd(const Matrix& kernel) {
  if (kernel.rows() != kernel.cols()) throw Error("kernel must be square");
  if ((kernel - kernel.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw Error("kernel is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(kernel, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-9) throw Error("kernel is not positive semidefinite");
  IpmSpec s;
  s.kind = IpmKind::Mmd;
  s.n = static_cast<int>(kernel.rows());
  s.kernel = kernel;
  return s;
}

IpmSpec IpmSpec::mmd(int n) { return mmd(distance_kernel(n)); }

double IpmSpec::diameter() const {
  switch (kind) {
    case IpmKind::TotalVariation: return 1.0;
    case IpmKind::Wasserstein: return metric.size() ? metric.maxCoeff() : 0.0;
    case IpmKind::Mmd: {
      // max over point masses suffices: the squared distance is convex.
      double best = 0.0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          best = std::max(best, kernel(i, i) - 2 * kernel(i, j) + kernel(j, j));
        }
      }
      return std::sqrt(best);
    }
  }
  return 0.0;
}

namespace {

void require_distribution(const Vector& p, int n, const char* name) {
  if (p.size() != n) throw Error(std::string(name) + " has the wrong length");
  if ((p.array() < -1e-12).any()) throw Error(std::string(name) + " has negative mass");
  if (std::abs(p.sum() - 1.0) > 1e-9) {
    std::ostringstream os;
    os << name << " sums to " << p.sum() << ", not 1";
    throw Error(os.str());
  }
}

}  // namespace

double total_variation(const Vector& mu, const Vector& nu) { return 0.5 * (mu - nu).cwiseAbs().sum(); }

// Successive shortest paths on the bipartite graph between the positive and
// negative parts of mu - nu. For a metric cost, mass common to mu and nu stays
// in place at zero cost, so only the signed difference has to move.
double wasserstein(const Matrix& metric, const Vector& mu, const Vector& nu) {
  const Vector diff = mu - nu;
  std::vector<int> src, dst;
  std::vector<double> supply, demand;
  for (Eigen::Index i = 0; i < diff.size(); ++i) {
    if (diff(i) > 0) {
      src.push_back(static_cast<int>(i));
      supply.push_back(diff(i));
    } else if (diff(i) < 0) {
      dst.push_back(static_cast<int>(i));
      demand.push_back(-diff(i));
    }
  }
  const int m = static_cast<int>(src.size()), k = static_cast<int>(dst.size());
  if (m == 0 || k == 0) return 0.0;

  Matrix cost(m, k);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < k; ++j) cost(i, j) = metric(src[i], dst[j]);
  }
  Matrix flow = Matrix::Zero(m, k);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr double kEps = 1e-15;

  // Node ids: sources 0..m-1, sinks m..m+k-1. Bellman-Ford from every source
  // with spare supply (the residual graph has negative backward arcs).
  const long max_rounds = 100L * (m + k) * (m + k) + 100;
  for (long round = 0; round < max_rounds; ++round) {
    std::vector<double> dist(m + k, kInf);
    std::vector<int> pred(m + k, -1);
    for (int i = 0; i < m; ++i) {
      if (supply[i] > kEps) dist[i] = 0.0;
    }
    for (int pass = 0; pass < m + k; ++pass) {
      bool changed = false;
      for (int i = 0; i < m; ++i) {
        if (dist[i] == kInf) continue;
        for (int j = 0; j < k; ++j) {
          const double d = dist[i] + cost(i, j);
          if (d < dist[m + j] - 1e-15) {
            dist[m + j] = d;
            pred[m + j] = i;
            changed = true;
          }
        }
      }
      for (int j = 0; j < k; ++j) {
        if (dist[m + j] == kInf) continue;
        for (int i = 0; i < m; ++i) {
          if (flow(i, j) <= kEps) continue;
          const double d = dist[m + j] - cost(i, j);
          if (d < dist[i] - 1e-15) {
            dist[i] = d;
            pred[i] = m + j;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    int best = -1;
    for (int j = 0; j < k; ++j) {
      if (demand[j] > kEps && dist[m + j] < kInf && (best < 0 || dist[m + j] < dist[m + best])) best = j;
    }
    if (best < 0) break;

    // Bottleneck along the path back to a source with spare supply.
    double amount = demand[best];
    int node = m + best;
    while (true) {
      const int prev = pred[node];
      if (node >= m) {
        node = prev;
      } else {
        if (prev < 0) break;
        amount = std::min(amount, flow(node, prev - m));
        node = prev;
      }
    }
    amount = std::min(amount, supply[node]);
    node = m + best;
    while (true) {
      const int prev = pred[node];
      if (node >= m) {
        flow(prev, node - m) += amount;
        node = prev;
      } else {
        if (prev < 0) break;
        flow(node, prev - m) -= amount;
        node = prev;
      }
    }
    supply[node] -= amount;
    demand[best] -= amount;
  }
  return cost.cwiseProduct(flow).sum();
}

double mmd_squared(const Matrix& kernel, const Vector& mu, const Vector& nu) {
  const Vector d = mu - nu;
  return d.dot(kernel * d);
}

double ipm_distance(const IpmSpec& spec, const Vector& mu, const Vector& nu) {
  require_distribution(mu, spec.n, "mu");
  require_distribution(nu, spec.n, "nu");
  switch (spec.kind) {
    case IpmKind::TotalVariation: return total_variation(mu, nu);
    case IpmKind::Wasserstein: return wasserstein(spec.metric, mu, nu);
    case IpmKind::Mmd: return std::sqrt(std::max(0.0, mmd_squared(spec.kernel, mu, nu)));
  }
  return 0.0;
}

double span(const Vector& f) { return f.size() ? f.maxCoeff() - f.minCoeff() : 0.0; }

double lipschitz(const Matrix& metric, const Vector& f) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    for (Eigen::Index j = i + 1; j < f.size(); ++j) {
      if (!(metric(i, j) > 0.0)) throw Error("Lipschitz constant needs a positive off-diagonal metric");
      best = std::max(best, std::abs(f(i) - f(j)) / metric(i, j));
    }
  }
  return best;
}

double rho(const IpmSpec& spec, const Vector& f) {
  if (f.size() != spec.n) throw Error("function has the wrong length for this IPM");
  switch (spec.kind) {
    case IpmKind::TotalVariation: return span(f);
    case IpmKind::Wasserstein: return lipschitz(spec.metric, f);
    case IpmKind::Mmd: break;
  }
  throw Unsupported("the Minkowski functional of the MMD class (an RKHS norm) is not computed");
}

}  // namespace rqlab
