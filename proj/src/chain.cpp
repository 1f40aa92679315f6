#include "rqlab/chain.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <random>

namespace rqlab {

JointKernel build_joint_kernel(const Pomdp& p, const AgentStateMachine& m,
                               const AgentPolicy& explore, long nonzero_cap) {
  if (m.n_obs != p.n_obs || m.n_actions != p.n_actions) {
    throw Error("agent-state machine and POMDP disagree on |Y| or |A|");
  }
  if (explore.rows() != m.n_z || explore.cols() != p.n_actions) {
    throw Error("exploration policy must be |Z| x |A|");
  }
  for (int z = 0; z < m.n_z; ++z) {
    if (std::abs(explore.row(z).sum() - 1.0) > kProbabilityTolerance || explore.row(z).minCoeff() < 0.0) {
      throw Error("exploration policy row " + std::to_string(z) + " is not a distribution");
    }
  }
  JointKernel k;
  k.space = {p.n_states, p.n_obs, m.n_z, p.n_actions};
  k.explore_policy = explore;
  const long n = k.space.size();

  std::vector<Eigen::Triplet<double, long>> triplets;
  for (long x = 0; x < n; ++x) {
    const auto c = k.space.decode(x);
    for (int s2 = 0; s2 < p.n_states; ++s2) {
      const double pt = p.transition[c.a](c.s, s2);
      if (pt == 0.0) continue;
      for (int y2 = 0; y2 < p.n_obs; ++y2) {
        const double po = p.observation[c.a](s2, y2);
        if (po == 0.0) continue;
        const int z2 = m.next(c.z, y2, c.a);
        for (int a2 = 0; a2 < p.n_actions; ++a2) {
          const double pa = explore(z2, a2);
          if (pa == 0.0) continue;
          triplets.emplace_back(x, k.space.index(s2, y2, z2, a2), pt * po * pa);
          if (static_cast<long>(triplets.size()) > nonzero_cap) {
            throw SizeError("joint kernel exceeds " + std::to_string(nonzero_cap) + " nonzeros");
          }
        }
      }
    }
  }
  k.kernel.resize(n, n);
  k.kernel.setFromTriplets(triplets.begin(), triplets.end());
  k.kernel.makeCompressed();
  return k;
}

double joint_kernel_entry(const Pomdp& p, const AgentStateMachine& m, const AgentPolicy& explore,
                          const JointSpace& space, long from, long to) {
  const auto c = space.decode(from);
  const auto d = space.decode(to);
  if (d.z != m.next(c.z, d.y, c.a)) return 0.0;
  return p.transition[c.a](c.s, d.s) * p.observation[c.a](d.s, d.y) * explore(d.z, d.a);
}

namespace {

using TransposedKernel = Eigen::SparseMatrix<double, Eigen::RowMajor, long>;

struct PowerResult {
  Vector x;
  double residual = 0.0;
  long iterations = 0;
  bool converged = false;
};

double residual_of(const TransposedKernel& kt, const Vector& x) {
  return (kt * x - x).cwiseAbs().maxCoeff();
}

PowerResult power_iterate(const TransposedKernel& kt, Vector x, double tol, long max_iters) {
  PowerResult out;
  double best = std::numeric_limits<double>::infinity();
  long last_improvement = 0;
  for (long it = 0; it < max_iters; ++it) {
    Vector next = kt * x;
    next /= next.sum();
    const double res = (next - x).cwiseAbs().maxCoeff();
    x.swap(next);
    out.iterations = it + 1;
    if (res <= tol) break;
    // A periodic or near-decomposable chain stalls; stop early and let the
    // caller fall back to a direct solve.
    if (res < 0.5 * best) {
      best = res;
      last_improvement = it;
    } else if (it - last_improvement > 20000) {
      break;
    }
  }
  out.residual = residual_of(kt, x);
  out.converged = out.residual <= tol;
  out.x = std::move(x);
  return out;
}

struct DirectResult {
  Vector x;
  bool ok = false;
  long nullity = -1;  // multiplicity of eigenvalue 1 (dense path only)
};

DirectResult direct_solve(const TransposedKernel& kt) {
  const long n = kt.rows();
  DirectResult out;
  if (n <= kDenseSolveLimit) {
    Matrix a = Matrix(kt) - Matrix::Identity(n, n);
    Eigen::FullPivLU<Matrix> rank_lu(a);
    rank_lu.setThreshold(1e-10);
    out.nullity = n - rank_lu.rank();
    a.row(n - 1).setOnes();
    Vector rhs = Vector::Zero(n);
    rhs(n - 1) = 1.0;
    out.x = a.fullPivLu().solve(rhs);
  } else {
    Eigen::SparseMatrix<double, Eigen::ColMajor, long> a = kt;
    Eigen::SparseMatrix<double, Eigen::ColMajor, long> eye(n, n);
    eye.setIdentity();
    a -= eye;
    for (long j = 0; j < n; ++j) a.coeffRef(n - 1, j) = 1.0;
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double, Eigen::ColMajor, long>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) return out;
    Vector rhs = Vector::Zero(n);
    rhs(n - 1) = 1.0;
    out.x = lu.solve(rhs);
  }
  if (!out.x.allFinite()) return out;
  // Rounding can leave tiny negative masses on structurally-zero states.
  if (out.x.minCoeff() < -1e-9) return out;
  out.x = out.x.cwiseMax(0.0);
  out.x /= out.x.sum();
  out.ok = true;
  return out;
}

}  // namespace

StationaryModel stationary_distribution(const JointKernel& k, const StationaryOptions& opts) {
  StationaryModel sm;
  sm.space = k.space;
  const long n = k.space.size();
  const TransposedKernel kt = k.kernel.transpose();

  PowerResult pr = power_iterate(kt, Vector::Constant(n, 1.0 / n), opts.tol, opts.max_iters);
  sm.iterations = pr.iterations;
  long nullity = -1;
  if (pr.converged) {
    sm.xi = std::move(pr.x);
    sm.convergence_residual = pr.residual;
  } else {
    if (!opts.direct_fallback) {
      throw NonConvergence("power iteration did not reach tolerance (periodic or reducible chain?)",
                           pr.residual);
    }
    DirectResult dr = direct_solve(kt);
    const double res = dr.ok ? residual_of(kt, dr.x) : std::numeric_limits<double>::infinity();
    if (!dr.ok || !(res <= std::max(opts.tol, 1e-10))) {
      throw NonConvergence("stationary distribution did not converge; last power-iteration residual " +
                               std::to_string(pr.residual),
                           pr.residual);
    }
    sm.xi = std::move(dr.x);
    sm.convergence_residual = res;
    sm.solved_directly = true;
    nullity = dr.nullity;
    sm.notes.push_back("power iteration stalled; solved (K^T - I) xi = 0 directly");
  }

  // Uniqueness: random starts must reach the same fixed point.
  bool unique = true;
  bool inconclusive = false;
  Rng rng(opts.seed);
  std::exponential_distribution<double> expo(1.0);
  for (int start = 0; start < opts.uniqueness_starts && unique; ++start) {
    Vector x0(n);
    for (long i = 0; i < n; ++i) x0(i) = expo(rng);
    x0 /= x0.sum();
    const PowerResult r = power_iterate(kt, x0, opts.tol, opts.max_iters);
    if (!r.converged) {
      inconclusive = true;
      break;
    }
    if ((r.x - sm.xi).cwiseAbs().maxCoeff() > opts.uniqueness_tol) unique = false;
  }
  if (inconclusive) {
    if (nullity < 0 && n <= kDenseSolveLimit) nullity = direct_solve(kt).nullity;
    unique = nullity == 1;
    sm.notes.push_back("uniqueness judged by the null-space dimension of (K^T - I)");
  }
  sm.unique = unique;
  if (!unique) sm.notes.push_back("stationary distribution is not unique (reducible chain); A2 violated");

  sm.min_mass = sm.xi.minCoeff();
  sm.support_size = (sm.xi.array() > opts.positivity_threshold).count();
  sm.positivity_ok = sm.min_mass > opts.positivity_threshold;
  if (!sm.positivity_ok) {
    sm.notes.push_back("A2 violated: analysis restricted to the recurrent support (" +
                       std::to_string(sm.support_size) + " of " + std::to_string(n) +
                       " joint states carry mass)");
  }
  return sm;
}

void induced_model(StationaryModel& sm, const Pomdp& p, const AgentStateMachine& m,
                   double threshold) {
  const JointSpace& sp = sm.space;
  const int S = sp.n_states, Y = sp.n_obs, Z = sp.n_z, A = sp.n_actions;
  Matrix xi_sza = Matrix::Zero(S, static_cast<Eigen::Index>(Z) * A);
  for (long x = 0; x < sp.size(); ++x) {
    const auto c = sp.decode(x);
    xi_sza(c.s, sm.row(c.z, c.a)) += sm.xi(x);
  }
  sm.xi_za.resize(Z, A);
  sm.reachable.resize(Z, A);
  for (int z = 0; z < Z; ++z) {
    for (int a = 0; a < A; ++a) {
      sm.xi_za(z, a) = xi_sza.col(sm.row(z, a)).sum();
      sm.reachable(z, a) = sm.xi_za(z, a) > threshold;
    }
  }
  const Vector xi_s = xi_sza.rowwise().sum();

  sm.posterior.resize(S, static_cast<Eigen::Index>(Z) * A);
  for (int z = 0; z < Z; ++z) {
    const double xi_z = sm.xi_za.row(z).sum();
    Vector given_z = Vector::Zero(S);
    for (int a = 0; a < A; ++a) given_z += xi_sza.col(sm.row(z, a));
    for (int a = 0; a < A; ++a) {
      if (sm.reachable(z, a)) {
        sm.posterior.col(sm.row(z, a)) = xi_sza.col(sm.row(z, a)) / sm.xi_za(z, a);
      } else if (xi_z > threshold) {
        sm.posterior.col(sm.row(z, a)) = given_z / xi_z;
      } else {
        sm.posterior.col(sm.row(z, a)) = xi_s / xi_s.sum();
      }
    }
  }

  sm.r_xi.resize(Z, A);
  sm.p_xi = Matrix::Zero(static_cast<Eigen::Index>(Z) * A, Z);
  sm.obs_predictor = Matrix::Zero(static_cast<Eigen::Index>(Z) * A, Y);
  for (int z = 0; z < Z; ++z) {
    for (int a = 0; a < A; ++a) {
      const long r = sm.row(z, a);
      const auto post = sm.posterior.col(r);
      sm.r_xi(z, a) = post.dot(p.reward.col(a));
      for (int s = 0; s < S; ++s) {
        if (post(s) == 0.0) continue;
        for (int s2 = 0; s2 < S; ++s2) {
          const double pt = post(s) * p.transition[a](s, s2);
          if (pt == 0.0) continue;
          for (int y2 = 0; y2 < Y; ++y2) {
            const double w = pt * p.observation[a](s2, y2);
            if (w == 0.0) continue;
            sm.p_xi(r, m.next(z, y2, a)) += w;
            sm.obs_predictor(r, y2) += w;
          }
        }
      }
    }
  }
  long unreachable = (!sm.reachable).count();
  if (unreachable > 0) {
    sm.notes.push_back(std::to_string(unreachable) +
                       " (z, a) pairs have zero stationary mass; they are excluded from norms and checks");
  }
}

StationaryModel analyze(const Pomdp& p, const AgentStateMachine& m, const AgentPolicy& explore,
                        const StationaryOptions& opts) {
  const JointKernel k = build_joint_kernel(p, m, explore);
  StationaryModel sm = stationary_distribution(k, opts);
  induced_model(sm, p, m, opts.positivity_threshold);
  return sm;
}

}  // namespace rqlab
