#pragma once

#include "rqlab/agent_state.hpp"
#include "rqlab/pomdp.hpp"
#include "rqlab/types.hpp"

#include <Eigen/SparseCore>

#include <string>
#include <vector>

namespace rqlab {

/// Dense encoding of X = S x Y x Z x A.
struct JointSpace {
  int n_states = 0, n_obs = 0, n_z = 0, n_actions = 0;

  long size() const { return static_cast<long>(n_states) * n_obs * n_z * n_actions; }
  long index(int s, int y, int z, int a) const {
    return ((static_cast<long>(s) * n_obs + y) * n_z + z) * n_actions + a;
  }
  struct Coords {
    int s, y, z, a;
  };
  Coords decode(long x) const {
    Coords c{};
    c.a = static_cast<int>(x % n_actions);
    x /= n_actions;
    c.z = static_cast<int>(x % n_z);
    x /= n_z;
    c.y = static_cast<int>(x % n_obs);
    c.s = static_cast<int>(x / n_obs);
    return c;
  }
};

using SparseKernel = Eigen::SparseMatrix<double, Eigen::RowMajor, long>;

/// Transition kernel of the chain (S_t, Y_t, Z_t, A_t) under a fixed
/// exploration policy over agent states.
struct JointKernel {
  JointSpace space;
  SparseKernel kernel;
  AgentPolicy explore_policy;
};

inline constexpr long kDefaultKernelCap = 50'000'000;  // nonzeros
inline constexpr long kDenseSolveLimit = 4096;

JointKernel build_joint_kernel(const Pomdp& p, const AgentStateMachine& m,
                               const AgentPolicy& explore, long nonzero_cap = kDefaultKernelCap);

/// Factored kernel entry recomputed from the model (no matrix lookup).
double joint_kernel_entry(const Pomdp& p, const AgentStateMachine& m, const AgentPolicy& explore,
                          const JointSpace& space, long from, long to);

struct StationaryOptions {
  double tol = 1e-12;
  long max_iters = 1'000'000;
  bool direct_fallback = true;
  int uniqueness_starts = 5;
  double uniqueness_tol = 1e-8;
  double positivity_threshold = 1e-12;
  std::uint64_t seed = 0x5eed;
};

/// Stationary distribution xi of the joint chain and the induced model.
struct StationaryModel {
  JointSpace space;
  Vector xi;
  double convergence_residual = 0.0;
  long iterations = 0;
  bool solved_directly = false;
  bool unique = false;
  bool positivity_ok = false;
  double min_mass = 0.0;
  long support_size = 0;
  std::vector<std::string> notes;

  // Induced model (filled by induced_model()).
  Matrix xi_za;           // xi(z, a)
  Matrix posterior;       // xi(s | z, a): rows s, cols z * |A| + a (completed)
  Mask reachable;         // xi(z, a) > threshold
  Matrix r_xi;            // |Z| x |A|
  Matrix p_xi;            // rows z * |A| + a, cols z'
  Matrix obs_predictor;   // rows z * |A| + a, cols y'  (xi-induced next-observation law)

  long row(int z, int a) const { return static_cast<long>(z) * space.n_actions + a; }
  int n_z() const { return space.n_z; }
  int n_actions() const { return space.n_actions; }
  auto state_posterior(int z, int a) const { return posterior.col(row(z, a)); }
};

/// Power iteration with optional direct-solve fallback. Uniqueness is judged
/// from several random starts (and a rank test when solved directly).
/// Throws NonConvergence carrying the last residual when no method converges.
StationaryModel stationary_distribution(const JointKernel& k, const StationaryOptions& opts = {});

/// Fills r_xi, P_xi and the xi-induced observation predictor.
///
/// Pairs with xi(z, a) <= threshold are marked unreachable. Their rows are
/// completed with xi(s | z) when xi(z) > threshold and with the stationary
/// state marginal otherwise, so that the agent-state Bellman equation is
/// defined on all of Z x A.
void induced_model(StationaryModel& sm, const Pomdp& p, const AgentStateMachine& m,
                   double threshold = 1e-12);

/// build_joint_kernel + stationary_distribution + induced_model.
StationaryModel analyze(const Pomdp& p, const AgentStateMachine& m, const AgentPolicy& explore,
                        const StationaryOptions& opts = {});

}  // namespace rqlab
