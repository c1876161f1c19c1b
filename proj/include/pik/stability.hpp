#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pik/model.hpp"
#include "pik/rng.hpp"

namespace pik {

/// Dense matrix representation of the two-step quadratic influence operator
/// on block-diagonal |T| x (q x q) matrices, stacked column-major per type.
/// Its spectral radius decides stability of the trivial BP fixed point.
struct LOperator {
  int q = 0;
  int num_types = 0;
  Matrix mat;  // (|T| q^2) x (|T| q^2)

  int dim() const { return num_types * q * q; }
};

/// Assembles the influence operator: block (tau, tau') accumulates
/// rate(theta, out | tau) * kron(adj^T, centered) over factor types theta
/// and slot pairs out != in with matching classes.
LOperator build_L(const ObservationModel& m);

/// Applies the operator to a stacked block-diagonal matrix.
Vector apply_L(const LOperator& L, const Vector& x);

/// Spectral radius estimate by renormalized power steps seeded at the
/// identity; returns 0 when L(I) vanishes.
Real spectral_radius(const LOperator& L, int iters = 200);

/// Distinguisher threshold (lambda + sqrt(lambda)) / 2; throws
/// SubcriticalModel when lambda <= 1.
Real choose_kappa(Real lambda_l);

/// A sampled local-approximation tree: alternating variable / factor levels.
struct TreeSample {
  struct Node {
    bool is_factor = false;
    int type = 0;          // variable type or factor type
    int parent = -1;
    int slot = 0;          // factor node: parent's slot; variable node: own slot
    int depth = 0;         // bipartite depth from the root
    std::vector<int> children;
  };
  std::vector<Node> nodes;  // node 0 is the root variable
  int levels = 0;           // variable levels below the root
};

constexpr std::size_t kTreeNodeCap = 10'000'000;

/// Depth-(2 level + 1) Galton-Watson tree: independent Poisson factor
/// counts per (factor type, slot) at each variable node; throws
/// TreeExplosion past the node cap.
TreeSample sample_tree(const ObservationModel& m, int levels, Rng& rng);

struct AmplificationResult {
  Real alpha = 0;         // Monte Carlo mean of the path-sum trace
  Real alpha_root = 0;    // alpha^{1/levels}
  Real std_err = 0;       // standard error of alpha
  Real root_std_err = 0;  // first-order standard error of alpha_root
  std::uint64_t trials = 0;
};

/// Monte Carlo estimate of the depth-`levels` amplification factor
/// Tr(L^levels(I)).  Uses explicit trees (bottom-up) when the expected work
/// is small, otherwise an unbiased root-to-leaf path estimator with the
/// same expectation.  Trials run on a worker pool with split RNG streams;
/// the reduction is order-deterministic.
AmplificationResult amplification_mc(const ObservationModel& m, int levels,
                                     std::uint64_t trials, std::uint64_t seed,
                                     int workers = 0);

/// Tree-mode estimate for a single sampled tree (exposed for tests).
Real tree_path_sum_trace(const ObservationModel& m, const TreeSample& tree);

/// Bisection for the parameter where the spectral radius crosses 1.
/// Caller asserts monotonicity; throws BracketError unless
/// lambda(lo) < 1 < lambda(hi).
Real threshold_scan(const std::function<ObservationModel(Real)>& family,
                    Real lo, Real hi, Real tol = 1e-6);

}  // namespace pik
