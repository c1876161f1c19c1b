#include "pik/stability.hpp"

#include <cmath>
#include <deque>

#include "pik/threads.hpp"

namespace pik {

LOperator build_L(const ObservationModel& m) {
  LOperator L;
  L.q = m.q;
  L.num_types = m.num_types();
  const int q = m.q, blk = q * q;
  L.mat = Matrix::Zero(L.dim(), L.dim());
  for (int i = 0; i < m.num_factors(); ++i) {
    const auto& f = m.factors[i];
    if (f.arity < 2 || m.derived.mean_density[i] <= 0) continue;
    for (int out = 0; out < f.arity; ++out) {
      const int tau = f.cls[out];
      const Real rate = varfac_rate(m, i, out, tau);
      for (int in = 0; in < f.arity; ++in) {
        if (in == out) continue;
        const int tau_in = f.cls[in];
        const Matrix& t = centered_transition(m, i, out, in);
        const Matrix adj = centered_transition_adjoint(m, i, out, in);
        // vec(T M A) = kron(A^T, T) vec(M), column-major.
        const Matrix at = adj.transpose();
        for (int c1 = 0; c1 < q; ++c1)
          for (int c2 = 0; c2 < q; ++c2) {
            if (at(c1, c2) == 0) continue;
            L.mat.block(tau * blk + c1 * q, tau_in * blk + c2 * q, q, q) +=
                rate * at(c1, c2) * t;
          }
      }
    }
  }
  return L;
}

Vector apply_L(const LOperator& L, const Vector& x) { return L.mat * x; }

Real spectral_radius(const LOperator& L, int iters) {
  const int q = L.q;
  Vector z = Vector::Zero(L.dim());
  for (int t = 0; t < L.num_types; ++t)
    for (int c = 0; c < q; ++c) z[t * q * q + c * q + c] = 1.0;  // identity blocks
  // Renormalized power steps; the growth factor settles geometrically, so
  // average the log over the tail rather than the whole run.
  const int tail = std::max(16, iters / 4);
  Real tail_sum = 0;
  int tail_count = 0;
  for (int k = 1; k <= iters; ++k) {
    z = L.mat * z;
    Real f = z.norm();
    if (f == 0) return 0;
    z /= f;
    if (k > iters - tail) {
      tail_sum += std::log(f);
      ++tail_count;
    }
  }
  return std::exp(tail_sum / tail_count);
}

Real choose_kappa(Real lambda_l) {
  if (!(lambda_l > 1))
    throw SubcriticalModel("choose_kappa: lambda_L <= 1 (got " +
                           std::to_string(lambda_l) + ")");
  return (lambda_l + std::sqrt(lambda_l)) / 2;
}

TreeSample sample_tree(const ObservationModel& m, int levels, Rng& rng) {
  TreeSample tree;
  tree.levels = levels;
  auto sample_type = [&](Real u) {
    Real acc = 0;
    for (int t = 0; t < m.num_types(); ++t) {
      acc += m.type_dist[t];
      if (u < acc) return t;
    }
    return m.num_types() - 1;
  };
  tree.nodes.push_back({false, sample_type(rng.uniform()), -1, 0, 0, {}});
  std::deque<int> frontier{0};
  while (!frontier.empty()) {
    int vi = frontier.front();
    frontier.pop_front();
    const int tau = tree.nodes[(std::size_t)vi].type;
    const int depth = tree.nodes[(std::size_t)vi].depth;
    if (depth >= 2 * levels + 1) continue;
    for (int i = 0; i < m.num_factors(); ++i) {
      const auto& f = m.factors[i];
      for (int j = 0; j < f.arity; ++j) {
        Real rate = varfac_rate(m, i, j, tau);
        if (rate <= 0) continue;
        std::uint64_t count = rng.poisson(rate);
        for (std::uint64_t k = 0; k < count; ++k) {
          if (tree.nodes.size() >= kTreeNodeCap)
            throw TreeExplosion("tree node cap exceeded");
          int fi = (int)tree.nodes.size();
          tree.nodes.push_back({true, i, vi, j, depth + 1, {}});
          tree.nodes[(std::size_t)vi].children.push_back(fi);
          if (depth + 1 >= 2 * levels + 1) continue;  // childless leaf factors
          for (int s = 0; s < f.arity; ++s) {
            if (s == j) continue;
            if (tree.nodes.size() >= kTreeNodeCap)
              throw TreeExplosion("tree node cap exceeded");
            int ci = (int)tree.nodes.size();
            tree.nodes.push_back({false, f.cls[s], fi, s, depth + 2, {}});
            tree.nodes[(std::size_t)fi].children.push_back(ci);
            frontier.push_back(ci);
          }
        }
      }
    }
  }
  return tree;
}

Real tree_path_sum_trace(const ObservationModel& m, const TreeSample& tree) {
  // Bottom-up over variable nodes: M_v = sum over grandchildren u of
  // T M_u T^* with T the step matrix from v to u, seeded with the identity
  // at the deepest variable level.  The root trace is one sample of
  // Tr(L^levels(I)).
  const int q = m.q;
  const int leaf_depth = 2 * tree.levels;
  std::vector<Matrix> acc(tree.nodes.size());
  for (int vi = (int)tree.nodes.size() - 1; vi >= 0; --vi) {
    const auto& node = tree.nodes[(std::size_t)vi];
    if (node.is_factor) continue;
    if (node.depth == leaf_depth) {
      acc[(std::size_t)vi] = Matrix::Identity(q, q);
      continue;
    }
    Matrix sum = Matrix::Zero(q, q);
    for (int fi : node.children) {
      const auto& fnode = tree.nodes[(std::size_t)fi];
      for (int ci : fnode.children) {
        const auto& cnode = tree.nodes[(std::size_t)ci];
        const Matrix& t =
            centered_transition(m, fnode.type, fnode.slot, cnode.slot);
        const Matrix adj =
            centered_transition_adjoint(m, fnode.type, fnode.slot, cnode.slot);
        sum += t * acc[(std::size_t)ci] * adj;
      }
    }
    acc[(std::size_t)vi] = std::move(sum);
  }
  return acc[0].trace();
}

namespace {

// Expected branch count per variable level, used to pick the estimator.
Real max_branching(const ObservationModel& m) {
  Real best = 0;
  for (int tau = 0; tau < m.num_types(); ++tau) {
    Real b = 0;
    for (int i = 0; i < m.num_factors(); ++i)
      for (int j = 0; j < m.factors[i].arity; ++j)
        b += varfac_rate(m, i, j, tau) * (m.factors[i].arity - 1);
    best = std::max(best, b);
  }
  return best;
}

// One unbiased sample of Tr(L^levels(I)) by sampling a single root-to-leaf
// path type with probability proportional to its branch rates and weighting
// by the product of total branch rates (many-to-one).
Real spine_sample(const ObservationModel& m, int levels, Rng& rng) {
  const int q = m.q;
  if (levels == 0) return (Real)q;
  // root type
  Real u = rng.uniform();
  int tau = m.num_types() - 1;
  {
    Real acc = 0;
    for (int t = 0; t < m.num_types(); ++t) {
      acc += m.type_dist[t];
      if (u < acc) {
        tau = t;
        break;
      }
    }
  }
  const int tau0 = tau;
  Matrix x = Matrix::Identity(q, q);
  Real weight = 1.0;
  for (int lvl = 0; lvl < levels; ++lvl) {
    Real total = 0;
    for (int i = 0; i < m.num_factors(); ++i)
      for (int j = 0; j < m.factors[i].arity; ++j)
        total += varfac_rate(m, i, j, tau) * (m.factors[i].arity - 1);
    if (total <= 0) return 0.0;  // no paths of this depth
    Real pick = rng.uniform() * total;
    int fi = -1, slot = -1;
    Real acc = 0;
    for (int i = 0; i < m.num_factors() && fi < 0; ++i)
      for (int j = 0; j < m.factors[i].arity; ++j) {
        acc += varfac_rate(m, i, j, tau) * (m.factors[i].arity - 1);
        if (pick < acc) {
          fi = i;
          slot = j;
          break;
        }
      }
    if (fi < 0) {
      fi = m.num_factors() - 1;
      slot = m.factors[(std::size_t)fi].arity - 1;
    }
    const auto& f = m.factors[(std::size_t)fi];
    int child = (int)rng.uniform_int((std::uint64_t)(f.arity - 1));
    if (child >= slot) ++child;
    x = x * centered_transition(m, fi, slot, child);
    weight *= total;
    tau = f.cls[(std::size_t)child];
  }
  // Tr(X X^*) with X^* = D_leaf X^T pinv(D_root).
  const Matrix& d_leaf = m.derived.prior_diag[(std::size_t)tau];
  const Matrix& d_root_pinv = m.derived.prior_diag_pinv[(std::size_t)tau0];
  return weight * (x * d_leaf * x.transpose() * d_root_pinv).trace();
}

}  // namespace

AmplificationResult amplification_mc(const ObservationModel& m, int levels,
                                     std::uint64_t trials, std::uint64_t seed,
                                     int workers) {
  AmplificationResult res;
  res.trials = trials;
  if (trials == 0) return res;
  Real branching = max_branching(m);
  Real expected_tree = 1;
  for (int l = 0; l < levels && expected_tree < 1e18; ++l)
    expected_tree = 1 + branching * expected_tree;
  const bool tree_mode = expected_tree * (Real)trials <= 2e7;

  std::vector<Real> samples(trials);
  parallel_for(
      trials,
      [&](std::size_t k) {
        Rng rng = Rng::stream(seed, (std::uint64_t)k);
        if (tree_mode) {
          TreeSample tree = sample_tree(m, levels, rng);
          samples[k] = tree_path_sum_trace(m, tree);
        } else {
          samples[k] = spine_sample(m, levels, rng);
        }
      },
      workers);

  KahanSum sum;
  for (Real s : samples) sum.add(s);
  res.alpha = sum.sum / (Real)trials;
  KahanSum sq;
  for (Real s : samples) sq.add((s - res.alpha) * (s - res.alpha));
  Real var = trials > 1 ? sq.sum / (Real)(trials - 1) : 0.0;
  res.std_err = std::sqrt(var / (Real)trials);
  if (levels > 0 && res.alpha > 0) {
    res.alpha_root = std::pow(res.alpha, 1.0 / levels);
    res.root_std_err =
        res.alpha_root / (levels * res.alpha) * res.std_err;
  } else {
    res.alpha_root = levels == 0 ? res.alpha : 0.0;
    res.root_std_err = levels == 0 ? res.std_err : 0.0;
  }
  return res;
}

Real threshold_scan(const std::function<ObservationModel(Real)>& family,
                    Real lo, Real hi, Real tol) {
  auto lambda_at = [&](Real p) { return spectral_radius(build_L(family(p))); };
  Real flo = lambda_at(lo), fhi = lambda_at(hi);
  if (!(flo < 1 && 1 < fhi))
    throw BracketError("threshold_scan: endpoints do not straddle 1 (lambda(" +
                       std::to_string(lo) + ")=" + std::to_string(flo) +
                       ", lambda(" + std::to_string(hi) + ")=" +
                       std::to_string(fhi) + ")");
  Real a = lo, b = hi;
  for (int it = 0; it < 200; ++it) {
    Real mid = (a + b) / 2;
    Real f = lambda_at(mid);
    if (std::abs(f - 1) <= tol) return mid;
    (f < 1 ? a : b) = mid;
  }
  return (a + b) / 2;
}

}  // namespace pik
