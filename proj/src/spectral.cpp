#include "pik/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "pik/stability.hpp"

namespace pik {

HInnerProduct build_h_inner(const ObservationModel& m,
                            const FactorGraphInstance& g) {
  HInnerProduct hip;
  hip.n = g.n;
  hip.q = m.q;
  hip.hinv = Vector::Ones((Eigen::Index)g.n * m.q);
  for (int v = 0; v < g.n; ++v) {
    const Vector& prior = m.priors[(std::size_t)g.type_of[(std::size_t)v]];
    for (int c = 0; c < m.q; ++c)
      if (prior[c] > 0) hip.hinv[(Eigen::Index)v * m.q + c] = 1.0 / prior[c];
  }
  return hip;
}

Real h_inner(const HInnerProduct& hip, const Vector& x, const Vector& y) {
  if (x.size() != hip.hinv.size() || y.size() != hip.hinv.size())
    throw DimensionMismatch("h_inner: vector dimension != n*q");
  return x.cwiseProduct(hip.hinv).dot(y);
}

Real h_norm(const HInnerProduct& hip, const Vector& x) {
  return std::sqrt(std::max<Real>(0, h_inner(hip, x, x)));
}

namespace {

// Falling-factorial count of assignments of distinct variables to `slots`
// (type indices), with `used` variables of each type already taken.
Real completion_count(const std::vector<int>& slots,
                      std::vector<int>& used_scratch,
                      const std::vector<int>& type_counts) {
  Real count = 1;
  for (int t : slots) {
    count *= std::max(0, type_counts[(std::size_t)t] - used_scratch[(std::size_t)t]);
    ++used_scratch[(std::size_t)t];
  }
  for (int t : slots) --used_scratch[(std::size_t)t];
  return count;
}

constexpr Real kChainFloor = 1e-24;

}  // namespace

CenteredNbOperator::CenteredNbOperator(const ObservationModel& m,
                                       const FactorGraphInstance& g)
    : m_(&m), g_(&g), n_(g.n), q_(m.q) {
  by_type_.assign((std::size_t)m.num_types(), {});
  for (int v = 0; v < n_; ++v)
    by_type_[(std::size_t)g.type_of[(std::size_t)v]].push_back(v);
  std::vector<int> type_counts((std::size_t)m.num_types(), 0);
  for (int t = 0; t < m.num_types(); ++t)
    type_counts[(std::size_t)t] = (int)by_type_[(std::size_t)t].size();

  tables_.resize((std::size_t)m.num_factors());
  std::vector<int> used((std::size_t)m.num_types(), 0);
  for (int i = 0; i < m.num_factors(); ++i) {
    auto& tt = tables_[(std::size_t)i];
    const auto& f = m.factors[(std::size_t)i];
    tt.arity = f.arity;
    tt.p = m.derived.mean_density[(std::size_t)i] /
           std::pow((Real)n_, f.arity - 1);
    if (f.arity < 2 || m.derived.mean_density[(std::size_t)i] <= 0) continue;
    tt.tbar.assign((std::size_t)f.arity * f.arity, Matrix());
    for (int a = 0; a < f.arity; ++a)
      for (int b = 0; b < f.arity; ++b) {
        if (a == b) continue;
        const Matrix& t = centered_transition(m, i, a, b);
        tt.tbar[(std::size_t)a * f.arity + b] = t;
        if (t.cwiseAbs().maxCoeff() > 0) all_centered_zero_ = false;
      }
    // completion counts
    tt.complete_one.assign((std::size_t)f.arity, 0);
    tt.complete_two.assign((std::size_t)f.arity * f.arity, 0);
    for (int b = 0; b < f.arity; ++b) {
      std::vector<int> rest;
      for (int s = 0; s < f.arity; ++s)
        if (s != b) rest.push_back(f.cls[(std::size_t)s]);
      ++used[(std::size_t)f.cls[(std::size_t)b]];
      tt.complete_one[(std::size_t)b] = completion_count(rest, used, type_counts);
      for (int j = 0; j < f.arity; ++j) {
        if (j == b) continue;
        std::vector<int> rest2;
        for (int s = 0; s < f.arity; ++s)
          if (s != b && s != j) rest2.push_back(f.cls[(std::size_t)s]);
        ++used[(std::size_t)f.cls[(std::size_t)j]];
        tt.complete_two[(std::size_t)b * f.arity + j] =
            completion_count(rest2, used, type_counts);
        --used[(std::size_t)f.cls[(std::size_t)j]];
      }
      --used[(std::size_t)f.cls[(std::size_t)b]];
    }
    // absent-chain depth: k-th order terms scale like p^{k-1} relative to
    // the first; keep orders down to kChainFloor.
    tt.chain_cap = 1;
    Real rel = 1;
    while (tt.chain_cap < 64 && rel * tt.p >= kChainFloor && tt.p > 0) {
      rel *= tt.p;
      ++tt.chain_cap;
    }
  }

  inc_offset_.resize(g.factors.size() + 1);
  int off = 0;
  for (std::size_t fidx = 0; fidx < g.factors.size(); ++fidx) {
    inc_offset_[fidx] = off;
    off += (int)g.factors[fidx].vars.size();
  }
  inc_offset_[g.factors.size()] = off;
  total_incidences_ = off;
}

Vector CenteredNbOperator::apply(int s, const Vector& x) const {
  if (x.size() != (Eigen::Index)n_ * q_)
    throw DimensionMismatch("apply_nb_power: x dimension != n*q");
  if (s < 1) throw DimensionMismatch("apply_nb_power: s must be >= 1");
  const auto& g = *g_;
  const auto& m = *m_;
  const int q = q_;
  const int ntypes = m.num_types();

  // chain matrices Q[i][b][k][j]: sum over within-factor slot chains
  // b -> ... -> j of length k of the step-matrix product
  std::vector<std::vector<std::vector<std::vector<Matrix>>>> chains(
      tables_.size());
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    const auto& tt = tables_[i];
    if (tt.tbar.empty()) continue;
    const int a = tt.arity;
    const int kcap = std::min(tt.chain_cap, s);
    chains[i].assign((std::size_t)a, {});
    for (int b = 0; b < a; ++b) {
      auto& per_k = chains[i][(std::size_t)b];
      per_k.assign((std::size_t)kcap + 1, std::vector<Matrix>());
      per_k[0].assign((std::size_t)a, Matrix::Zero(q, q));
      per_k[0][(std::size_t)b] = Matrix::Identity(q, q);
      for (int k = 1; k <= kcap; ++k) {
        per_k[(std::size_t)k].assign((std::size_t)a, Matrix::Zero(q, q));
        for (int jp = 0; jp < a; ++jp) {
          Matrix acc = Matrix::Zero(q, q);
          for (int j = 0; j < a; ++j) {
            if (j == jp) continue;
            const Matrix& prev = per_k[(std::size_t)k - 1][(std::size_t)j];
            if (prev.size() == 0) continue;
            acc += prev * tt.tbar[(std::size_t)j * a + jp];
          }
          per_k[(std::size_t)k][(std::size_t)jp] = std::move(acc);
        }
      }
    }
  }

  // histories
  std::vector<Vector> hist((std::size_t)s + 1);
  hist[0] = x;
  std::vector<Matrix> type_sums((std::size_t)s + 1);  // q x ntypes
  auto compute_type_sums = [&](const Vector& h) {
    Matrix ts = Matrix::Zero(q, ntypes);
    for (int v = 0; v < n_; ++v)
      ts.col(g.type_of[(std::size_t)v]) += h.segment((Eigen::Index)v * q, q);
    return ts;
  };
  type_sums[0] = compute_type_sums(x);

  Matrix gprev = Matrix::Zero(q, total_incidences_);
  Matrix gnext = Matrix::Zero(q, total_incidences_);

  for (int t = 1; t <= s; ++t) {
    const Vector& hp = hist[(std::size_t)t - 1];
    Vector hnew = Vector::Zero((Eigen::Index)n_ * q);
    gnext.setZero();

    // present factors: exact first-factor bookkeeping
    for (std::size_t fidx = 0; fidx < g.factors.size(); ++fidx) {
      const auto& fi = g.factors[fidx];
      const auto& tt = tables_[(std::size_t)fi.type];
      if (tt.tbar.empty()) continue;
      const int a = tt.arity;
      const Real w_pres = 1.0 - tt.p;
      const int off = inc_offset_[fidx];
      for (int out = 0; out < a; ++out) {
        Vector acc = Vector::Zero(q);
        for (int in = 0; in < a; ++in) {
          if (in == out) continue;
          const int vin = fi.vars[(std::size_t)in];
          acc += tt.tbar[(std::size_t)out * a + in] *
                 (hp.segment((Eigen::Index)vin * q, q) - gprev.col(off + in));
        }
        gnext.col(off + out) = w_pres * acc;
        hnew.segment((Eigen::Index)fi.vars[(std::size_t)out] * q, q) +=
            gnext.col(off + out);
      }
    }

    // absent factors, aggregated: per-type constant vectors plus per-history
    // matrices applied at each variable
    std::vector<std::vector<Vector>> cvec((std::size_t)ntypes);
    std::vector<std::vector<Matrix>> cmat((std::size_t)ntypes);
    for (int tau = 0; tau < ntypes; ++tau) {
      cvec[(std::size_t)tau].assign((std::size_t)s + 1, Vector::Zero(q));
      cmat[(std::size_t)tau].assign((std::size_t)s + 1, Matrix::Zero(q, q));
    }
    for (std::size_t i = 0; i < tables_.size(); ++i) {
      const auto& tt = tables_[i];
      if (tt.tbar.empty()) continue;
      const int a = tt.arity;
      const int kcap = std::min({tt.chain_cap, s, t});
      const auto& f = m.factors[i];
      Real pk = 1;
      for (int k = 1; k <= kcap; ++k) {
        pk *= tt.p;
        for (int b = 0; b < a; ++b) {
          const int tau = f.cls[(std::size_t)b];
          for (int j = 0; j < a; ++j) {
            const Matrix& qm = chains[i][(std::size_t)b][(std::size_t)k][(std::size_t)j];
            if (qm.size() == 0 || qm.cwiseAbs().maxCoeff() == 0) continue;
            if (j == b) {
              cmat[(std::size_t)tau][(std::size_t)k] -=
                  pk * tt.complete_one[(std::size_t)b] * qm;
            } else {
              const int tau_j = f.cls[(std::size_t)j];
              cvec[(std::size_t)tau][(std::size_t)k] -=
                  pk * tt.complete_two[(std::size_t)b * a + j] *
                  (qm * type_sums[(std::size_t)t - k].col(tau_j));
              if (tau_j == tau)
                cmat[(std::size_t)tau][(std::size_t)k] +=
                    pk * tt.complete_two[(std::size_t)b * a + j] * qm;
            }
          }
        }
      }
    }
    for (int tau = 0; tau < ntypes; ++tau) {
      for (int k = 1; k <= s; ++k) {
        const Vector& cv = cvec[(std::size_t)tau][(std::size_t)k];
        const Matrix& cm = cmat[(std::size_t)tau][(std::size_t)k];
        const bool has_cv = cv.cwiseAbs().maxCoeff() > 0;
        const bool has_cm = cm.cwiseAbs().maxCoeff() > 0;
        if (!has_cv && !has_cm) continue;
        const Vector& hk = hist[(std::size_t)t - k];
        for (int v : by_type_[(std::size_t)tau]) {
          auto seg = hnew.segment((Eigen::Index)v * q, q);
          if (has_cv) seg += cv;
          if (has_cm) seg += cm * hk.segment((Eigen::Index)v * q, q);
        }
      }
    }

    // add back the absent-chain weight wrongly ascribed to present factors
    for (std::size_t fidx = 0; fidx < g.factors.size(); ++fidx) {
      const auto& fi = g.factors[fidx];
      const auto& tt = tables_[(std::size_t)fi.type];
      if (tt.tbar.empty()) continue;
      const int a = tt.arity;
      const int kcap = std::min({tt.chain_cap, s, t});
      Real pk = 1;
      for (int k = 1; k <= kcap; ++k) {
        pk *= tt.p;
        for (int b = 0; b < a; ++b) {
          auto seg = hnew.segment(
              (Eigen::Index)fi.vars[(std::size_t)b] * q, q);
          for (int j = 0; j < a; ++j) {
            const Matrix& qm =
                chains[(std::size_t)fi.type][(std::size_t)b][(std::size_t)k][(std::size_t)j];
            if (qm.size() == 0 || qm.cwiseAbs().maxCoeff() == 0) continue;
            seg += pk * qm *
                   hist[(std::size_t)t - k].segment(
                       (Eigen::Index)fi.vars[(std::size_t)j] * q, q);
          }
        }
      }
    }

    hist[(std::size_t)t] = std::move(hnew);
    type_sums[(std::size_t)t] = compute_type_sums(hist[(std::size_t)t]);
    std::swap(gprev, gnext);
  }
  return hist[(std::size_t)s];
}

CenteredNbOperator build_centered_operator(const ObservationModel& m,
                                           const FactorGraphInstance& g) {
  return CenteredNbOperator(m, g);
}

Vector apply_nb_power(const CenteredNbOperator& op, int s, const Vector& x) {
  return op.apply(s, x);
}

EigResult top_eigenpair(const CenteredNbOperator& op, int s,
                        const HInnerProduct& hip, int iters, Real tol,
                        Rng& rng) {
  EigResult res;
  const Eigen::Index dim = op.dim();
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.normal();
  Real nv = h_norm(hip, v);
  if (nv == 0) return res;
  v /= nv;

  const int tail = std::max(8, iters / 5);
  std::vector<Real> log_ratios;
  Real rayleigh = 0;
  for (int it = 0; it < iters; ++it) {
    Vector w = op.apply(s, v);
    Real wn = h_norm(hip, w);
    if (wn == 0) {
      res.vec = v;
      res.iters = it + 1;
      res.converged = true;  // operator annihilated the iterate: lambda = 0
      return res;
    }
    rayleigh = h_inner(hip, v, w);
    log_ratios.push_back(std::log(wn));
    v = w / wn;
    res.iters = it + 1;
    // growth-rate stabilization check on the tail
    if ((int)log_ratios.size() > 2 * tail) {
      Real recent = 0, prev = 0;
      for (int k = 0; k < tail; ++k) {
        recent += log_ratios[log_ratios.size() - 1 - (std::size_t)k];
        prev += log_ratios[log_ratios.size() - 1 - (std::size_t)(k + tail)];
      }
      if (std::abs(recent - prev) / tail < 1e-12) break;
    }
  }
  int avail = std::min<int>(tail, (int)log_ratios.size());
  Real acc = 0;
  for (int k = 0; k < avail; ++k)
    acc += log_ratios[log_ratios.size() - 1 - (std::size_t)k];
  res.magnitude = std::exp(acc / avail);
  res.lambda = rayleigh >= 0 ? res.magnitude : -res.magnitude;
  res.vec = v;
  Vector av = op.apply(s, v);
  res.residual = h_norm(hip, av - res.lambda * v);
  res.converged = res.residual <= tol * std::max<Real>(1, res.magnitude);
  return res;
}

int default_walk_length(int n) {
  return (int)std::ceil(std::sqrt(std::log((Real)std::max(2, n))));
}

DistinguishResult distinguish(const FactorGraphInstance& g,
                              const ObservationModel& planted_model, int s,
                              Real kappa, std::uint64_t seed,
                              int power_iters) {
  DistinguishResult res;
  LOperator L = build_L(planted_model);
  res.lambda_l = spectral_radius(L);
  if (!(res.lambda_l > 1))
    throw SubcriticalModel("distinguish: lambda_L <= 1; spectral distinguisher "
                           "inapplicable");
  res.kappa = kappa > 0 ? kappa : choose_kappa(res.lambda_l);
  res.s = s > 0 ? s : default_walk_length(g.n);
  res.kappa_pow_s = std::pow(res.kappa, res.s);

  CenteredNbOperator op(planted_model, g);
  HInnerProduct hip = build_h_inner(planted_model, g);
  Rng rng = Rng::stream(seed, 0x53ec7ul);
  EigResult eig = top_eigenpair(op, res.s, hip, power_iters, 1e-6, rng);
  res.lambda = eig.magnitude;
  res.planted = res.lambda > res.kappa_pow_s;
  return res;
}

Matrix enumerate_nb_power(const ObservationModel& m,
                          const FactorGraphInstance& g, int s) {
  if (g.n > 12 || s > 4 || s < 1)
    throw TooLargeForOracle("enumerate_nb_power: n <= 12, 1 <= s <= 4");
  for (const auto& f : m.factors)
    if (f.arity > 3)
      throw TooLargeForOracle("enumerate_nb_power: arities <= 3");
  const int n = g.n, q = m.q;

  // materialize the complete factor graph (all class-matching ordered tuples
  // of distinct variables) and mark which potential factors are present
  struct Potential {
    int type;
    std::vector<int> vars;
    Real weight;  // 1[present] - p
  };
  std::vector<Potential> pots;
  std::map<std::pair<int, std::vector<int>>, int> index_of;
  for (int i = 0; i < m.num_factors(); ++i) {
    const auto& f = m.factors[(std::size_t)i];
    if (f.arity < 2 || m.derived.mean_density[(std::size_t)i] <= 0) continue;
    Real p = m.derived.mean_density[(std::size_t)i] /
             std::pow((Real)n, f.arity - 1);
    std::vector<int> tuple((std::size_t)f.arity, 0);
    // odometer over [n]^arity
    for (;;) {
      bool ok = true;
      for (int a = 0; a < f.arity && ok; ++a) {
        if (g.type_of[(std::size_t)tuple[(std::size_t)a]] != f.cls[(std::size_t)a]) ok = false;
        for (int b = 0; b < a && ok; ++b)
          if (tuple[(std::size_t)a] == tuple[(std::size_t)b]) ok = false;
      }
      if (ok) {
        index_of[{i, tuple}] = (int)pots.size();
        pots.push_back({i, tuple, -p});
      }
      int a = 0;
      for (; a < f.arity; ++a) {
        if (++tuple[(std::size_t)a] < n) break;
        tuple[(std::size_t)a] = 0;
      }
      if (a == f.arity) break;
    }
  }
  for (const auto& f : g.factors) {
    auto it = index_of.find({f.type, f.vars});
    if (it != index_of.end()) pots[(std::size_t)it->second].weight += 1.0;
  }

  // directed states (potential factor, out slot, in slot); per potential
  // factor they are laid out densely so (pot, out, in) is addressable
  struct State {
    int pot, out, in;
  };
  std::vector<State> states;
  std::vector<int> state_base(pots.size() + 1, 0);
  for (int pi = 0; pi < (int)pots.size(); ++pi) {
    state_base[(std::size_t)pi] = (int)states.size();
    const auto& pot = pots[(std::size_t)pi];
    const int a = (int)pot.vars.size();
    for (int out = 0; out < a; ++out)
      for (int in = 0; in < a; ++in) {
        if (out == in) continue;
        states.push_back({pi, out, in});
      }
  }
  state_base[pots.size()] = (int)states.size();
  auto state_index = [&](int pot, int out, int in) {
    const int a = (int)pots[(std::size_t)pot].vars.size();
    return state_base[(std::size_t)pot] + out * (a - 1) + in - (in > out ? 1 : 0);
  };

  Matrix result = Matrix::Zero((Eigen::Index)n * q, (Eigen::Index)n * q);
  // one sweep per target variable: z over states, blocks q x q
  std::vector<Matrix> z(states.size()), znext(states.size());
  for (int target = 0; target < n; ++target) {
    for (std::size_t st = 0; st < states.size(); ++st) {
      const auto& state = states[st];
      const auto& pot = pots[(std::size_t)state.pot];
      const auto& f = m.factors[(std::size_t)pot.type];
      if (pot.vars[(std::size_t)state.in] == target) {
        z[st] = pot.weight *
                centered_transition(m, pot.type, state.out, state.in);
      } else {
        z[st] = Matrix::Zero(q, q);
      }
      (void)f;
    }
    for (int step = 1; step < s; ++step) {
      // W[w] = sum of z over states whose out-variable is w
      std::vector<Matrix> w((std::size_t)n, Matrix::Zero(q, q));
      for (std::size_t st = 0; st < states.size(); ++st)
        w[(std::size_t)pots[(std::size_t)states[st].pot]
              .vars[(std::size_t)states[st].out]] += z[st];
      for (std::size_t st = 0; st < states.size(); ++st) {
        const auto& state = states[st];
        const auto& pot = pots[(std::size_t)state.pot];
        const int a = (int)pot.vars.size();
        const int vin = pot.vars[(std::size_t)state.in];
        // exclude continuations through the same potential factor
        Matrix same = Matrix::Zero(q, q);
        for (int in2 = 0; in2 < a; ++in2) {
          if (in2 == state.in) continue;
          same += z[(std::size_t)state_index(state.pot, state.in, in2)];
        }
        znext[st] =
            pot.weight *
            (centered_transition(m, pot.type, state.out, state.in) *
             (w[(std::size_t)vin] - same));
      }
      std::swap(z, znext);
    }
    for (std::size_t st = 0; st < states.size(); ++st) {
      const auto& state = states[st];
      const int u = pots[(std::size_t)states[st].pot].vars[(std::size_t)state.out];
      result.block((Eigen::Index)u * q, (Eigen::Index)target * q, q, q) += z[st];
    }
  }
  return result;
}

Matrix nb_block_product(const Matrix& a, const Matrix& b, int q) {
  if (a.cols() != b.rows() || a.rows() != a.cols() || b.rows() != b.cols() ||
      a.rows() % q != 0)
    throw DimensionMismatch("nb_block_product: conforming square block "
                            "matrices required");
  Matrix out = a * b;
  for (Eigen::Index i = 0; i < out.rows() / q; ++i)
    out.block(i * q, i * q, q, q).setZero();
  return out;
}

}  // namespace pik
