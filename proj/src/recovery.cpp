#include "pik/recovery.hpp"

#include <algorithm>
#include <cmath>

#include "pik/stability.hpp"
#include "pik/threads.hpp"

namespace pik {

Vector color_indicator_vector(const FactorGraphInstance& g,
                              const ColorAssignment& colors, int q) {
  Vector out = Vector::Zero((Eigen::Index)g.n * q);
  for (int v = 0; v < g.n; ++v)
    out[(Eigen::Index)v * q + colors.color_of[(std::size_t)v]] = 1.0;
  return out;
}

CenteredIndicator centered_indicator(const FactorGraphInstance& g,
                                     const ColorAssignment& colors,
                                     const ObservationModel& m, int tau,
                                     int alpha) {
  CenteredIndicator ci;
  ci.centered = Vector::Zero(g.n);
  ci.raw = Vector::Zero(g.n);
  ci.mean = Vector::Zero(g.n);
  const Real p = m.priors[(std::size_t)tau][alpha];
  for (int v = 0; v < g.n; ++v) {
    if (g.type_of[(std::size_t)v] != tau) continue;
    const Real ind = colors.color_of[(std::size_t)v] == alpha ? 1.0 : 0.0;
    ci.raw[v] = ind;
    ci.mean[v] = p;
    ci.centered[v] = ind - p;
  }
  return ci;
}

Correlation correlation(const Vector& u, const Vector& chi) {
  if (u.size() != chi.size())
    throw DimensionMismatch("correlation: dimension mismatch");
  Correlation c;
  c.inner = u.dot(chi);
  Real denom = u.norm() * chi.norm();
  c.normalized = denom > 0 ? c.inner / denom : 0.0;
  return c;
}

RecoveryOutput weak_recover(const FactorGraphInstance& g,
                            const ObservationModel& m,
                            const RecoveryParams& params) {
  RecoveryOutput out;
  const int q = m.q;
  LOperator L = build_L(m);
  const Real lambda_l = spectral_radius(L);
  if (!(lambda_l > 1))
    throw SubcriticalModel("weak_recover: lambda_L <= 1");
  Real delta = params.delta;
  if (delta <= 0) delta = (std::pow(lambda_l, 0.25) - 1) / 2;
  if (std::pow(1 + delta, 4) > lambda_l)
    throw InvalidParams("weak_recover: lambda_L < (1+delta)^4");
  out.delta = delta;
  out.cap = params.cap;

  const int t_lo = params.t_lo, t_hi = params.t_hi;
  if (t_lo < 1 || t_hi < t_lo) throw InvalidParams("weak_recover: bad t range");

  CenteredNbOperator op(m, g);
  if (op.is_zero()) throw SubcriticalModel("weak_recover: zero operator");
  HInnerProduct hip = build_h_inner(m, g);

  // eigenpairs for every t in range (independent, run concurrently)
  const int nt = t_hi - t_lo + 1;
  std::vector<EigResult> eig((std::size_t)nt);
  parallel_for(
      (std::size_t)nt,
      [&](std::size_t k) {
        Rng rng = Rng::stream(params.seed, 0xe16 + k);
        eig[k] = top_eigenpair(op, t_lo + (int)k, hip, params.power_iters,
                               1e-6, rng);
      },
      params.workers);
  out.lambda_caps.resize((std::size_t)nt);
  for (int k = 0; k < nt; ++k) {
    const Real mag = eig[(std::size_t)k].magnitude;
    out.lambda_caps[(std::size_t)k] =
        mag > 0 ? std::pow(mag, 1.0 / (t_lo + k)) : 0.0;
  }

  // descent: find m such that ||A^(s) v_m||_H <= Lambda_m^s (1+delta)^{m-s}
  // for all s in [t_lo, m]; on violation restart from the largest violating s
  int mm = t_hi;
  std::vector<Vector> powers;  // powers[s - t_lo] = A^(s) v_m for s <= m
  for (;;) {
    const EigResult& e = eig[(std::size_t)(mm - t_lo)];
    const Real cap_m = out.lambda_caps[(std::size_t)(mm - t_lo)];
    powers.assign((std::size_t)(mm - t_lo + 1), Vector());
    int violation = -1;
    if (cap_m > 0 && e.vec.size() > 0) {
      for (int s_chk = mm; s_chk >= t_lo; --s_chk) {
        Vector w = op.apply(s_chk, e.vec);
        powers[(std::size_t)(s_chk - t_lo)] = w;
        Real bound = std::pow(cap_m, s_chk) * std::pow(1 + delta, mm - s_chk);
        if (h_norm(hip, w) > bound && s_chk < mm) {
          violation = s_chk;  // keep scanning: descend to the largest one
          break;
        }
      }
    }
    if (violation < 0) break;
    mm = violation;  // at m = t_lo the condition is vacuous, so this ends
  }
  out.m = mm;

  // candidate vectors from w_ell = A^(m - ell) v_m, sliced per color
  const Vector& vm = eig[(std::size_t)(mm - t_lo)].vec;
  for (int ell = 0; ell <= params.cap; ++ell) {
    const int expo = mm - ell;
    Vector w;
    if (expo <= 0) {
      w = vm;
    } else if (expo >= t_lo && (std::size_t)(expo - t_lo) < powers.size() &&
               powers[(std::size_t)(expo - t_lo)].size() > 0) {
      w = powers[(std::size_t)(expo - t_lo)];
    } else {
      w = op.apply(expo, vm);
    }
    for (int beta = 0; beta < q; ++beta) {
      Vector u(g.n);
      for (int v = 0; v < g.n; ++v) u[v] = w[(Eigen::Index)v * q + beta];
      Real norm = u.norm();
      if (norm <= 0) continue;
      out.candidates.push_back({ell, beta, u / norm});
    }
  }
  return out;
}

namespace {

// Expected second moments of the (i, j) degree profile under both models,
// using the instance's realized type counts.
struct SecondMoments {
  Real null_mean = 0, planted_mean = 0;
};

SecondMoments degree_second_moments(const ObservationModel& m,
                                    const FactorGraphInstance& g, int i,
                                    int j) {
  SecondMoments sm;
  const auto& f = m.factors[(std::size_t)i];
  const int tau = f.cls[(std::size_t)j];
  long n_tau = 0;
  for (int v = 0; v < g.n; ++v)
    if (g.type_of[(std::size_t)v] == tau) ++n_tau;
  Real k = 1;  // completions of the other slots in expectation
  for (int s = 0; s < f.arity; ++s)
    if (s != j) k *= m.type_dist[(std::size_t)f.cls[(std::size_t)s]];
  const Real lambda_null = k * m.derived.mean_density[(std::size_t)i];
  sm.null_mean = (Real)n_tau * (lambda_null * lambda_null + lambda_null);
  Real planted = 0;
  for (int c = 0; c < m.q; ++c) {
    const Real pc = m.priors[(std::size_t)tau][c];
    if (pc <= 0) continue;
    const Real lam = k * per_color_rate(m, i, j, c);
    planted += pc * (lam * lam + lam);
  }
  sm.planted_mean = (Real)n_tau * planted;
  return sm;
}

}  // namespace

EasyDistinguishResult easy_distinguish(const FactorGraphInstance& g,
                                       const ObservationModel& m) {
  BalanceReport rep = detailed_balance_check(m);
  if (rep.holds)
    throw NotApplicable("easy_distinguish: detailed balance holds");
  // pick the (i, j) with the widest mean separation
  EasyDistinguishResult best;
  Real best_sep = -1;
  for (int i = 0; i < m.num_factors(); ++i) {
    for (int j = 0; j < m.factors[(std::size_t)i].arity; ++j) {
      SecondMoments sm = degree_second_moments(m, g, i, j);
      Real sep = std::abs(sm.planted_mean - sm.null_mean);
      if (sep > best_sep) {
        best_sep = sep;
        best.factor = i;
        best.slot = j;
        best.null_mean = sm.null_mean;
        best.planted_mean = sm.planted_mean;
      }
    }
  }
  std::vector<int> prof = degree_profile(g, best.factor, best.slot);
  Real stat = 0;
  for (int c : prof) stat += (Real)c * c;
  best.stat = stat;
  // ties resolve to null
  best.planted = std::abs(stat - best.planted_mean) <
                 std::abs(stat - best.null_mean);
  return best;
}

EasyRecoverResult easy_recover(const FactorGraphInstance& g,
                               const ObservationModel& m) {
  // most separated per-color pair over all (factor, slot)
  EasyRecoverResult best;
  Real best_sep = 0;
  for (int i = 0; i < m.num_factors(); ++i) {
    const auto& f = m.factors[(std::size_t)i];
    for (int j = 0; j < f.arity; ++j) {
      const int tau = f.cls[(std::size_t)j];
      Real k = 1;
      for (int s = 0; s < f.arity; ++s)
        if (s != j) k *= m.type_dist[(std::size_t)f.cls[(std::size_t)s]];
      for (int ca = 0; ca < m.q; ++ca) {
        if (m.priors[(std::size_t)tau][ca] <= 0) continue;
        for (int cb = ca + 1; cb < m.q; ++cb) {
          if (m.priors[(std::size_t)tau][cb] <= 0) continue;
          Real sep = std::abs(k * per_color_rate(m, i, j, ca) -
                              k * per_color_rate(m, i, j, cb));
          if (sep > best_sep) {
            best_sep = sep;
            best.factor = i;
            best.slot = j;
            best.color_a = ca;
            best.color_b = cb;
          }
        }
      }
    }
  }
  if (best_sep <= 1e-12)
    throw NotApplicable("easy_recover: all per-color rates coincide");

  const auto& f = m.factors[(std::size_t)best.factor];
  const int tau = f.cls[(std::size_t)best.slot];
  Real k = 1;
  for (int s = 0; s < f.arity; ++s)
    if (s != best.slot) k *= m.type_dist[(std::size_t)f.cls[(std::size_t)s]];
  const Real la = k * per_color_rate(m, best.factor, best.slot, best.color_a);
  const Real lb = k * per_color_rate(m, best.factor, best.slot, best.color_b);

  auto loglik = [](Real lam, int count) -> Real {
    if (lam <= 0) return count == 0 ? 0.0 : -1e300;
    return count * std::log(lam) - lam;
  };

  std::vector<int> prof = degree_profile(g, best.factor, best.slot);
  best.v = Vector::Zero((Eigen::Index)g.n * m.q);
  best.guess.assign((std::size_t)g.n, -1);
  for (int v = 0; v < g.n; ++v) {
    if (g.type_of[(std::size_t)v] != tau) continue;
    const int cnt = prof[(std::size_t)v];
    const int pick =
        loglik(la, cnt) >= loglik(lb, cnt) ? best.color_a : best.color_b;
    best.guess[(std::size_t)v] = pick;
    best.v[(Eigen::Index)v * m.q + pick] = 1.0;
  }
  return best;
}

}  // namespace pik
