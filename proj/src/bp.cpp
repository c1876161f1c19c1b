#include "pik/bp.hpp"

#include <cmath>

namespace pik {

namespace {

Vector uniform_on_support(const Vector& prior) {
  Vector u = Vector::Zero(prior.size());
  int support = 0;
  for (int c = 0; c < prior.size(); ++c)
    if (prior[c] > 0) ++support;
  for (int c = 0; c < prior.size(); ++c)
    if (prior[c] > 0) u[c] = 1.0 / support;
  return u;
}

}  // namespace

MessageSet init_trivial(const FactorGraphInstance& g, const ObservationModel& m) {
  MessageSet ms;
  ms.v2f.reserve(g.factors.size());
  ms.f2v.reserve(g.factors.size());
  for (const auto& f : g.factors) {
    const int a = (int)f.vars.size();
    Matrix v2f(m.q, a), f2v(m.q, a);
    for (int s = 0; s < a; ++s) {
      const Vector& prior = m.priors[(std::size_t)g.type_of[(std::size_t)f.vars[(std::size_t)s]]];
      v2f.col(s) = prior;
      f2v.col(s) = uniform_on_support(prior);
    }
    ms.v2f.push_back(std::move(v2f));
    ms.f2v.push_back(std::move(f2v));
  }
  return ms;
}

MessageSet bp_step(const FactorGraphInstance& g, const ObservationModel& m,
                   const MessageSet& in) {
  MessageSet out = in;
  out.degenerate_normalizers = 0;
  const int q = m.q;

  // variable -> factor, excluding the receiving factor's own message
  for (int fi = 0; fi < g.num_factors(); ++fi) {
    const auto& f = g.factors[(std::size_t)fi];
    for (int s = 0; s < (int)f.vars.size(); ++s) {
      const int v = f.vars[(std::size_t)s];
      const Vector& prior = m.priors[(std::size_t)g.type_of[(std::size_t)v]];
      Vector msg = prior;
      for (const auto& inc : g.adjacency[(std::size_t)v]) {
        if (inc.factor == fi && inc.slot == s) continue;
        msg = msg.cwiseProduct(in.f2v[(std::size_t)inc.factor].col(inc.slot));
      }
      Real z = msg.sum();
      if (z > 0) {
        out.v2f[(std::size_t)fi].col(s) = msg / z;
      } else {
        out.v2f[(std::size_t)fi].col(s) = prior;
        ++out.degenerate_normalizers;
      }
    }
  }

  // factor -> variable, from the fresh variable messages
  for (int fi = 0; fi < g.num_factors(); ++fi) {
    const auto& f = g.factors[(std::size_t)fi];
    const auto& ft = m.factors[(std::size_t)f.type];
    const int a = ft.arity;
    const Matrix& vin = out.v2f[(std::size_t)fi];
    for (int s = 0; s < a; ++s) {
      Vector msg = Vector::Zero(q);
      std::vector<int> colors((std::size_t)a, 0);
      // walk the dense tuple table once per target slot
      for (Eigen::Index idx = 0; idx < ft.density.size(); ++idx) {
        Real phi = ft.density[idx];
        if (phi == 0) continue;
        Eigen::Index rest = idx;
        Real w = phi;
        int cs = 0;
        for (int t = 0; t < a; ++t) {
          int color = (int)(rest % q);
          rest /= q;
          if (t == s)
            cs = color;
          else
            w *= vin(color, t);
        }
        msg[cs] += w;
      }
      const int v = f.vars[(std::size_t)s];
      const Vector& prior = m.priors[(std::size_t)g.type_of[(std::size_t)v]];
      Real z = msg.sum();
      if (z > 0) {
        out.f2v[(std::size_t)fi].col(s) = msg / z;
      } else {
        out.f2v[(std::size_t)fi].col(s) = uniform_on_support(prior);
        ++out.degenerate_normalizers;
      }
    }
  }
  return out;
}

Real message_distance(const MessageSet& a, const MessageSet& b) {
  Real d = 0;
  for (std::size_t f = 0; f < a.v2f.size(); ++f) {
    if (a.v2f[f].size())
      d = std::max(d, (a.v2f[f] - b.v2f[f]).cwiseAbs().maxCoeff());
    if (a.f2v[f].size())
      d = std::max(d, (a.f2v[f] - b.f2v[f]).cwiseAbs().maxCoeff());
  }
  return d;
}

BpResult run_bp(const FactorGraphInstance& g, const ObservationModel& m,
                const MessageSet& init, int max_iters, Real tol) {
  BpResult res;
  res.messages = init;
  for (int it = 0; it < max_iters; ++it) {
    MessageSet next = bp_step(g, m, res.messages);
    Real delta = message_distance(next, res.messages);
    res.messages = std::move(next);
    res.iters = it + 1;
    if (delta < tol) {
      res.converged = true;
      break;
    }
  }
  res.beliefs.b.resize((std::size_t)g.n);
  for (int v = 0; v < g.n; ++v) {
    Vector belief = m.priors[(std::size_t)g.type_of[(std::size_t)v]];
    for (const auto& inc : g.adjacency[(std::size_t)v])
      belief =
          belief.cwiseProduct(res.messages.f2v[(std::size_t)inc.factor].col(inc.slot));
    Real z = belief.sum();
    res.beliefs.b[(std::size_t)v] =
        z > 0 ? Vector(belief / z)
              : m.priors[(std::size_t)g.type_of[(std::size_t)v]];
  }
  return res;
}

Real jacobian_check(const ObservationModel& m, int i, int a, int b,
                    Real step_size) {
  if (a == b) throw SamePositionError("jacobian_check: a == b");
  const auto& f = m.factors[(std::size_t)i];
  const int q = m.q;

  // Minimal two-step star: factor e of type i on fresh variables, plus a
  // downstream factor e' of the same type attached to e's slot-a variable.
  FactorGraphInstance g;
  g.n = 2 * f.arity - 1;
  g.type_of.resize((std::size_t)g.n);
  FactorInstance e, ep;
  e.type = i;
  ep.type = i;
  for (int s = 0; s < f.arity; ++s) {
    e.vars.push_back(s);
    g.type_of[(std::size_t)s] = f.cls[(std::size_t)s];
  }
  // e' shares only variable a (placed at the same slot to keep classes valid)
  int next = f.arity;
  for (int s = 0; s < f.arity; ++s) {
    if (s == a) {
      ep.vars.push_back(a);
    } else {
      ep.vars.push_back(next);
      g.type_of[(std::size_t)next] = f.cls[(std::size_t)s];
      ++next;
    }
  }
  g.factors = {e, ep};
  g.rebuild_adjacency();

  const MessageSet trivial = init_trivial(g, m);

  // Composed update: perturb m^{u->e} at slot b of factor 0, run one factor
  // update of e toward slot a, then the variable update v -> e'.
  auto compose = [&](const Vector& x) -> Vector {
    MessageSet ms = trivial;
    ms.v2f[0].col(b) = x;
    // factor e -> v (slot a)
    Vector fmsg = Vector::Zero(q);
    std::vector<int> colors((std::size_t)f.arity, 0);
    for (Eigen::Index idx = 0; idx < f.density.size(); ++idx) {
      Real phi = f.density[idx];
      if (phi == 0) continue;
      Eigen::Index rest = idx;
      Real w = phi;
      int ca = 0;
      for (int t = 0; t < f.arity; ++t) {
        int color = (int)(rest % q);
        rest /= q;
        if (t == a)
          ca = color;
        else
          w *= ms.v2f[0](color, t);
      }
      fmsg[ca] += w;
    }
    Real z = fmsg.sum();
    if (z <= 0) throw DegenerateNormalizer("jacobian_check: zero factor normalizer");
    fmsg /= z;
    // variable v -> e': product over factors on v other than e' = just e
    const Vector& prior = m.priors[(std::size_t)f.cls[(std::size_t)a]];
    Vector vmsg = prior.cwiseProduct(fmsg);
    Real zv = vmsg.sum();
    if (zv <= 0) throw DegenerateNormalizer("jacobian_check: zero variable normalizer");
    return vmsg / zv;
  };

  const Vector base = m.priors[(std::size_t)f.cls[(std::size_t)b]];
  Matrix jac(q, q);
  for (int d = 0; d < q; ++d) {
    Vector hi = base, lo = base;
    hi[d] += step_size;
    lo[d] -= step_size;
    jac.col(d) = (compose(hi) - compose(lo)) / (2 * step_size);
  }
  const Matrix& target = centered_transition(m, i, a, b);
  // compare on sum-zero input directions
  Matrix proj = Matrix::Identity(q, q) - Matrix::Constant(q, q, 1.0 / q);
  return ((jac - target) * proj).cwiseAbs().maxCoeff();
}

}  // namespace pik
