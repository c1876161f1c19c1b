#include "pik/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pik {

namespace {

constexpr Real kDistTol = 1e-12;
constexpr int kMaxArity = 8;

void check_distribution(const Vector& p, const std::string& what) {
  for (int i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0) || !std::isfinite(p[i]))
      throw NonStochasticPrior(what + ": entries must be finite and >= 0");
  }
  if (std::abs(p.sum() - 1.0) > kDistTol)
    throw NonStochasticPrior(what + ": sums to " + std::to_string(p.sum()) +
                             ", expected 1");
}

Matrix diag_pinv(const Vector& p) {
  Matrix d = Matrix::Zero(p.size(), p.size());
  for (int i = 0; i < p.size(); ++i)
    if (p[i] > 0) d(i, i) = 1.0 / p[i];
  return d;
}

// Iterates color tuples of the given arity in index order; colors[s] is the
// digit at slot s.
struct TupleIter {
  int q, arity;
  std::vector<int> colors;
  bool done = false;
  TupleIter(int q_, int a) : q(q_), arity(a), colors(a, 0) {}
  void next() {
    for (int s = 0; s < arity; ++s) {
      if (++colors[s] < q) return;
      colors[s] = 0;
    }
    done = true;
  }
};

void build_derived(ObservationModel& m) {
  const int q = m.q;
  auto& d = m.derived;
  d.prior_diag.clear();
  d.prior_diag_pinv.clear();
  for (const auto& p : m.priors) {
    d.prior_diag.push_back(Matrix(p.asDiagonal()));
    d.prior_diag_pinv.push_back(diag_pinv(p));
  }

  d.mean_density.assign(m.factors.size(), 0.0);
  d.marginal.assign(m.factors.size(), Vector());
  d.cond.assign(m.factors.size(), {});
  d.centered.assign(m.factors.size(), {});

  for (int i = 0; i < m.num_factors(); ++i) {
    const auto& f = m.factors[i];
    const int a = f.arity;
    Vector weighted(f.density.size());
    Real dbar = 0;
    for (TupleIter it(q, a); !it.done; it.next()) {
      Real w = 1.0;
      for (int s = 0; s < a; ++s) w *= m.priors[f.cls[s]][it.colors[s]];
      int idx = f.tuple_index(it.colors, q);
      weighted[idx] = w * f.density[idx];
      dbar += weighted[idx];
    }
    d.mean_density[i] = dbar;
    if (dbar > 0) d.marginal[i] = weighted / dbar;

    d.cond[i].assign((std::size_t)a * a, Matrix());
    d.centered[i].assign((std::size_t)a * a, Matrix());
    if (dbar == 0) continue;
    const Vector& mu = d.marginal[i];
    for (int pa = 0; pa < a; ++pa) {
      for (int pb = 0; pb < a; ++pb) {
        if (pa == pb) continue;
        // joint[alpha, beta] = Pr_mu[c_pa = alpha, c_pb = beta]
        Matrix joint = Matrix::Zero(q, q);
        for (TupleIter it(q, a); !it.done; it.next())
          joint(it.colors[pa], it.colors[pb]) += mu[f.tuple_index(it.colors, q)];
        Matrix psi(q, q);
        for (int beta = 0; beta < q; ++beta) {
          Real mass = joint.col(beta).sum();
          if (mass > 0)
            psi.col(beta) = joint.col(beta) / mass;
          else
            psi.col(beta) = m.priors[f.cls[pa]];  // kernel convention
        }
        const Vector& prior_a = m.priors[f.cls[pa]];
        Matrix centered = psi - prior_a * (Vector::Ones(q).transpose() * psi);
        d.cond[i][(std::size_t)pa * a + pb] = std::move(psi);
        d.centered[i][(std::size_t)pa * a + pb] = std::move(centered);
      }
    }
  }
}

}  // namespace

ObservationModel validate_model(const nlohmann::json& spec) {
  ObservationModel m;
  try {
    m.q = spec.at("q").get<int>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidParams("model spec: missing or malformed 'q'");
  }
  if (m.q < 1) throw InvalidParams("model spec: q must be >= 1");
  if (spec.contains("id")) m.id = spec["id"].get<std::string>();

  if (!spec.contains("types") || !spec["types"].is_array() || spec["types"].empty())
    throw InvalidParams("model spec: 'types' must be a nonempty array");
  std::vector<Real> weights;
  for (const auto& t : spec["types"]) {
    m.type_names.push_back(t.at("name").get<std::string>());
    weights.push_back(t.at("weight").get<Real>());
    auto pr = t.at("prior").get<std::vector<Real>>();
    if ((int)pr.size() != m.q)
      throw NonStochasticPrior("prior for type " + m.type_names.back() +
                               " has wrong length");
    m.priors.push_back(Eigen::Map<Vector>(pr.data(), pr.size()));
  }
  m.type_dist = Eigen::Map<Vector>(weights.data(), weights.size());
  check_distribution(m.type_dist, "type distribution");
  for (std::size_t t = 0; t < m.priors.size(); ++t)
    check_distribution(m.priors[t], "prior of type " + m.type_names[t]);

  auto type_index = [&](const std::string& name) {
    for (int t = 0; t < m.num_types(); ++t)
      if (m.type_names[t] == name) return t;
    throw UnknownTypeReference("unknown type '" + name + "'");
  };

  if (spec.contains("factors")) {
    for (const auto& fj : spec["factors"]) {
      FactorType f;
      f.name = fj.value("name", "f" + std::to_string(m.factors.size()));
      f.arity = fj.at("arity").get<int>();
      if (f.arity < 1 || f.arity > kMaxArity)
        throw ClassArityMismatch("factor " + f.name + ": arity out of range");
      auto cls = fj.at("class").get<std::vector<std::string>>();
      if ((int)cls.size() != f.arity)
        throw ClassArityMismatch("factor " + f.name +
                                 ": class tuple length != arity");
      for (const auto& cn : cls) f.cls.push_back(type_index(cn));

      std::size_t table = 1;
      for (int s = 0; s < f.arity; ++s) table *= (std::size_t)m.q;
      f.density = Vector::Zero((Eigen::Index)table);
      if (fj.contains("entries")) {
        for (const auto& e : fj["entries"]) {
          auto colors = e.at("colors").get<std::vector<int>>();
          if ((int)colors.size() != f.arity)
            throw ClassArityMismatch("factor " + f.name +
                                     ": colors tuple length != arity");
          for (int c : colors)
            if (c < 0 || c >= m.q)
              throw InvalidParams("factor " + f.name + ": color out of range");
          Real v = e.at("value").get<Real>();
          if (!std::isfinite(v))
            throw NegativeDensity("factor " + f.name + ": non-finite density");
          if (v < 0)
            throw NegativeDensity("factor " + f.name + ": negative density");
          f.density[f.tuple_index(colors, m.q)] = v;
        }
      }
      m.factors.push_back(std::move(f));
    }
  }

  build_derived(m);
  return m;
}

ObservationModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file: " + path);
  nlohmann::json j;
  in >> j;
  ObservationModel m = validate_model(j);
  if (m.id.empty()) m.id = path;
  return m;
}

Real average_factor_density(const ObservationModel& m, int i) {
  return m.derived.mean_density.at((std::size_t)i);
}

const Vector& factor_marginal(const ObservationModel& m, int i) {
  if (m.derived.mean_density.at((std::size_t)i) <= 0)
    throw ZeroDensityFactor("factor " + m.factors[i].name +
                            " has zero mean density");
  return m.derived.marginal[(std::size_t)i];
}

const Matrix& conditional_matrix(const ObservationModel& m, int i, int a, int b) {
  if (a == b) throw SamePositionError("conditional_matrix: a == b");
  factor_marginal(m, i);  // raises ZeroDensityFactor if undefined
  return m.derived.cond.at((std::size_t)i)[(std::size_t)a * m.factors[i].arity + b];
}

const Matrix& centered_transition(const ObservationModel& m, int i, int a, int b) {
  if (a == b) throw SamePositionError("centered_transition: a == b");
  factor_marginal(m, i);
  return m.derived.centered.at((std::size_t)i)[(std::size_t)a * m.factors[i].arity + b];
}

Matrix centered_transition_adjoint(const ObservationModel& m, int i, int a, int b) {
  const Matrix& t = centered_transition(m, i, a, b);
  const auto& f = m.factors[i];
  return m.derived.prior_diag[f.cls[b]] * t.transpose() *
         m.derived.prior_diag_pinv[f.cls[a]];
}

Real per_color_rate(const ObservationModel& m, int i, int j, int c) {
  const auto& f = m.factors[i];
  Real rate = 0;
  for (TupleIter it(m.q, f.arity); !it.done; it.next()) {
    if (it.colors[j] != c) continue;
    Real w = 1.0;
    for (int s = 0; s < f.arity; ++s)
      if (s != j) w *= m.priors[f.cls[s]][it.colors[s]];
    rate += w * f.density[f.tuple_index(it.colors, m.q)];
  }
  return rate;
}

BalanceReport detailed_balance_check(const ObservationModel& m, Real tol) {
  BalanceReport rep;
  for (int i = 0; i < m.num_factors(); ++i) {
    const auto& f = m.factors[i];
    Real dbar = m.derived.mean_density[i];
    for (int j = 0; j < f.arity; ++j) {
      for (int c = 0; c < m.q; ++c) {
        if (m.priors[f.cls[j]][c] <= 0) continue;
        Real rhs = per_color_rate(m, i, j, c);
        if (std::abs(rhs - dbar) > tol) {
          rep.holds = false;
          rep.violations.push_back({i, j, c, dbar, rhs});
        }
      }
    }
  }
  return rep;
}

Real varfac_rate(const ObservationModel& m, int i, int j, int tau) {
  const auto& f = m.factors[i];
  if (f.cls[j] != tau) return 0;
  Real rate = m.derived.mean_density[i] / m.type_dist[tau];
  for (int s = 0; s < f.arity; ++s) rate *= m.type_dist[f.cls[s]];
  return rate;
}

namespace {

bool not_all_equal(const std::vector<int>& bits) {
  for (std::size_t s = 1; s < bits.size(); ++s)
    if (bits[s] != bits[0]) return true;
  return false;
}

// NAE-k factor family: one factor type per sign pattern, density value
// chosen so the per-variable expected NAE-k factor degree is deg.
void append_nae_factors(nlohmann::json& factors, int k, Real deg, int q) {
  const Real value = deg / (Real(k) * (std::pow(2.0, k) - 2.0));
  for (int sigma = 0; sigma < (1 << k); ++sigma) {
    nlohmann::json f;
    std::string name = "nae" + std::to_string(k) + ":";
    for (int s = 0; s < k; ++s) name += (sigma >> s & 1) ? '-' : '+';
    f["name"] = name;
    f["arity"] = k;
    f["class"] = std::vector<std::string>(k, "v");
    nlohmann::json entries = nlohmann::json::array();
    std::vector<int> colors(k, 0);
    for (int c = 0; c < (1 << k); ++c) {
      std::vector<int> lit(k);
      for (int s = 0; s < k; ++s) {
        colors[s] = c >> s & 1;
        lit[s] = colors[s] ^ (sigma >> s & 1);
      }
      if (!not_all_equal(lit)) continue;
      entries.push_back({{"colors", colors}, {"value", value}});
    }
    f["entries"] = entries;
    factors.push_back(f);
  }
  (void)q;
}

std::string format_params(const std::vector<Real>& params) {
  std::string s;
  for (std::size_t i = 0; i < params.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", params[i]);
    s += (i ? "," : "") + std::string(buf);
  }
  return s;
}

nlohmann::json single_type_spec(int q) {
  nlohmann::json spec;
  spec["q"] = q;
  spec["types"] = {{{"name", "v"},
                    {"weight", 1.0},
                    {"prior", std::vector<Real>((std::size_t)q, 1.0 / q)}}};
  spec["factors"] = nlohmann::json::array();
  return spec;
}

}  // namespace

nlohmann::json builtin_model(const std::string& name,
                             const std::vector<Real>& params) {
  auto need = [&](std::size_t k) {
    if (params.size() != k)
      throw InvalidParams("builtin " + name + ": expected " +
                          std::to_string(k) + " parameter(s)");
  };
  if (name == "nae3sat") {
    need(1);
    Real d = params[0];
    if (d <= 0) throw InvalidParams("nae3sat: d must be > 0");
    auto spec = single_type_spec(2);
    append_nae_factors(spec["factors"], 3, d, 2);
    spec["id"] = "nae3sat:" + format_params(params);
    return spec;
  }
  if (name == "naek_mixture") {
    if (params.size() != 2 && params.size() != 4)
      throw InvalidParams("naek_mixture: expected d,p[,k1,k2]");
    Real d = params[0], p = params[1];
    int k1 = params.size() == 4 ? (int)params[2] : 3;
    int k2 = params.size() == 4 ? (int)params[3] : 5;
    if (d <= 0 || p < 0 || p > 1 || k1 < 2 || k2 < 2 || k1 > 8 || k2 > 8)
      throw InvalidParams("naek_mixture: bad parameters");
    auto spec = single_type_spec(2);
    if (p > 0) append_nae_factors(spec["factors"], k1, d * p, 2);
    if (p < 1) append_nae_factors(spec["factors"], k2, d * (1 - p), 2);
    spec["id"] = "naek_mixture:" + format_params(params);
    return spec;
  }
  if (name == "coloring") {
    need(2);
    int q = (int)params[0];
    Real d = params[1];
    if (q < 2 || d <= 0) throw InvalidParams("coloring: need q >= 2, d > 0");
    auto spec = single_type_spec(q);
    nlohmann::json entries = nlohmann::json::array();
    for (int c1 = 0; c1 < q; ++c1)
      for (int c2 = 0; c2 < q; ++c2)
        if (c1 != c2)
          entries.push_back({{"colors", {c1, c2}}, {"value", d}});
    spec["factors"].push_back({{"name", "edge"},
                               {"arity", 2},
                               {"class", {"v", "v"}},
                               {"entries", entries}});
    spec["id"] = "coloring:" + format_params(params);
    return spec;
  }
  if (name == "sbm") {
    need(3);
    int q = (int)params[0];
    Real cin = params[1], cout = params[2];
    if (q < 2 || cin < 0 || cout < 0) throw InvalidParams("sbm: bad parameters");
    auto spec = single_type_spec(q);
    nlohmann::json entries = nlohmann::json::array();
    // Halved so the two ordered tuples per pair reproduce edge prob c/n.
    for (int c1 = 0; c1 < q; ++c1)
      for (int c2 = 0; c2 < q; ++c2)
        entries.push_back(
            {{"colors", {c1, c2}}, {"value", (c1 == c2 ? cin : cout) / 2}});
    spec["factors"].push_back({{"name", "edge"},
                               {"arity", 2},
                               {"class", {"v", "v"}},
                               {"entries", entries}});
    spec["id"] = "sbm:" + format_params(params);
    return spec;
  }
  if (name == "biased_pair") {
    need(1);
    Real scale = params[0];
    if (scale <= 0) throw InvalidParams("biased_pair: scale must be > 0");
    auto spec = single_type_spec(2);
    spec["factors"].push_back(
        {{"name", "pair00"},
         {"arity", 2},
         {"class", {"v", "v"}},
         {"entries", {{{"colors", {0, 0}}, {"value", 2 * scale}}}}});
    spec["id"] = "biased_pair:" + format_params(params);
    return spec;
  }
  throw UnknownBuiltin("unknown builtin model '" + name + "'");
}

ObservationModel builtin_from_string(const std::string& tag) {
  auto colon = tag.find(':');
  std::string name = tag.substr(0, colon);
  std::vector<Real> params;
  if (colon != std::string::npos) {
    std::stringstream ss(tag.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) params.push_back(std::stod(item));
  }
  return validate_model(builtin_model(name, params));
}

}  // namespace pik
