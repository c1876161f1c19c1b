#include "pik/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace pik {

void FactorGraphInstance::rebuild_adjacency() {
  adjacency.assign((std::size_t)n, {});
  for (int f = 0; f < num_factors(); ++f) {
    const auto& vars = factors[f].vars;
    for (int s = 0; s < (int)vars.size(); ++s)
      adjacency[(std::size_t)vars[s]].push_back({f, s});
  }
}

std::vector<int> sample_types(const ObservationModel& m, int n, Rng& rng) {
  std::vector<int> types((std::size_t)n);
  std::vector<Real> cum(m.num_types());
  Real acc = 0;
  for (int t = 0; t < m.num_types(); ++t) cum[t] = (acc += m.type_dist[t]);
  for (int v = 0; v < n; ++v) {
    Real u = rng.uniform() * acc;
    types[v] = (int)(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    if (types[v] >= m.num_types()) types[v] = m.num_types() - 1;
  }
  return types;
}

namespace {

using u128 = __uint128_t;

// Gap to the next success in a Bernoulli(p) sequence, for sequences longer
// than 2^64 (long double keeps the distribution faithful to ~1e-18).
u128 geometric_gap128(Rng& rng, Real p) {
  if (p >= 1.0) return 0;
  long double g =
      std::floor(std::log((long double)rng.uniform_pos()) / std::log1p(-(long double)p));
  if (g > 1e38L) return ~(u128)0;
  return (u128)g;
}

// Sweeps every class-matching ordered tuple of the factor type with exact
// independent Bernoulli inclusions; visit(tuple) decides acceptance of hits.
template <typename Visit>
void bernoulli_sweep(const std::vector<std::vector<int>>& slot_vars, Real p,
                     Rng& rng, Visit visit) {
  const int a = (int)slot_vars.size();
  u128 total = 1;
  for (const auto& sv : slot_vars) {
    if (sv.empty()) return;
    total *= (u128)sv.size();
  }
  std::vector<int> tuple((std::size_t)a);
  u128 pos = 0;
  bool first = true;
  for (;;) {
    u128 gap = geometric_gap128(rng, p);
    if (gap == ~(u128)0) return;
    pos += first ? gap : gap + 1;
    first = false;
    if (pos >= total) return;
    u128 rest = pos;
    bool distinct = true;
    for (int s = 0; s < a; ++s) {
      std::size_t sz = slot_vars[(std::size_t)s].size();
      tuple[(std::size_t)s] = slot_vars[(std::size_t)s][(std::size_t)(rest % sz)];
      rest /= sz;
    }
    for (int s = 0; s < a && distinct; ++s)
      for (int t = s + 1; t < a; ++t)
        if (tuple[(std::size_t)s] == tuple[(std::size_t)t]) {
          distinct = false;
          break;
        }
    if (distinct) visit(tuple);
  }
}

FactorGraphInstance sample_impl(const ObservationModel& m, int n, Rng& rng,
                                const ColorAssignment* colors,
                                std::vector<int> types) {
  FactorGraphInstance g;
  g.n = n;
  g.planted = colors != nullptr;
  g.type_of = std::move(types);

  std::vector<std::vector<int>> vars_by_type((std::size_t)m.num_types());
  for (int v = 0; v < n; ++v)
    vars_by_type[(std::size_t)g.type_of[(std::size_t)v]].push_back(v);

  for (int i = 0; i < m.num_factors(); ++i) {
    const auto& f = m.factors[i];
    Real scale = std::pow((Real)n, f.arity - 1);
    std::vector<std::vector<int>> slot_vars((std::size_t)f.arity);
    for (int s = 0; s < f.arity; ++s)
      slot_vars[(std::size_t)s] = vars_by_type[(std::size_t)f.cls[s]];

    if (!colors) {
      Real p = m.derived.mean_density[i] / scale;
      if (p > 1)
        throw DensityExceedsOne("null inclusion probability > 1 for factor " +
                                f.name);
      bernoulli_sweep(slot_vars, p, rng, [&](const std::vector<int>& tuple) {
        g.factors.push_back({i, tuple});
      });
    } else {
      Real phi_max = f.density.maxCoeff();
      if (phi_max <= 0) continue;
      Real p_max = phi_max / scale;
      if (p_max > 1)
        throw DensityExceedsOne("inclusion probability > 1 for factor " +
                                f.name);
      std::vector<int> cols((std::size_t)f.arity);
      bernoulli_sweep(slot_vars, p_max, rng, [&](const std::vector<int>& tuple) {
        for (int s = 0; s < f.arity; ++s)
          cols[(std::size_t)s] =
              colors->color_of[(std::size_t)tuple[(std::size_t)s]];
        Real phi = f.density[f.tuple_index(cols, m.q)];
        if (phi > 0 && rng.uniform() < phi / phi_max)
          g.factors.push_back({i, tuple});
      });
    }
  }
  g.rebuild_adjacency();
  return g;
}

}  // namespace

std::pair<FactorGraphInstance, ColorAssignment> sample_planted(
    const ObservationModel& m, int n, Rng& rng) {
  std::vector<int> types = sample_types(m, n, rng);
  ColorAssignment c;
  c.color_of.resize((std::size_t)n);
  for (int v = 0; v < n; ++v) {
    const Vector& prior = m.priors[(std::size_t)types[(std::size_t)v]];
    Real u = rng.uniform();
    Real acc = 0;
    int col = m.q - 1;
    for (int k = 0; k < m.q; ++k) {
      acc += prior[k];
      if (u < acc) {
        col = k;
        break;
      }
    }
    c.color_of[(std::size_t)v] = col;
  }
  FactorGraphInstance g = sample_impl(m, n, rng, &c, std::move(types));
  return {std::move(g), std::move(c)};
}

FactorGraphInstance sample_null(const ObservationModel& m, int n, Rng& rng) {
  return sample_impl(m, n, rng, nullptr, sample_types(m, n, rng));
}

std::vector<int> degree_profile(const FactorGraphInstance& g, int i, int j) {
  std::vector<int> counts((std::size_t)g.n, 0);
  for (const auto& f : g.factors)
    if (f.type == i) ++counts[(std::size_t)f.vars[(std::size_t)j]];
  return counts;
}

bool bicycle_free(const FactorGraphInstance& g, int r) {
  const int n = g.n;
  const int m = g.num_factors();
  // Bipartite node ids: variables [0, n), factors [n, n + m).
  auto neighbors = [&](int node, auto&& fn) {
    if (node < n) {
      for (const auto& inc : g.adjacency[(std::size_t)node]) fn(n + inc.factor);
    } else {
      for (int v : g.factors[(std::size_t)(node - n)].vars) fn(v);
    }
  };

  std::vector<int> dist((std::size_t)(n + m), -1);
  std::vector<char> var_in((std::size_t)n, 0);
  std::vector<char> factor_seen((std::size_t)m, 0);
  std::vector<int> touched, cand_factors;

  for (int center = 0; center < n + m; ++center) {
    touched.clear();
    cand_factors.clear();
    std::deque<int> queue;
    dist[(std::size_t)center] = 0;
    queue.push_back(center);
    touched.push_back(center);
    while (!queue.empty()) {
      int node = queue.front();
      queue.pop_front();
      int dn = dist[(std::size_t)node];
      if (dn == r) continue;
      neighbors(node, [&](int nb) {
        if (dist[(std::size_t)nb] < 0) {
          dist[(std::size_t)nb] = dn + 1;
          queue.push_back(nb);
          touched.push_back(nb);
        }
      });
    }
    long vars_in_ball = 0;
    for (int node : touched)
      if (node < n) {
        var_in[(std::size_t)node] = 1;
        ++vars_in_ball;
      }
    // A factor belongs to the ball when all its variables do.
    for (int node : touched) {
      if (node >= n) continue;
      for (const auto& inc : g.adjacency[(std::size_t)node]) {
        if (!factor_seen[(std::size_t)inc.factor]) {
          factor_seen[(std::size_t)inc.factor] = 1;
          cand_factors.push_back(inc.factor);
        }
      }
    }
    long edges = 0, closed_factors = 0;
    for (int fi : cand_factors) {
      const auto& fv = g.factors[(std::size_t)fi].vars;
      bool all_inside = true;
      for (int v : fv)
        if (!var_in[(std::size_t)v]) {
          all_inside = false;
          break;
        }
      if (all_inside) {
        ++closed_factors;
        edges += (long)fv.size();
      }
    }
    long excess = edges - (vars_in_ball + closed_factors) + 1;
    for (int node : touched) {
      dist[(std::size_t)node] = -1;
      if (node < n) var_in[(std::size_t)node] = 0;
    }
    for (int fi : cand_factors) factor_seen[(std::size_t)fi] = 0;
    if (excess > 1) return false;
  }
  return true;
}

void write_instance(std::ostream& out, const FactorGraphInstance& g) {
  out << "n " << g.n << " seed " << g.seed << " provenance "
      << (g.planted ? "planted" : "null") << "\n";
  for (int v = 0; v < g.n; ++v) out << "v " << v << " " << g.type_of[(std::size_t)v] << "\n";
  for (const auto& f : g.factors) {
    out << "f " << f.type;
    for (int v : f.vars) out << " " << v;
    out << "\n";
  }
}

FactorGraphInstance read_instance(std::istream& in) {
  FactorGraphInstance g;
  std::string line;
  if (!std::getline(in, line)) throw Error("instance file: empty");
  {
    std::istringstream h(line);
    std::string kw, prov;
    std::uint64_t seed = 0;
    int n = 0;
    h >> kw >> n;
    if (kw != "n") throw Error("instance file: bad header");
    h >> kw >> seed >> kw >> prov;
    g.n = n;
    g.seed = seed;
    g.planted = (prov == "planted");
  }
  g.type_of.assign((std::size_t)g.n, 0);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      int id = 0, type = 0;
      ls >> id >> type;
      if (id < 0 || id >= g.n) throw Error("instance file: variable id range");
      g.type_of[(std::size_t)id] = type;
    } else if (tag == "f") {
      FactorInstance f;
      ls >> f.type;
      int v;
      while (ls >> v) {
        if (v < 0 || v >= g.n) throw Error("instance file: factor var range");
        f.vars.push_back(v);
      }
      g.factors.push_back(std::move(f));
    }
  }
  g.rebuild_adjacency();
  return g;
}

void save_instance(const std::string& path, const FactorGraphInstance& g) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write instance file: " + path);
  write_instance(out, g);
}

FactorGraphInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open instance file: " + path);
  return read_instance(in);
}

void write_coloring(std::ostream& out, const ColorAssignment& c) {
  for (std::size_t v = 0; v < c.color_of.size(); ++v)
    out << v << " " << c.color_of[v] << "\n";
}

ColorAssignment read_coloring(std::istream& in) {
  ColorAssignment c;
  long id, col;
  std::vector<std::pair<long, long>> entries;
  long maxid = -1;
  while (in >> id >> col) {
    entries.push_back({id, col});
    maxid = std::max(maxid, id);
  }
  c.color_of.assign((std::size_t)(maxid + 1), 0);
  for (auto& e : entries) c.color_of[(std::size_t)e.first] = (int)e.second;
  return c;
}

void save_coloring(const std::string& path, const ColorAssignment& c) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write coloring file: " + path);
  write_coloring(out, c);
}

ColorAssignment load_coloring(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open coloring file: " + path);
  return read_coloring(in);
}

}  // namespace pik
