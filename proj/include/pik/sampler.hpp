#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pik/model.hpp"
#include "pik/rng.hpp"

namespace pik {

/// One sampled factor: its type and ordered variable tuple.
struct FactorInstance {
  int type = 0;
  std::vector<int> vars;
};

/// Per-variable incidence: which factor, at which slot.
struct Incidence {
  int factor = 0;
  int slot = 0;
};

/// A sampled bipartite factor-graph instance.
struct FactorGraphInstance {
  int n = 0;
  std::vector<int> type_of;            // [n] -> type index
  std::vector<FactorInstance> factors;
  std::vector<std::vector<Incidence>> adjacency;  // per variable
  bool planted = false;
  std::uint64_t seed = 0;

  int num_factors() const { return (int)factors.size(); }
  void rebuild_adjacency();
};

struct ColorAssignment {
  std::vector<int> color_of;  // [n] -> color
};

/// I.i.d. variable types from the model's type distribution.
std::vector<int> sample_types(const ObservationModel& m, int n, Rng& rng);

/// Planted sample: colors from the per-type priors, then every ordered
/// class-matching tuple of distinct variables included independently with
/// probability phi(colors) / n^{arity-1}.  Exact Bernoulli per tuple via
/// geometric gap skipping; throws DensityExceedsOne if some probability
/// exceeds 1.
std::pair<FactorGraphInstance, ColorAssignment> sample_planted(
    const ObservationModel& m, int n, Rng& rng);

/// Null sample: tuple inclusion probability mean_density / n^{arity-1}.
FactorGraphInstance sample_null(const ObservationModel& m, int n, Rng& rng);

/// Count of type-i factors containing each variable at slot j.
std::vector<int> degree_profile(const FactorGraphInstance& g, int i, int j);

/// True iff every ball of the given bipartite radius contains at most one
/// independent cycle.  A ball is the variables within distance r of the
/// center plus every factor whose variables all lie in that set.
bool bicycle_free(const FactorGraphInstance& g, int r);

/// Line-oriented instance serialization (header, variables, factors).
void write_instance(std::ostream& out, const FactorGraphInstance& g);
FactorGraphInstance read_instance(std::istream& in);
void save_instance(const std::string& path, const FactorGraphInstance& g);
FactorGraphInstance load_instance(const std::string& path);

void write_coloring(std::ostream& out, const ColorAssignment& c);
ColorAssignment read_coloring(std::istream& in);
void save_coloring(const std::string& path, const ColorAssignment& c);
ColorAssignment load_coloring(const std::string& path);

}  // namespace pik
