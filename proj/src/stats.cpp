#include "pik/stats.hpp"

#include <cmath>

#include "pik/recovery.hpp"
#include "pik/stability.hpp"
#include "pik/threads.hpp"

namespace pik {

Real local_statistic(const CenteredNbOperator& op, const HInnerProduct& hip,
                     const ColorAssignment& colors, int s) {
  Vector g = color_indicator_vector(op.instance(), colors, op.q());
  if (op.is_zero()) return 0.0;
  Vector ag = op.apply(s, g);
  return h_inner(hip, g, ag) / h_inner(hip, g, g);
}

std::vector<StatRecord> spectral_growth_curve(const ObservationModel& m, int n,
                                              int s_max, int trials,
                                              std::uint64_t seed,
                                              int power_iters, int workers) {
  const Real lambda_l = spectral_radius(build_L(m));
  const Real ref = std::sqrt(std::max<Real>(lambda_l, 0));
  std::vector<std::vector<StatRecord>> per_trial((std::size_t)trials);
  parallel_for(
      (std::size_t)trials,
      [&](std::size_t k) {
        Rng rng = Rng::stream(seed, k);
        FactorGraphInstance g = sample_null(m, n, rng);
        CenteredNbOperator op(m, g);
        HInnerProduct hip = build_h_inner(m, g);
        for (int s = 1; s <= s_max; ++s) {
          StatRecord rec;
          rec.model_id = m.id;
          rec.n = n;
          rec.s = s;
          rec.seed = seed + k;
          rec.quantity = "null_growth_rate";
          if (op.is_zero()) {
            rec.value = 0;
          } else {
            Rng erng = Rng::stream(seed, 0xe1 * (k + 1) + (std::size_t)s);
            EigResult eig = top_eigenpair(op, s, hip, power_iters, 1e-6, erng);
            rec.value = eig.magnitude > 0 ? std::pow(eig.magnitude, 1.0 / s) : 0;
          }
          rec.reference = ref;
          rec.ratio = ref > 0 ? rec.value / ref : 0;
          per_trial[k].push_back(rec);
        }
      },
      workers);
  std::vector<StatRecord> out;
  for (auto& v : per_trial)
    for (auto& r : v) out.push_back(std::move(r));
  return out;
}

std::vector<StatRecord> local_statistic_curve(const ObservationModel& m, int n,
                                              int s_max, int trials,
                                              std::uint64_t seed, int workers) {
  const Real lambda_l = spectral_radius(build_L(m));
  std::vector<std::vector<StatRecord>> per_trial((std::size_t)trials);
  parallel_for(
      (std::size_t)trials,
      [&](std::size_t k) {
        Rng rng = Rng::stream(seed, k);
        auto [g, colors] = sample_planted(m, n, rng);
        CenteredNbOperator op(m, g);
        HInnerProduct hip = build_h_inner(m, g);
        for (int s = 1; s <= s_max; ++s) {
          StatRecord rec;
          rec.model_id = m.id;
          rec.n = n;
          rec.s = s;
          rec.seed = seed + k;
          rec.quantity = "planted_local_statistic";
          rec.value = local_statistic(op, hip, colors, s);
          rec.reference = std::pow(lambda_l, s);
          rec.ratio = rec.reference > 0 ? rec.value / rec.reference : 0;
          per_trial[k].push_back(rec);
        }
      },
      workers);
  std::vector<StatRecord> out;
  for (auto& v : per_trial)
    for (auto& r : v) out.push_back(std::move(r));
  return out;
}

}  // namespace pik
