#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pik/model.hpp"
#include "pik/sampler.hpp"
#include "pik/spectral.hpp"

namespace pik {

/// One measured quantity with its reference value and provenance.
struct StatRecord {
  std::string model_id;
  int n = 0;
  int s = 0;
  std::uint64_t seed = 0;
  std::string quantity;
  Real value = 0;
  Real reference = 0;  // > 0 for ratio records
  Real ratio = 0;
};

/// Quadratic form <g, A^(s) g>_H / |g|_H^2 of the planted color indicator.
Real local_statistic(const CenteredNbOperator& op, const HInnerProduct& hip,
                     const ColorAssignment& colors, int s);

/// Per-s growth-rate estimates |lambda|_max(A^(s))^{1/s} on fresh null
/// samples; one record per (trial, s).
std::vector<StatRecord> spectral_growth_curve(const ObservationModel& m, int n,
                                              int s_max, int trials,
                                              std::uint64_t seed,
                                              int power_iters = 200,
                                              int workers = 0);

/// Planted local-statistic ratio records value / lambda_L^s per (trial, s).
std::vector<StatRecord> local_statistic_curve(const ObservationModel& m, int n,
                                              int s_max, int trials,
                                              std::uint64_t seed,
                                              int workers = 0);

}  // namespace pik
