#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pik/model.hpp"
#include "pik/sampler.hpp"
#include "pik/spectral.hpp"

namespace pik {

/// Stacked color indicator vector g: block v is the indicator of v's color.
Vector color_indicator_vector(const FactorGraphInstance& g,
                              const ColorAssignment& colors, int q);

/// Centered and raw indicator vectors of a (type, color) pair over [n].
struct CenteredIndicator {
  Vector centered;  // 1[tau(v)=tau] (1[c(v)=alpha] - P_tau(alpha))
  Vector raw;       // 1[tau(v)=tau] 1[c(v)=alpha]
  Vector mean;      // 1[tau(v)=tau] P_tau(alpha)
};

CenteredIndicator centered_indicator(const FactorGraphInstance& g,
                                     const ColorAssignment& colors,
                                     const ObservationModel& m, int tau,
                                     int alpha);

struct Correlation {
  Real inner = 0;       // <u, chi>
  Real normalized = 0;  // <u, chi> / (|u| |chi|)
};

Correlation correlation(const Vector& u, const Vector& chi);

struct RecoveryOutput {
  struct Candidate {
    int ell = 0;
    int beta = 0;
    Vector u;  // unit Euclidean norm, dimension n
  };
  std::vector<Candidate> candidates;
  int m = 0;                      // selected walk length
  std::vector<Real> lambda_caps;  // Lambda_t per t in range
  Real delta = 0;
  int cap = 0;  // C
  bool descent_exhausted = false;
};

struct RecoveryParams {
  Real delta = -1;       // <= 0: derive from lambda_L, halved for margin
  int cap = 8;           // C
  int t_lo = 4, t_hi = 12;
  int power_iters = 150;
  std::uint64_t seed = 7;
  int workers = 0;
};

/// The spectral weak-recovery pipeline: top eigenpairs of A^(t) over the
/// t-range, descent selection of m, then normalized color slices of
/// A^(m-ell) v_m.  Throws SubcriticalModel when lambda_L <= 1.
RecoveryOutput weak_recover(const FactorGraphInstance& g,
                            const ObservationModel& m,
                            const RecoveryParams& params);

struct EasyDistinguishResult {
  bool planted = false;
  int factor = 0, slot = 0;
  Real stat = 0, null_mean = 0, planted_mean = 0;
};

/// Degree second-moment distinguisher for models violating detailed
/// balance; throws NotApplicable when balance holds.
EasyDistinguishResult easy_distinguish(const FactorGraphInstance& g,
                                       const ObservationModel& m);

struct EasyRecoverResult {
  Vector v;                 // nq indicator vector on classified vertices
  std::vector<int> guess;   // per-variable color, -1 if unclassified
  int factor = 0, slot = 0;
  int color_a = 0, color_b = 0;
};

/// Per-vertex Poisson likelihood-ratio classification between the two
/// most separated per-color rates; throws NotApplicable when all rates
/// coincide.
EasyRecoverResult easy_recover(const FactorGraphInstance& g,
                               const ObservationModel& m);

}  // namespace pik
