#pragma once

#include <cstdint>
#include <vector>

#include "pik/model.hpp"
#include "pik/rng.hpp"
#include "pik/sampler.hpp"

namespace pik {

/// Diagonal prior-weighted inner product <x,y> = x^T H^{-1} y on R^{nq};
/// zero-prior coordinates carry weight 1 (they lie in the kernel of every
/// walk operator).
struct HInnerProduct {
  int n = 0, q = 0;
  Vector hinv;  // nq entries of H^{-1}
};

HInnerProduct build_h_inner(const ObservationModel& m,
                            const FactorGraphInstance& g);

Real h_inner(const HInnerProduct& hip, const Vector& x, const Vector& y);
Real h_norm(const HInnerProduct& hip, const Vector& x);

/// Matrix-free centered nonbacktracking power operator.  Walk sums run over
/// the complete factor graph with per-step weights (1[e in G] - p_e); the
/// absent-factor mass is aggregated exactly through per-type summary vectors,
/// within-factor chain matrices, and completion counts, with local
/// exclusion corrections for present factors and the walking variable.
class CenteredNbOperator {
 public:
  CenteredNbOperator(const ObservationModel& m, const FactorGraphInstance& g);

  /// y = A^(s) x with x of dimension n*q.
  Vector apply(int s, const Vector& x) const;

  int n() const { return n_; }
  int q() const { return q_; }
  int dim() const { return n_ * q_; }
  bool is_zero() const { return all_centered_zero_; }
  const FactorGraphInstance& instance() const { return *g_; }
  const ObservationModel& model() const { return *m_; }

 private:
  struct TypeTables {
    int arity = 0;
    Real p = 0;                      // null inclusion probability
    int chain_cap = 0;               // absent-chain depth kept (per apply cap)
    std::vector<Matrix> tbar;        // [out*arity+in]
    std::vector<Real> complete_one;  // [b]    count with one pinned variable
    std::vector<Real> complete_two;  // [b*arity+j] two pinned variables
  };

  const ObservationModel* m_;
  const FactorGraphInstance* g_;
  int n_ = 0, q_ = 0;
  bool all_centered_zero_ = true;
  std::vector<TypeTables> tables_;          // per factor type
  std::vector<std::vector<int>> by_type_;   // variables per type
  std::vector<int> inc_offset_;             // per factor instance, into G columns
  int total_incidences_ = 0;
};

/// Convenience wrapper matching the operation contract.
CenteredNbOperator build_centered_operator(const ObservationModel& m,
                                           const FactorGraphInstance& g);
Vector apply_nb_power(const CenteredNbOperator& op, int s, const Vector& x);

struct EigResult {
  Real lambda = 0;        // signed dominant eigenvalue estimate
  Real magnitude = 0;     // |lambda| from norm growth
  Vector vec;             // H-unit iterate
  Real residual = 0;      // ||A v - lambda v||_H
  bool converged = false;
  int iters = 0;
};

/// H-geometry power iteration for the dominant eigenvalue of A^(s):
/// magnitude from norm growth, sign from the Rayleigh quotient.
EigResult top_eigenpair(const CenteredNbOperator& op, int s,
                        const HInnerProduct& hip, int iters, Real tol,
                        Rng& rng);

struct DistinguishResult {
  bool planted = false;
  Real lambda = 0;      // dominant eigenvalue magnitude of A^(s)
  Real kappa = 0;
  Real kappa_pow_s = 0;
  Real lambda_l = 0;
  int s = 0;
};

/// Default walk length ceil(sqrt(log n)).
int default_walk_length(int n);

/// Thresholds |lambda|_max(A^(s)) against kappa^s; kappa <= 0 means derive
/// it from the model via choose_kappa.  Throws SubcriticalModel when
/// lambda_L <= 1.
DistinguishResult distinguish(const FactorGraphInstance& g,
                              const ObservationModel& planted_model, int s,
                              Real kappa, std::uint64_t seed,
                              int power_iters = 300);

/// Dense reference oracle: exact walk enumeration over the complete factor
/// graph.  Guarded to n <= 12, s <= 4, arities <= 3 (TooLargeForOracle).
Matrix enumerate_nb_power(const ObservationModel& m,
                          const FactorGraphInstance& g, int s);

/// Block product with diagonal blocks zeroed: (A o B)[i,j] = sum_k
/// A[i,k] B[k,j] for i != j, 0 on the diagonal (q x q blocks).
Matrix nb_block_product(const Matrix& a, const Matrix& b, int q);

}  // namespace pik
