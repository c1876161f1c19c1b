#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "pik/common.hpp"

#include "json.hpp"

namespace pik {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One observation type: arity, class tuple (variable type per slot) and a
/// dense color-tuple density table.  Tuple (c_0,...,c_{a-1}) is stored at
/// index sum_s c_s * q^s (slot 0 least significant digit).
struct FactorType {
  std::string name;
  int arity = 0;
  std::vector<int> cls;  // type index per slot
  Vector density;        // q^arity entries, all finite and >= 0

  int tuple_index(const std::vector<int>& colors, int q) const {
    int idx = 0;
    for (int s = arity - 1; s >= 0; --s) idx = idx * q + colors[s];
    return idx;
  }
};

/// Per-factor tables derived from the model: mean density, the local color
/// law mu_i, conditional matrices (column beta = law of slot a's color given
/// slot b's color is beta) and their centered versions, whose columns sum
/// to zero.
struct DerivedTables {
  std::vector<Real> mean_density;            // per factor
  std::vector<Vector> marginal;              // mu_i over q^a, empty if d=0
  std::vector<std::vector<Matrix>> cond;     // [i][a*arity+b] -> Psi
  std::vector<std::vector<Matrix>> centered; // [i][a*arity+b] -> centered
  std::vector<Matrix> prior_diag;            // D_tau per type
  std::vector<Matrix> prior_diag_pinv;       // pseudoinverse of D_tau
};

/// A validated observation model.  Immutable after validate_model; safe to
/// share across threads read-only.
struct ObservationModel {
  int q = 0;
  std::vector<std::string> type_names;
  Vector type_dist;             // weights over types, sums to 1
  std::vector<Vector> priors;   // per-type color prior, sums to 1
  std::vector<FactorType> factors;
  DerivedTables derived;
  std::string id;  // builtin tag or file stem, for reporting

  int num_types() const { return (int)type_names.size(); }
  int num_factors() const { return (int)factors.size(); }
};

/// Parses and validates a raw model description (the external JSON format).
/// Throws NonStochasticPrior / NegativeDensity / ClassArityMismatch /
/// UnknownTypeReference on contract violations.
ObservationModel validate_model(const nlohmann::json& spec);

/// Loads a model from a JSON file path.
ObservationModel load_model(const std::string& path);

/// Prior-weighted mean of the factor's density table.
Real average_factor_density(const ObservationModel& m, int i);

/// Normalized local color law mu_i over [q]^a(i).  Throws ZeroDensityFactor
/// when the mean density vanishes.
const Vector& factor_marginal(const ObservationModel& m, int i);

/// Conditional color matrix for slot a given slot b (0-based slots, a != b).
/// Columns with zero conditioning mass hold the slot-a prior.
const Matrix& conditional_matrix(const ObservationModel& m, int i, int a, int b);

/// Centered conditional matrix (I - P 1^T) * conditional; columns sum to 0.
const Matrix& centered_transition(const ObservationModel& m, int i, int a, int b);

/// Adjoint of centered_transition under the prior-weighted inner products:
/// D_{cls(b)} * centered^T * pinv(D_{cls(a)}).
Matrix centered_transition_adjoint(const ObservationModel& m, int i, int a, int b);

/// Mean number of type-i factors containing a fixed slot-j variable of the
/// matching type, conditioned on its color: sum over tuples with c_j = c of
/// prod_{k != j} P(c_k) * phi(c).  Equal to mean density for every c exactly
/// when detailed balance holds at (i, j).
Real per_color_rate(const ObservationModel& m, int i, int j, int c);

struct BalanceViolation {
  int factor = 0, slot = 0, color = 0;
  Real lhs = 0, rhs = 0;  // mean density vs per-color rate
};

struct BalanceReport {
  bool holds = true;
  std::vector<BalanceViolation> violations;
};

/// Checks the fixed-point condition: per-color rates equal to the mean
/// density for every factor, slot, and positive-prior color.
BalanceReport detailed_balance_check(const ObservationModel& m, Real tol = 1e-9);

/// Builtin model specs; name in {nae3sat, naek_mixture, coloring, sbm,
/// biased_pair}.  Throws UnknownBuiltin / InvalidParams.
nlohmann::json builtin_model(const std::string& name,
                             const std::vector<Real>& params);

/// Parses "name:p1,p2,..." into a validated builtin model.
ObservationModel builtin_from_string(const std::string& tag);

/// Poisson rate of (factor i, slot j) children at a type-tau variable in
/// the local tree approximation: (d_i / T(tau)) * prod_s T(cls_s), zero if
/// the slot class does not match tau.
Real varfac_rate(const ObservationModel& m, int i, int j, int tau);

}  // namespace pik
