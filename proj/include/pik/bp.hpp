#pragma once

#include <vector>

#include "pik/model.hpp"
#include "pik/sampler.hpp"

namespace pik {

/// Directed BP messages, one distribution over colors per (variable, factor)
/// incidence in each direction.  msgs_*[f] is q x arity(f), column s = the
/// message along the edge at slot s.
struct MessageSet {
  std::vector<Matrix> v2f;
  std::vector<Matrix> f2v;
  int degenerate_normalizers = 0;  // edges that fell back to the prior
};

struct Beliefs {
  std::vector<Vector> b;  // per variable, distribution over colors
};

/// Trivial messages: variable-to-factor = prior, factor-to-variable =
/// uniform over the prior's support.
MessageSet init_trivial(const FactorGraphInstance& g, const ObservationModel& m);

/// One synchronous round: all variable updates from the old factor messages,
/// then all factor updates from the new variable messages.  Zero
/// normalizers fall back to the trivial message and are counted.
MessageSet bp_step(const FactorGraphInstance& g, const ObservationModel& m,
                   const MessageSet& in);

/// Max absolute message difference across both families.
Real message_distance(const MessageSet& a, const MessageSet& b);

struct BpResult {
  MessageSet messages;
  bool converged = false;
  int iters = 0;
  Beliefs beliefs;
};

/// Iterates bp_step until the sup-norm change drops below tol or max_iters
/// rounds pass, then forms beliefs b_v ~ prior * prod of incoming messages.
BpResult run_bp(const FactorGraphInstance& g, const ObservationModel& m,
                const MessageSet& init, int max_iters, Real tol);

/// Central-difference check of the two-step update Jacobian at the trivial
/// fixed point against the centered transition matrix, on a minimal star
/// (one factor of type i plus a downstream factor).  Returns the max
/// absolute deviation over sum-zero input directions.
Real jacobian_check(const ObservationModel& m, int i, int a, int b,
                    Real step_size = 1e-5);

}  // namespace pik
