#pragma once

#include <stdexcept>
#include <string>

namespace pik {

using Real = double;

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// model_core
struct NonStochasticPrior : Error { using Error::Error; };
struct NegativeDensity : Error { using Error::Error; };
struct ClassArityMismatch : Error { using Error::Error; };
struct UnknownTypeReference : Error { using Error::Error; };
struct ZeroDensityFactor : Error { using Error::Error; };
struct SamePositionError : Error { using Error::Error; };
struct UnknownBuiltin : Error { using Error::Error; };
struct InvalidParams : Error { using Error::Error; };

// sampler
struct DensityExceedsOne : Error { using Error::Error; };

// stability
struct SubcriticalModel : Error { using Error::Error; };
struct TreeExplosion : Error { using Error::Error; };
struct BracketError : Error { using Error::Error; };

// bp
struct DegenerateNormalizer : Error { using Error::Error; };

// spectral / recovery
struct DimensionMismatch : Error { using Error::Error; };
struct TooLargeForOracle : Error { using Error::Error; };
struct NotApplicable : Error { using Error::Error; };

}  // namespace pik
