#ifndef IDIKIT_CORE_HPP
#define IDIKIT_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace idikit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr const char* kVersion = "1.0.0";

// Feasibility tolerance shared by the set-valued oracles and trajectory checks.
inline constexpr double kTolFeas = 1e-8;

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct InvalidMapError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InfeasiblePointError : std::domain_error {
  using std::domain_error::domain_error;
};

struct DegenerateMultiplierError : std::domain_error {
  using std::domain_error::domain_error;
};

struct UnsupportedError : std::logic_error {
  using std::logic_error::logic_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace idikit

#endif
