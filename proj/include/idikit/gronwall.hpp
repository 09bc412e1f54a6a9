#ifndef IDIKIT_GRONWALL_HPP
#define IDIKIT_GRONWALL_HPP

#include "idikit/core.hpp"

#include <numeric>

namespace idikit {

namespace detail {
inline void require_nonnegative(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!(x >= 0.0)) throw DomainError(std::string(what) + ": entries must be nonnegative");
}
}  // namespace detail

// Bounds for e_{n+1} <= sigma_n + rho_n sum_{i<n} e_i + (1+gamma_n) e_n.
// Returns B_0..B_N with B_n = (e_0 + sum_{i<n} sigma_i) exp(sum_{i<n} (i rho_i + gamma_i)).
inline std::vector<double> discrete_gronwall_forward(double e0, const std::vector<double>& sigma,
                                                     const std::vector<double>& rho, const std::vector<double>& gamma) {
  if (!(e0 >= 0.0)) throw DomainError("gronwall forward: e_0 must be nonnegative");
  detail::require_nonnegative(sigma, "gronwall forward sigma");
  detail::require_nonnegative(rho, "gronwall forward rho");
  detail::require_nonnegative(gamma, "gronwall forward gamma");
  require(sigma.size() == rho.size() && rho.size() == gamma.size(), "gronwall forward: length mismatch");
  const std::size_t N = sigma.size();
  std::vector<double> B(N + 1);
  double s = e0, ex = 0.0;
  B[0] = e0;
  for (std::size_t i = 0; i < N; ++i) {
    s += sigma[i];
    ex += static_cast<double>(i) * rho[i] + gamma[i];
    B[i + 1] = s * std::exp(ex);
  }
  return B;
}

// Bounds for x_j <= c_j + b_j sum_{i=j+1}^{k} x_{i+1} + (1+a_j) x_{j+1}, x_{k+1} = 0,
// obtained from the forward bound under u_{k-j} = x_j. Entry j (0 <= j <= k-2) bounds x_{j+1}:
//   (x_k + sum_{i=j+1}^{k-1} c_i) exp(sum_{i=j+1}^{k-1} ((k-1-i) b_i + a_i)).
inline std::vector<double> discrete_gronwall_backward(double xk, const std::vector<double>& c,
                                                      const std::vector<double>& b, const std::vector<double>& a) {
  if (!(xk >= 0.0)) throw DomainError("gronwall backward: x_k must be nonnegative");
  detail::require_nonnegative(c, "gronwall backward c");
  detail::require_nonnegative(b, "gronwall backward b");
  detail::require_nonnegative(a, "gronwall backward a");
  require(c.size() == b.size() && b.size() == a.size(), "gronwall backward: length mismatch");
  const int k = static_cast<int>(c.size());
  require(k >= 2, "gronwall backward: need k >= 2");
  std::vector<double> sigma(k), rho(k), gamma(k);
  for (int n = 0; n < k; ++n) {
    sigma[n] = c[k - 1 - n];
    rho[n] = b[k - 1 - n];
    gamma[n] = a[k - 1 - n];
  }
  std::vector<double> fwd = discrete_gronwall_forward(xk, sigma, rho, gamma);
  std::vector<double> out(k - 1);
  for (int j = 0; j <= k - 2; ++j) out[j] = fwd[k - 1 - j];
  return out;
}

using ScalarFn = std::function<double(double)>;

// rho'(t) <= a + b1 rho + b2 int_{T0}^t rho  =>  rho(t) <= rho0 e^{B(t)} + int a(s) e^{B(t)-B(s)} ds,
// B(t) = int_{T0}^t (max(b1,b2) + 1). Composite Simpson on the given grid.
inline std::vector<double> continuous_gronwall(double rho0, const ScalarFn& a, const ScalarFn& b1, const ScalarFn& b2,
                                               const std::vector<double>& grid) {
  if (!(rho0 >= 0.0)) throw DomainError("continuous gronwall: rho(T0) must be nonnegative");
  require(grid.size() >= 1, "continuous gronwall: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i) require(grid[i] > grid[i - 1], "continuous gronwall: grid not increasing");
  auto nonneg = [](double v, const char* w) {
    if (!(v >= 0.0)) throw DomainError(std::string("continuous gronwall: ") + w + " must be nonnegative");
    return v;
  };
  auto bb = [&](double t) { return std::max(nonneg(b1(t), "b1"), nonneg(b2(t), "b2")) + 1.0; };
  auto simpson = [](auto&& f, double lo, double hi) {
    return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(0.5 * (lo + hi)) + f(hi));
  };
  std::vector<double> out(grid.size());
  out[0] = rho0;
  double B = 0.0, I = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double lo = grid[i], hi = grid[i + 1], mid = 0.5 * (lo + hi);
    const double Bmid = B + simpson(bb, lo, mid);
    const double Bhi = B + simpson(bb, lo, hi);
    I += (hi - lo) / 6.0 *
         (nonneg(a(lo), "a") * std::exp(-B) + 4.0 * nonneg(a(mid), "a") * std::exp(-Bmid) + nonneg(a(hi), "a") * std::exp(-Bhi));
    B = Bhi;
    out[i + 1] = std::exp(B) * (rho0 + I);
  }
  return out;
}

struct AprioriBounds {
  double M1 = 0.0;  // bound on 1 + |x(t)|
  double M2 = 0.0;  // bound on |x'(t)|
};

inline AprioriBounds apriori_bounds(const Vector& x0, double m_F, double beta, double T) {
  if (!(m_F >= 0.0) || !(beta >= 0.0) || !(T > 0.0)) throw DomainError("apriori_bounds: need m_F, beta >= 0 and T > 0");
  AprioriBounds b;
  b.M1 = (1.0 + x0.norm() + m_F / (beta + 1.0)) * std::exp(T * (beta + 1.0));
  b.M2 = m_F + beta * T * b.M1;
  return b;
}

}  // namespace idikit

#endif
