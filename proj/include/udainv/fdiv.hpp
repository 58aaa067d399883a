#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <string_view>

#include "udainv/autodiff.hpp"

namespace udainv {

enum class DivergenceKind { KL, JS, PearsonChi2, TotalVariation };

struct Interval {
  double lo;
  double hi;
  bool lo_open;
  bool hi_open;

  bool contains(double t) const {
    const bool above = lo_open ? t > lo : t >= lo;
    const bool below = hi_open ? t < hi : t <= hi;
    return above && below;
  }
};

// Convex generator phi with phi(1) = 0, its derivative and Fenchel conjugate
// phi*(t) = sup_{x >= 0} { x t - phi(x) }.
class FDivergence {
 public:
  explicit FDivergence(DivergenceKind kind) : kind_(kind) {}

  DivergenceKind kind() const { return kind_; }
  std::string name() const;

  double phi(double x) const;
  double phi_prime(double x) const;  // TotalVariation: subgradient 0 at x = 1
  double conjugate(double t) const;
  Interval conjugate_domain() const;
  bool in_conjugate_domain(double t) const { return conjugate_domain().contains(t); }

  // Elementwise phi* on a tape. Throws DomainError if any entry is outside the
  // conjugate domain.
  ad::Var conjugate(ad::Var t) const;

 private:
  DivergenceKind kind_;
};

FDivergence divergence_by_name(std::string_view name);
const std::array<DivergenceKind, 4>& all_divergences();

struct Grid {
  double lo;
  double hi;
  std::size_t points;
};

struct GridSup {
  double value;
  double argmax;
  bool clipped;  // maximiser sits on a grid edge
};

// Brute-force sup_x { x t - phi(x) } over a uniform grid.
GridSup conjugate_numeric_oracle(const FDivergence& div, double t, const Grid& grid);

struct GaussianSpec {
  double mean = 0.0;
  double stddev = 1.0;

  double pdf(double x) const;
  double log_pdf(double x) const;
};

// D_phi(P || Q) = \int q(x) phi(p(x) / q(x)) dx by adaptive Gauss-Kronrod quadrature.
double quadrature_gaussian_divergence(const FDivergence& div, const GaussianSpec& p,
                                      const GaussianSpec& q);
// Closed form for KL and equal-variance Pearson chi^2; quadrature otherwise.
double closed_form_gaussian_divergence(const FDivergence& div, const GaussianSpec& p,
                                       const GaussianSpec& q);

struct Estimate {
  double value;
  double std_error;
};

// Signed variational lower bound E_P[T] - E_Q[phi*(T)].
Estimate nwj_estimate(const FDivergence& div, std::span<const double> samples_p,
                      std::span<const double> samples_q,
                      const std::function<double(double)>& witness);

// phi'(p(x) / q(x)), the witness that attains the variational bound.
double optimal_witness_eval(const FDivergence& div, const GaussianSpec& p, const GaussianSpec& q,
                            double x);

}  // namespace udainv
