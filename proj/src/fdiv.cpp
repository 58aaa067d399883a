#include "udainv/fdiv.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "udainv/error.hpp"

namespace udainv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double xlogx(double x) { return x == 0.0 ? 0.0 : x * std::log(x); }

void require_nonnegative(const FDivergence& div, double x) {
  if (!(x >= 0.0))
    throw DomainError(div.name() + ": phi needs x >= 0, got " + std::to_string(x));
}

}  // namespace

std::string FDivergence::name() const {
  switch (kind_) {
    case DivergenceKind::KL: return "KL";
    case DivergenceKind::JS: return "JS";
    case DivergenceKind::PearsonChi2: return "PearsonChi2";
    case DivergenceKind::TotalVariation: return "TotalVariation";
  }
  return "?";
}

FDivergence divergence_by_name(std::string_view name) {
  for (DivergenceKind k : all_divergences())
    if (FDivergence(k).name() == name) return FDivergence(k);
  throw ValidationError("unknown divergence '" + std::string(name) +
                        "' (expected KL, JS, PearsonChi2 or TotalVariation)");
}

const std::array<DivergenceKind, 4>& all_divergences() {
  static const std::array<DivergenceKind, 4> kinds = {
      DivergenceKind::KL, DivergenceKind::JS, DivergenceKind::PearsonChi2,
      DivergenceKind::TotalVariation};
  return kinds;
}

double FDivergence::phi(double x) const {
  require_nonnegative(*this, x);
  switch (kind_) {
    case DivergenceKind::KL: return xlogx(x);
    case DivergenceKind::JS: return -(x + 1.0) * std::log((1.0 + x) / 2.0) + xlogx(x);
    case DivergenceKind::PearsonChi2: return (x - 1.0) * (x - 1.0);
    case DivergenceKind::TotalVariation: return 0.5 * std::fabs(x - 1.0);
  }
  return 0.0;
}

double FDivergence::phi_prime(double x) const {
  require_nonnegative(*this, x);
  switch (kind_) {
    case DivergenceKind::KL:
      if (x == 0.0) throw DomainError("KL: phi' undefined at 0");
      return std::log(x) + 1.0;
    case DivergenceKind::JS:
      if (x == 0.0) throw DomainError("JS: phi' undefined at 0");
      return std::log(2.0 * x / (1.0 + x));
    case DivergenceKind::PearsonChi2: return 2.0 * (x - 1.0);
    case DivergenceKind::TotalVariation: return x > 1.0 ? 0.5 : (x < 1.0 ? -0.5 : 0.0);
  }
  return 0.0;
}

Interval FDivergence::conjugate_domain() const {
  switch (kind_) {
    case DivergenceKind::JS: return {-kInf, std::numbers::ln2, true, true};
    case DivergenceKind::TotalVariation: return {-0.5, 0.5, false, false};
    default: return {-kInf, kInf, true, true};
  }
}

double FDivergence::conjugate(double t) const {
  if (!in_conjugate_domain(t))
    throw DomainError(name() + ": t = " + std::to_string(t) + " outside conjugate domain");
  switch (kind_) {
    case DivergenceKind::KL: return std::exp(t - 1.0);
    case DivergenceKind::JS: return -std::log(2.0 - std::exp(t));
    case DivergenceKind::PearsonChi2: return t >= -2.0 ? t + 0.25 * t * t : -1.0;
    case DivergenceKind::TotalVariation: return t;
  }
  return 0.0;
}

ad::Var FDivergence::conjugate(ad::Var t) const {
  const Tensor& v = t.value();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!in_conjugate_domain(v[i]))
      throw DomainError(name() + ": t = " + std::to_string(v[i]) + " at index " +
                        std::to_string(i) + " outside conjugate domain");
  switch (kind_) {
    case DivergenceKind::KL: return ad::exp(t - 1.0);
    case DivergenceKind::JS: return -ad::log(2.0 - ad::exp(t));
    case DivergenceKind::PearsonChi2: {
      ad::Var u = ad::clamp(t, -2.0, kInf);
      return u + 0.25 * ad::square(u);
    }
    case DivergenceKind::TotalVariation: return t;
  }
  return t;
}

GridSup conjugate_numeric_oracle(const FDivergence& div, double t, const Grid& grid) {
  if (grid.points < 2 || !(grid.hi > grid.lo) || grid.lo < 0.0)
    throw ValidationError("conjugate_numeric_oracle: need lo >= 0, hi > lo and >= 2 points");
  GridSup best{-kInf, grid.lo, false};
  std::size_t best_i = 0;
  const double h = (grid.hi - grid.lo) / static_cast<double>(grid.points - 1);
  for (std::size_t i = 0; i < grid.points; ++i) {
    const double x = grid.lo + h * static_cast<double>(i);
    const double v = x * t - div.phi(x);
    if (v > best.value) {
      best = {v, x, false};
      best_i = i;
    }
  }
  best.clipped = best_i == 0 || best_i + 1 == grid.points;
  return best;
}

double GaussianSpec::log_pdf(double x) const {
  const double z = (x - mean) / stddev;
  return -0.5 * z * z - std::log(stddev) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double GaussianSpec::pdf(double x) const { return std::exp(log_pdf(x)); }

namespace {

void check_gaussians(const GaussianSpec& p, const GaussianSpec& q) {
  if (!(p.stddev > 0.0) || !(q.stddev > 0.0))
    throw ValidationError("gaussian divergence: stddev must be positive");
}

}  // namespace

double quadrature_gaussian_divergence(const FDivergence& div, const GaussianSpec& p,
                                      const GaussianSpec& q) {
  check_gaussians(p, q);
  const double spread = 12.0 * std::max(p.stddev, q.stddev);
  const double a = std::min(p.mean, q.mean) - spread;
  const double b = std::max(p.mean, q.mean) + spread;
  auto integrand = [&](double x) {
    const double lq = q.log_pdf(x);
    const double lp = p.log_pdf(x);
    const double qx = std::exp(lq);
    if (div.kind() == DivergenceKind::PearsonChi2)
      return std::exp(2.0 * lp - lq) - 2.0 * std::exp(lp) + qx;
    return qx * div.phi(std::exp(lp - lq));
  };
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate(integrand, a, b, 20, 1e-13);
}

double closed_form_gaussian_divergence(const FDivergence& div, const GaussianSpec& p,
                                       const GaussianSpec& q) {
  check_gaussians(p, q);
  const double dm = p.mean - q.mean;
  if (div.kind() == DivergenceKind::KL) {
    return std::log(q.stddev / p.stddev) +
           (p.stddev * p.stddev + dm * dm) / (2.0 * q.stddev * q.stddev) - 0.5;
  }
  if (div.kind() == DivergenceKind::PearsonChi2 && p.stddev == q.stddev)
    return std::expm1(dm * dm / (p.stddev * p.stddev));
  return quadrature_gaussian_divergence(div, p, q);
}

namespace {

struct Moments {
  double mean;
  double var;  // unbiased
};

template <class F>
Moments moments(std::span<const double> xs, F f) {
  double m = 0.0, s = 0.0;
  std::size_t n = 0;
  for (double x : xs) {  // Welford
    const double v = f(x);
    ++n;
    const double d = v - m;
    m += d / static_cast<double>(n);
    s += d * (v - m);
  }
  return {m, n > 1 ? s / static_cast<double>(n - 1) : 0.0};
}

}  // namespace

Estimate nwj_estimate(const FDivergence& div, std::span<const double> samples_p,
                      std::span<const double> samples_q,
                      const std::function<double(double)>& witness) {
  if (samples_p.empty() || samples_q.empty())
    throw ValidationError("nwj_estimate: sample sets must be nonempty");
  for (std::size_t i = 0; i < samples_q.size(); ++i) {
    const double t = witness(samples_q[i]);
    if (!div.in_conjugate_domain(t))
      throw DomainError("nwj_estimate: witness value " + std::to_string(t) + " at q-sample " +
                        std::to_string(i) + " (x = " + std::to_string(samples_q[i]) +
                        ") outside the " + div.name() + " conjugate domain");
  }
  const Moments mp = moments(samples_p, witness);
  const Moments mq = moments(samples_q, [&](double x) { return div.conjugate(witness(x)); });
  const double se = std::sqrt(mp.var / static_cast<double>(samples_p.size()) +
                              mq.var / static_cast<double>(samples_q.size()));
  return {mp.mean - mq.mean, se};
}

double optimal_witness_eval(const FDivergence& div, const GaussianSpec& p, const GaussianSpec& q,
                            double x) {
  check_gaussians(p, q);
  const double qx = q.pdf(x);
  if (!(qx > 0.0))
    throw DomainError("optimal_witness_eval: q density is zero at x = " + std::to_string(x));
  const double px = p.pdf(x);
  if (!(px > 0.0))
    throw DomainError("optimal_witness_eval: p density is zero at x = " + std::to_string(x));
  return div.phi_prime(std::exp(p.log_pdf(x) - q.log_pdf(x)));
}

}  // namespace udainv
