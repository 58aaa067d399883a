#include "udainv/checks.hpp"

#include <cmath>
#include <random>

#include "udainv/fdiv.hpp"
#include "udainv/rng.hpp"
#include "udainv/uda.hpp"

namespace udainv {

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.values()) v = u(rng);
  return t;
}

// Entries with |x| in [0.2, 1], random sign: keeps kinks of abs/leaky out of reach.
Tensor away_from_zero(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t = random_tensor(std::move(shape), rng, 0.2, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (double& v : t.values())
    if (flip(rng)) v = -v;
  return t;
}

// Random linear readout so every output coordinate matters.
ad::Var readout(ad::Var y, const Tensor& weights) {
  return ad::sum(y * y.tape().constant(weights));
}

}  // namespace

std::vector<GradCheckCase> gradcheck_suite(std::uint64_t seed, double step) {
  Rng rng(derive_seed(seed, "gradcheck"));
  std::vector<GradCheckCase> out;
  auto check = [&](std::string name, const ad::ScalarFn& f, const Tensor& point) {
    out.push_back({std::move(name), ad::grad_check(f, point, step)});
  };

  const Tensor a = random_tensor({3, 4}, rng, -1.0, 1.0);
  const Tensor b = random_tensor({4, 2}, rng, -1.0, 1.0);
  const Tensor w34 = random_tensor({3, 4}, rng, -1.0, 1.0);
  const Tensor w32 = random_tensor({3, 2}, rng, -1.0, 1.0);
  const Tensor row = random_tensor({1, 4}, rng, -1.0, 1.0);
  const Tensor pos = random_tensor({3, 4}, rng, 0.5, 2.0);
  const Tensor nz = away_from_zero({3, 4}, rng);
  const Tensor w38 = random_tensor({3, 8}, rng, -1.0, 1.0);

  check("matmul", [&](ad::Tape& t, ad::Var x) { return readout(ad::matmul(x, t.constant(b)), w32); }, a);
  check("matmul_rhs", [&](ad::Tape& t, ad::Var x) { return readout(ad::matmul(t.constant(a), x), w32); }, b);
  check("add_broadcast", [&](ad::Tape& t, ad::Var x) { return readout(t.constant(a) + x, w34); }, row);
  check("sub", [&](ad::Tape& t, ad::Var x) { return readout(x - t.constant(pos), w34); }, a);
  check("mul", [&](ad::Tape& t, ad::Var x) { return readout(x * t.constant(a), w34); }, pos);
  check("div_numerator", [&](ad::Tape& t, ad::Var x) { return readout(x / t.constant(pos), w34); }, a);
  check("div_denominator", [&](ad::Tape& t, ad::Var x) { return readout(t.constant(a) / x, w34); }, pos);
  check("exp", [&](ad::Tape&, ad::Var x) { return readout(ad::exp(x), w34); }, a);
  check("log", [&](ad::Tape&, ad::Var x) { return readout(ad::log(x), w34); }, pos);
  check("tanh", [&](ad::Tape&, ad::Var x) { return readout(ad::tanh(x), w34); }, a);
  check("sigmoid", [&](ad::Tape&, ad::Var x) { return readout(ad::sigmoid(x), w34); }, a);
  check("leaky_relu", [&](ad::Tape&, ad::Var x) { return readout(ad::leaky_relu(x, 0.2), w34); }, nz);
  check("square", [&](ad::Tape&, ad::Var x) { return readout(ad::square(x), w34); }, a);
  check("abs", [&](ad::Tape&, ad::Var x) { return readout(ad::abs(x), w34); }, nz);
  check("sqrt", [&](ad::Tape&, ad::Var x) { return readout(ad::sqrt(x), w34); }, pos);
  check("clamp", [&](ad::Tape&, ad::Var x) { return readout(ad::clamp(x, -0.1, 0.1), w34); }, nz);
  check("clamp_inside", [&](ad::Tape&, ad::Var x) { return readout(ad::clamp(x, -2.0, 2.0), w34); }, a);
  check("sum", [&](ad::Tape&, ad::Var x) { return ad::sum(ad::square(x)); }, a);
  check("sum_axis0", [&](ad::Tape&, ad::Var x) { return readout(ad::sum(x, 0), row); }, a);
  check("sum_axis1", [&](ad::Tape& t, ad::Var x) { return ad::sum(ad::square(ad::sum(x, 1)) * t.constant(1.5)); }, a);
  check("mean", [&](ad::Tape&, ad::Var x) { return ad::mean(ad::exp(x)); }, a);
  check("mean_axis0", [&](ad::Tape&, ad::Var x) { return readout(ad::mean(x, 0), row); }, a);
  check("mean_axis1", [&](ad::Tape&, ad::Var x) { return ad::sum(ad::square(ad::mean(x, 1))); }, a);
  check("concat_axis1", [&](ad::Tape& t, ad::Var x) {
    return readout(ad::concat({x, t.constant(a)}, 1), w38);
  }, a);
  check("concat_axis0", [&](ad::Tape& t, ad::Var x) { return ad::sum(ad::square(ad::concat({t.constant(a), x}, 0))); }, a);
  check("slice_cols", [&](ad::Tape&, ad::Var x) { return ad::sum(ad::square(ad::slice_cols(x, 1, 3))); }, a);

  for (DivergenceKind k : all_divergences()) {
    const FDivergence div(k);
    // Points well inside every conjugate domain and away from the Pearson floor at -2.
    const Tensor t = random_tensor({2, 3}, rng, -0.45, 0.45);
    const Tensor wt = random_tensor({2, 3}, rng, -1.0, 1.0);
    check("conjugate_" + div.name(), [&](ad::Tape&, ad::Var x) { return readout(div.conjugate(x), wt); }, t);
  }

  // Network-level pieces on a micro-batch.
  GeneratorSpec g;
  const Networks nets = Networks::init(g, derive_seed(seed, "gradcheck/nets"));
  const MlpParams hhat = perturbed_copy(nets.perceptual.mlp, 0.1, derive_seed(seed, "gradcheck/hhat"));
  const Tensor latents = random_tensor({3, g.latent_dim}, rng, -2.0, 2.0);
  const Tensor pix = random_tensor({3, g.pixels()}, rng, 0.0, 1.0);
  const Tensor pix2 = random_tensor({3, g.pixels()}, rng, 0.0, 1.0);
  const Tensor src = random_tensor({4, g.pixels()}, rng, 0.0, 1.0);
  const Tensor trg = random_tensor({4, g.pixels()}, rng, 0.0, 1.0);
  const Tensor wpix = random_tensor({3, g.pixels()}, rng, -1.0, 1.0);

  check("generate", [&](ad::Tape&, ad::Var x) { return readout(generate(g, x), wpix); }, latents);
  check("unit_rows", [&](ad::Tape&, ad::Var x) { return readout(unit_rows(x), wpix); }, pix);
  check("lpips_rows", [&](ad::Tape& t, ad::Var x) {
    const BoundNet h = bind(t, nets.perceptual.mlp, false);
    return ad::sum(lpips_rows(feature_stack(h, x), feature_stack(h, t.constant(pix2))));
  }, pix);
  check("identity_rows", [&](ad::Tape& t, ad::Var x) {
    return ad::sum(ad::square(identity_rows(bind(t, nets.identity.mlp, false), x) -
                              identity_rows(bind(t, nets.identity.mlp, false), t.constant(pix2))));
  }, pix);

  // Reconstruction objective with respect to encoder weights.
  const LossWeights weights;
  auto source_objective = [&](std::size_t param) {
    return [&, param](ad::Tape& t, ad::Var x) {
      BoundNet e = bind(t, nets.encoder.mlp, false);
      e.params[param] = x;
      return source_loss(g, e, bind(t, nets.perceptual.mlp, false), bind(t, nets.identity.mlp, false),
                         t.constant(src), weights);
    };
  };
  const std::size_t last_w = nets.encoder.mlp.params.size() - 2;
  check("source_loss/encoder.W_last", source_objective(last_w), nets.encoder.mlp.params[last_w]);
  check("source_loss/encoder.b0", source_objective(1), nets.encoder.mlp.params[1]);

  // Discrepancy objective with respect to encoder and H-hat weights, Pearson chi^2.
  const FDivergence pearson(DivergenceKind::PearsonChi2);
  auto dst_encoder = [&](std::size_t param) {
    return [&, param](ad::Tape& t, ad::Var x) {
      BoundNet e = bind(t, nets.encoder.mlp, false);
      e.params[param] = x;
      return d_st(g, e, bind(t, nets.perceptual.mlp, false), bind(t, hhat, false), t.constant(src),
                  t.constant(trg), pearson);
    };
  };
  auto dst_hhat = [&](std::size_t param) {
    return [&, param](ad::Tape& t, ad::Var x) {
      BoundNet hh = bind(t, hhat, false);
      hh.params[param] = x;
      return d_st(g, bind(t, nets.encoder.mlp, false), bind(t, nets.perceptual.mlp, false), hh,
                  t.constant(src), t.constant(trg), pearson);
    };
  };
  check("d_st/encoder.W_last", dst_encoder(last_w), nets.encoder.mlp.params[last_w]);
  check("d_st/encoder.b0", dst_encoder(1), nets.encoder.mlp.params[1]);
  const std::size_t hh_last = hhat.params.size() - 2;
  check("d_st/hhat.W_last", dst_hhat(hh_last), hhat.params[hh_last]);
  check("d_st/hhat.b0", dst_hhat(1), hhat.params[1]);
  return out;
}

std::vector<DivCheckLine> divcheck_suite(std::uint64_t seed, std::size_t samples) {
  std::vector<DivCheckLine> out;
  const Grid grid{1e-9, 60.0, 600001};
  for (DivergenceKind k : all_divergences()) {
    const FDivergence div(k);
    const Interval dom = div.conjugate_domain();
    double worst = 0.0, worst_t = 0.0;
    for (int i = 0; i <= 40; ++i) {
      double t = -2.0 + 0.1 * i;
      t = std::max(t, std::isfinite(dom.lo) ? dom.lo + 1e-3 : t);
      t = std::min(t, std::isfinite(dom.hi) ? dom.hi - 1e-3 : t);
      if (!dom.contains(t)) continue;
      const GridSup sup = conjugate_numeric_oracle(div, t, grid);
      if (sup.clipped) continue;
      const double err = std::fabs(sup.value - div.conjugate(t));
      if (err > worst) {
        worst = err;
        worst_t = t;
      }
    }
    out.push_back({"conjugate_" + div.name() + " (worst t=" + std::to_string(worst_t) + ")",
                   worst, 0.0, 1e-4, worst <= 1e-4});
  }

  Rng rng(derive_seed(seed, "divcheck"));
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](const GaussianSpec& s) {
    std::vector<double> v(samples);
    for (double& x : v) x = s.mean + s.stddev * normal(rng);
    return v;
  };
  struct Case {
    DivergenceKind kind;
    GaussianSpec p, q;
    double tol;
    bool relative;
  };
  const Case cases[] = {{DivergenceKind::KL, {0, 1}, {1, 1}, 0.02, false},
                        {DivergenceKind::PearsonChi2, {1, 1}, {0, 1}, 0.05, true}};
  for (const Case& c : cases) {
    const FDivergence div(c.kind);
    const std::vector<double> sp = draw(c.p), sq = draw(c.q);
    const double truth = closed_form_gaussian_divergence(div, c.p, c.q);
    const auto optimal = [&](double x) { return optimal_witness_eval(div, c.p, c.q, x); };
    const Estimate e = nwj_estimate(div, sp, sq, optimal);
    const double tol = c.relative ? c.tol * truth : c.tol;
    out.push_back({"nwj_optimal_" + div.name(), e.value, truth, tol, std::fabs(e.value - truth) <= tol});
    // Restricted witnesses: scaled and shifted optimal witness, constant, linear.
    const std::vector<std::pair<std::string, std::function<double(double)>>> restricted = {
        {"half", [&](double x) { return 0.5 * optimal(x); }},
        {"shifted", [&](double x) { return optimal(x) - 0.1; }},
        {"constant", [](double) { return 0.0; }},
        {"linear", [](double x) { return 0.2 * x; }}};
    for (const auto& [name, wit] : restricted) {
      const Estimate r = nwj_estimate(div, sp, sq, wit);
      out.push_back({"nwj_restricted_" + name + "_" + div.name() + " (upper bound + 3se)", r.value,
                     truth, 3.0 * r.std_error, r.value <= truth + 3.0 * r.std_error});
    }
  }
  return out;
}

}  // namespace udainv
