#include <cmath>
#include <random>
#include <sstream>

#include <doctest.h>

#include "support.hpp"
#include "udainv/error.hpp"
#include "udainv/uda.hpp"

using namespace udainv;
using testsupport::normal_latent;
using testsupport::TempDir;

namespace {

Tensor render_batch(const GeneratorSpec& g, std::size_t n, std::uint64_t seed,
                    DegradationKind deg = DegradationKind::None) {
  std::mt19937_64 rng(seed);
  std::vector<Image> xs;
  for (std::size_t i = 0; i < n; ++i) {
    DegradationSpec d;
    d.kind = deg;
    d.seed = seed * 1000 + i;
    xs.push_back(degrade(generate(g, normal_latent(rng)), d));
  }
  return batch_tensor(std::span<const Image>(xs));
}

double pixel_mse(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

Tensor invert_plain(const Networks& n, const Tensor& x) {
  ad::Tape t;
  return generate(n.generator, encode(bind(t, n.encoder.mlp, false), t.constant(x))).value();
}

DomainDataset small_split(const GeneratorSpec& g, std::uint64_t seed) {
  DegradationSpec d;
  d.kind = DegradationKind::Mask;
  return sample_training_split(g, 64, 64, d, seed);
}

TrainConfig quick_config(std::size_t iterations) {
  TrainConfig c;
  c.iterations = iterations;
  c.batch_size = 8;
  return c;
}

}  // namespace

TEST_SUITE("uda") {
  TEST_CASE("zero point: H-hat equal to H gives -phi*(0), zero for phi*(0) = 0") {
    GeneratorSpec g;
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Networks n = Networks::init(g, s);
      REQUIRE(n.adversarial.mlp == n.perceptual.mlp);
      const Tensor src = render_batch(g, 5, 10 + s);
      const Tensor trg = render_batch(g, 7, 20 + s, DegradationKind::Rain);
      for (DivergenceKind k : all_divergences()) {
        const FDivergence div(k);
        const double d = d_st_value(n, src, trg, div);
        if (k == DivergenceKind::KL)
          CHECK(std::fabs(d + std::exp(-1.0)) <= 1e-15);
        else
          CHECK(d == 0.0);
      }
    }
  }

  TEST_CASE("source loss: perfect inversion is zero, weights reduce to pixel MSE") {
    GeneratorSpec g;
    const Networks n = Networks::init(g, 3);
    const Tensor x = render_batch(g, 6, 3);

    // Encoder replaced by a constant head that returns the true latents.
    std::mt19937_64 rng(3);
    std::vector<LatentCode> ws;
    for (int i = 0; i < 6; ++i) ws.push_back(normal_latent(rng));
    ad::Tape t;
    ad::Var recon = generate(g, t.constant(batch_tensor(std::span<const LatentCode>(ws))));
    const double perfect = reconstruction_loss_from_recon(bind(t, n.perceptual.mlp, false), bind(t, n.identity.mlp, false),
                                                          recon, t.constant(x), LossWeights{})
                               .item();
    CHECK(perfect == 0.0);

    const LossWeights pixel_only{1.0, 0.0, 0.0};
    CHECK(source_loss_value(n, x, pixel_only) == doctest::Approx(pixel_mse(invert_plain(n, x), x)).epsilon(1e-12));
    CHECK(source_loss_value(n, x, LossWeights{}) > source_loss_value(n, x, pixel_only));
  }

  TEST_CASE("objective gradients pass central differences") {
    GeneratorSpec g;
    for (std::uint64_t s = 0; s < 3; ++s) {
      const Networks n = Networks::init(g, 40 + s);
      const MlpParams hhat = perturbed_copy(n.perceptual.mlp, 0.1, 50 + s);
      const Tensor src = render_batch(g, 4, 60 + s);
      const Tensor trg = render_batch(g, 4, 70 + s, DegradationKind::Mask);
      const FDivergence div(DivergenceKind::PearsonChi2);
      // Every bias and the output matrix; the wide input matrices cost too many evaluations.
      std::vector<std::size_t> params;
      for (std::size_t p = 1; p < n.encoder.mlp.params.size(); p += 2) params.push_back(p);
      params.push_back(n.encoder.mlp.params.size() - 2);
      {
        for (std::size_t q : params) {
          const double es = ad::grad_check(
              [&](ad::Tape& t, ad::Var x) {
                BoundNet e = bind(t, n.encoder.mlp, false);
                e.params[q] = x;
                return source_loss(g, e, bind(t, n.perceptual.mlp, false), bind(t, n.identity.mlp, false),
                                   t.constant(src), LossWeights{});
              },
              n.encoder.mlp.params[q], 1e-5);
          INFO("seed ", s, " encoder param ", q);
          CHECK(es < 1e-5);
          const double ed = ad::grad_check(
              [&](ad::Tape& t, ad::Var x) {
                BoundNet e = bind(t, n.encoder.mlp, false);
                e.params[q] = x;
                return d_st(g, e, bind(t, n.perceptual.mlp, false), bind(t, hhat, false), t.constant(src),
                            t.constant(trg), div);
              },
              n.encoder.mlp.params[q], 1e-5);
          CHECK(ed < 1e-5);
        }
      }
      for (std::size_t q = 0; q < hhat.params.size(); ++q) {
        if (q % 2 == 0 && q + 2 != hhat.params.size()) continue;  // skip the wide input matrices
        const double eh = ad::grad_check(
            [&](ad::Tape& t, ad::Var x) {
              BoundNet hh = bind(t, hhat, false);
              hh.params[q] = x;
              return d_st(g, bind(t, n.encoder.mlp, false), bind(t, n.perceptual.mlp, false), hh,
                          t.constant(src), t.constant(trg), div);
            },
            hhat.params[q], 1e-5);
        INFO("seed ", s, " hhat param ", q);
        CHECK(eh < 1e-5);
      }
    }
  }

  TEST_CASE("inner step: ascent from the zero point, freeze contract, zero learning rate") {
    GeneratorSpec g;
    const FDivergence div(DivergenceKind::PearsonChi2);
    int nonnegative = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      Networks n = Networks::init(g, s);
      const EncoderParams e_before = n.encoder;
      const FeatureNetParams h_before = n.perceptual, r_before = n.identity;
      AdamState opt = AdamState::for_params(n.adversarial.mlp.params, {1e-3});
      const Tensor src = render_batch(g, 4, 500 + s);
      const Tensor trg = render_batch(g, 4, 900 + s, DegradationKind::Mask);
      const double before = inner_max_step(n, src, trg, div, opt);
      CHECK(before == 0.0);
      nonnegative += d_st_value(n, src, trg, div) >= 0.0;
      CHECK(n.encoder == e_before);
      CHECK(n.perceptual == h_before);
      CHECK(n.identity == r_before);
    }
    CHECK(nonnegative >= 95);

    Networks n = Networks::init(g, 7);
    n.adversarial.mlp = perturbed_copy(n.perceptual.mlp, 0.1, 8);
    const MlpParams before = n.adversarial.mlp;
    AdamState frozen = AdamState::for_params(n.adversarial.mlp.params, {0.0});
    inner_max_step(n, render_batch(g, 4, 1), render_batch(g, 4, 2, DegradationKind::Mask), div, frozen);
    CHECK(n.adversarial.mlp == before);

    // A small ascent step from a perturbed H-hat raises d on its own batch.
    AdamState opt = AdamState::for_params(n.adversarial.mlp.params, {1e-6});
    const Tensor src = render_batch(g, 8, 3), trg = render_batch(g, 8, 4, DegradationKind::Mask);
    const double d0 = inner_max_step(n, src, trg, div, opt);
    CHECK(d_st_value(n, src, trg, div) > d0);
  }

  TEST_CASE("perturbed copy keeps biases and is seeded") {
    GeneratorSpec g;
    const Networks n = Networks::init(g, 1);
    const MlpParams a = perturbed_copy(n.perceptual.mlp, 0.1, 5);
    CHECK(a == perturbed_copy(n.perceptual.mlp, 0.1, 5));
    CHECK_FALSE(a == perturbed_copy(n.perceptual.mlp, 0.1, 6));
    CHECK(perturbed_copy(n.perceptual.mlp, 0.0, 5) == n.perceptual.mlp);
    CHECK(a.shapes() == n.perceptual.mlp.shapes());
    for (std::size_t i = 1; i < a.params.size(); i += 2) CHECK(a.params[i] == n.perceptual.mlp.params[i]);
  }

  TEST_CASE("train: determinism, frozen networks, alternation order") {
    GeneratorSpec g;
    const DomainDataset data = small_split(g, 2);
    const TrainConfig cfg = quick_config(30);
    const TrainState init = TrainState::init(g, cfg);
    CHECK_FALSE(init.nets.adversarial.mlp == init.nets.perceptual.mlp);
    CHECK(init.nets.adversarial.mlp.shapes() == init.nets.perceptual.mlp.shapes());

    const TrainResult a = train(cfg, data, init);
    const TrainResult b = train(cfg, data, init);
    CHECK(to_checkpoint(a.state, "x") == to_checkpoint(b.state, "x"));
    REQUIRE(a.trace.size() == 30);
    for (std::size_t i = 0; i < 30; ++i) {
      CHECK(a.trace[i].iteration == i + 1);
      CHECK(a.trace[i].total == b.trace[i].total);
      CHECK(a.trace[i].total == doctest::Approx(a.trace[i].source + cfg.lambda_uda * a.trace[i].discrepancy).epsilon(1e-12));
    }
    CHECK(a.state.nets.perceptual == init.nets.perceptual);
    CHECK(a.state.nets.identity == init.nets.identity);
    CHECK_FALSE(a.state.nets.encoder == init.nets.encoder);
    CHECK_FALSE(a.state.nets.adversarial == init.nets.adversarial);
    CHECK(a.state.encoder_opt.step == 30);
    CHECK(a.state.hhat_opt.step == 30 * cfg.inner_steps);

  }

  TEST_CASE("train: lambda_uda = 0 is source-only training") {
    GeneratorSpec g;
    const DomainDataset data = small_split(g, 3);
    TrainConfig cfg = quick_config(20);
    cfg.lambda_uda = 0.0;
    const TrainState init = TrainState::init(g, cfg);
    const TrainResult with_trg = train(cfg, data, init);

    DomainDataset src_only;
    for (const Record& r : data.records)
      if (r.domain == Domain::Source) src_only.records.push_back(r);
    const TrainResult without = train(cfg, src_only, init);
    CHECK(with_trg.state.nets.encoder == without.state.nets.encoder);
    for (std::size_t i = 0; i < 20; ++i) {
      CHECK(with_trg.trace[i].source == without.trace[i].source);
      CHECK(with_trg.trace[i].total == with_trg.trace[i].source);
    }
    // H-hat keeps ascending for the logged d, E ignores it.
    CHECK_FALSE(with_trg.state.nets.adversarial == init.nets.adversarial);

    cfg.lambda_uda = 1.0;
    CHECK_THROWS_AS(train(cfg, src_only, init), ValidationError);
    cfg.batch_size = 1;
    CHECK_THROWS_AS(train(cfg, data, init), ValidationError);
    cfg.batch_size = 8;
    cfg.weights.pixel = -1;
    CHECK_THROWS_AS(train(cfg, data, init), ValidationError);
  }

  TEST_CASE("train: non-finite loss aborts with the last finite state") {
    GeneratorSpec g;
    DomainDataset data = small_split(g, 4);
    for (Record& r : data.records)
      if (r.domain == Domain::Source && r.filename.find("000040") != std::string::npos)
        r.image.pixels[5] = std::nan("");
    TrainConfig cfg = quick_config(200);
    const TrainState init = TrainState::init(g, cfg);
    std::size_t at = 0;
    TrainState last;
    try {
      train(cfg, data, init);
      FAIL("expected TrainingDiverged");
    } catch (const TrainingDiverged& e) {
      at = e.iteration();
      last = e.last_finite_state();
      CHECK(std::string(e.what()).find(std::to_string(at)) != std::string::npos);
    }
    REQUIRE(at >= 1);
    TrainConfig shorter = cfg;
    shorter.iterations = at - 1;
    const TrainState expected = at == 1 ? init : train(shorter, data, init).state;
    CHECK(to_checkpoint(last, "") == to_checkpoint(expected, ""));
  }

  TEST_CASE("checkpoint round trip and shape rejection") {
    GeneratorSpec g;
    const TrainConfig cfg = quick_config(5);
    const TrainState s = train(cfg, small_split(g, 5), TrainState::init(g, cfg)).state;
    TempDir dir("ckpt");
    save_checkpoint(to_checkpoint(s, "seed=5\n"), dir / "c.bin");
    const Checkpoint c = load_checkpoint(dir / "c.bin");
    CHECK(c.config_text == "seed=5\n");
    const TrainState back = state_from_checkpoint(c, g);
    CHECK(back.nets.encoder == s.nets.encoder);
    CHECK(back.nets.adversarial == s.nets.adversarial);
    CHECK(back.nets.perceptual == s.nets.perceptual);
    CHECK(back.nets.identity == s.nets.identity);
    CHECK(back.encoder_opt.step == s.encoder_opt.step);
    CHECK(back.encoder_opt.m == s.encoder_opt.m);
    CHECK(back.hhat_opt.v == s.hhat_opt.v);

    GeneratorSpec wide = g;
    wide.latent_dim = 12;
    CHECK_THROWS_AS(state_from_checkpoint(c, wide), ValidationError);
    Checkpoint missing = c;
    missing.tensors.pop_back();
    CHECK_THROWS_AS(state_from_checkpoint(missing, g), FormatError);
  }

  TEST_CASE("metrics log rows") {
    std::vector<IterationMetrics> trace;
    for (std::size_t i = 1; i <= 120; ++i) trace.push_back({i, 0.5, -0.25, 0.25});
    const std::string csv = metrics_csv(trace, 50);
    std::istringstream in(csv);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(in, line)) rows.push_back(line);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0] == "iteration,L_s,d_st,total");
    CHECK(rows[1] == "1,0.5,-0.25,0.25");
    CHECK(rows[2].rfind("50,", 0) == 0);
    CHECK(rows[3].rfind("100,", 0) == 0);
    CHECK(rows[4].rfind("120,", 0) == 0);
  }

  TEST_CASE("audit: saturated clamp gives unit risks") {
    GeneratorSpec g;
    const Networks n = Networks::init(g, 2);
    DegradationSpec none;
    const DomainDataset eval = sample_paired_eval(g, 16, none, 3);
    const DomainDataset train_data = sample_training_split(g, 32, 32, none, 4);
    TrainConfig tc = quick_config(10);
    AuditConfig ac;
    ac.ascent_steps = 10;
    ac.joint_iterations = 10;
    ac.clamp_scale = 1e-30;
    const BoundAuditReport r = audit_bound(n, eval, train_data, FDivergence(DivergenceKind::PearsonChi2), tc, ac);
    CHECK(r.risk_target == 1.0);
    CHECK(r.risk_source == 1.0);
    CHECK(r.slack == doctest::Approx(r.discrepancy + r.joint_risk).epsilon(1e-12));
    CHECK(r.slack >= 0.0);
    CHECK(r.holds);

    DomainDataset unpaired = eval;
    for (Record& rec : unpaired.records) rec.paired = false;
    CHECK_THROWS_AS(audit_bound(n, unpaired, train_data, FDivergence(DivergenceKind::PearsonChi2), tc, ac),
                    ValidationError);
  }

  TEST_CASE("audit: untrained encoder on identical domains") {
    GeneratorSpec g;
    const Networks n = Networks::init(g, 6);
    DegradationSpec none;
    const DomainDataset eval = sample_paired_eval(g, 64, none, 7);
    const DomainDataset train_data = sample_training_split(g, 128, 128, none, 8);
    TrainConfig tc = quick_config(100);
    AuditConfig ac;
    ac.ascent_steps = 100;
    ac.joint_iterations = 100;
    const BoundAuditReport r = audit_bound(n, eval, train_data, FDivergence(DivergenceKind::PearsonChi2), tc, ac);
    CHECK(r.risk_source == r.risk_target);
    for (double v : {r.risk_source, r.risk_target}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(r.clamp_scale > 0.0);
    CHECK(r.slack >= -3.0 * r.sigma);
    CHECK(r.holds);
    const std::string text = r.to_text();
    for (const char* key : {"R_t=", "R_s=", "D_hat=", "lambda_star_hat=", "slack=", "sigma=", "holds="})
      CHECK(text.find(key) != std::string::npos);
  }
}
