#include <cmath>
#include <random>

#include <doctest.h>

#include "udainv/editctl.hpp"
#include "udainv/error.hpp"
#include "udainv/nets.hpp"
#include "udainv/synthdeg.hpp"
#include "udainv/uda.hpp"

using namespace udainv;

namespace {

LatentCode random_latent(std::mt19937_64& rng, std::size_t d = 8) {
  std::normal_distribution<double> n(0, 1);
  LatentCode w;
  for (std::size_t i = 0; i < d; ++i) w.w.push_back(n(rng));
  return w;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Direct pixel formula of the renderer, written independently of the tape.
Image render_oracle(const GeneratorSpec& g, const LatentCode& w) {
  Image img(g.grid);
  double p[8];
  for (int i = 0; i < 8; ++i) p[i] = sigmoid(w.w[i]);
  const double m = g.position_margin, e = static_cast<double>(g.grid - 1) - 2 * m;
  const double s1 = g.width_min + p[2] * (g.width_max - g.width_min);
  const double s2 = g.width_min + p[6] * (g.width_max - g.width_min);
  const double a1 = g.amp1_min + p[3] * (g.amp1_max - g.amp1_min);
  const double bg = g.background_min + p[7] * (g.background_max - g.background_min);
  for (std::size_t r = 0; r < g.grid; ++r)
    for (std::size_t c = 0; c < g.grid; ++c) {
      const double x = static_cast<double>(c), y = static_cast<double>(r);
      const double b1 = std::exp(-(std::pow(x - m - p[0] * e, 2) + std::pow(y - m - p[1] * e, 2)) / (2 * s1 * s1));
      const double b2 = std::exp(-(std::pow(x - m - p[4] * e, 2) + std::pow(y - m - p[5] * e, 2)) / (2 * s2 * s2));
      img.at(r, c) = std::clamp(bg + a1 * b1 + g.amp2 * b2, 0.0, 1.0);
    }
  return img;
}

}  // namespace

TEST_SUITE("nets") {
  TEST_CASE("generator matches a direct pixel formula") {
    GeneratorSpec g;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) {
      const LatentCode w = random_latent(rng);
      const Image a = generate(g, w), b = render_oracle(g, w);
      for (std::size_t k = 0; k < a.pixels.size(); ++k) CHECK(a.pixels[k] == doctest::Approx(b.pixels[k]).epsilon(1e-13));
    }
  }

  TEST_CASE("generator examples") {
    GeneratorSpec g;
    const Image centred = generate(g, LatentCode{std::vector<double>(8, 0.0)});
    // Symmetric about the grid centre (7.5, 7.5).
    for (std::size_t r = 0; r < 16; ++r)
      for (std::size_t c = 0; c < 16; ++c) CHECK(centred.at(r, c) == doctest::Approx(centred.at(15 - r, 15 - c)).epsilon(1e-14));
    CHECK(attribute_probe(centred) == doctest::Approx(0.5).epsilon(1e-12));
    std::mt19937_64 rng(2);
    for (int i = 0; i < 50; ++i) {
      LatentCode w = random_latent(rng);
      const double before = attribute_probe(generate(g, w));
      w.w[0] += 0.5;
      CHECK(attribute_probe(generate(g, w)) > before);
    }
    const LatentCode w = random_latent(rng);
    CHECK(generate(g, w) == generate(g, w));
    for (double v : generate(g, LatentCode{std::vector<double>(8, 30.0)}).pixels) CHECK((v >= 0.0 && v <= 1.0));
    CHECK_THROWS_AS(generate(g, LatentCode{std::vector<double>(7, 0.0)}), ShapeError);
    GeneratorSpec wide;
    wide.latent_dim = 10;
    LatentCode w10 = w;
    w10.w.push_back(3.0);
    w10.w.push_back(-1.0);
    CHECK(generate(wide, w10) == generate(g, w));
  }

  TEST_CASE("generator is differentiable in w") {
    GeneratorSpec g;
    std::mt19937_64 rng(3);
    for (int i = 0; i < 10; ++i) {
      const LatentCode w = random_latent(rng);
      INFO("latent ", i);
      const double err = ad::grad_check([&](ad::Tape&, ad::Var x) { return ad::mean(generate(g, x)); },
                                        Tensor({1, 8}, w.w), 1e-5);
      CHECK(err < 1e-6);
    }
  }

  TEST_CASE("architectures and initialisation") {
    GeneratorSpec g;
    const Networks n = Networks::init(g, 9);
    CHECK(n.encoder.mlp.dims == std::vector<std::size_t>{256, 128, 64, 8});
    CHECK(n.perceptual.mlp.dims == std::vector<std::size_t>{256, 64, 32, 16});
    CHECK(n.identity.mlp.dims == std::vector<std::size_t>{256, 64, 32, 16});
    CHECK(n.adversarial.mlp.shapes() == n.perceptual.mlp.shapes());
    CHECK(n.adversarial.mlp == n.perceptual.mlp);
    CHECK(n.adversarial.role == FeatureRole::Adversarial);
    CHECK_FALSE(n.identity.mlp == n.perceptual.mlp);
    CHECK(Networks::init(g, 9).encoder == n.encoder);
    CHECK_FALSE(Networks::init(g, 10).encoder == n.encoder);
    // He-normal weight scale on the first encoder layer, zero biases.
    const Tensor& w0 = n.encoder.mlp.params[0];
    double ss = 0;
    for (double v : w0.values()) ss += v * v;
    const double sd = std::sqrt(ss / static_cast<double>(w0.size()));
    CHECK(sd == doctest::Approx(std::sqrt(2.0 / 1.04 / 256.0)).epsilon(0.03));
    for (double v : n.encoder.mlp.params[1].values()) CHECK(v == 0.0);
  }

  TEST_CASE("encoder contract") {
    GeneratorSpec g;
    const Networks n = Networks::init(g, 4);
    std::mt19937_64 rng(4);
    const LatentCode w = encode(n.encoder, generate(g, random_latent(rng)));
    CHECK(w.w.size() == 8);
    CHECK_THROWS_AS(encode(n.encoder, Image(8)), ShapeError);
    const Tensor imgs = batch_tensor(std::vector<Image>{generate(g, random_latent(rng)), generate(g, random_latent(rng))});
    const std::size_t last = n.encoder.mlp.params.size() - 2;
    const double err = ad::grad_check(
        [&](ad::Tape& t, ad::Var x) {
          BoundNet e = bind(t, n.encoder.mlp, false);
          e.params[last] = x;
          return ad::sum(ad::square(encode(e, t.constant(imgs))));
        },
        n.encoder.mlp.params[last], 1e-5);
    CHECK(err < 1e-5);
  }

  TEST_CASE("trained encoder beats an untrained one on latent error") {
    GeneratorSpec g;
    TrainConfig cfg;
    cfg.iterations = 2000;
    Networks n = Networks::init(g, 5);
    const DomainDataset data = sample_domain(g, 2000, Domain::Source, {}, 5);
    std::vector<Image> x = data.images(Domain::Source);
    const EncoderParams trained = train_supervised(cfg, n, x, x, 5);
    const DomainDataset eval = sample_domain(g, 200, Domain::Source, {}, 6);
    auto latent_error = [&](const EncoderParams& e) {
      double s = 0;
      for (const Record& r : eval.records) {
        const LatentCode w = encode(e, r.image);
        for (std::size_t i = 0; i < 8; ++i) s += std::fabs(w.w[i] - r.latent->w[i]);
      }
      return s;
    };
    CHECK(latent_error(trained) < latent_error(n.encoder));
  }

  TEST_CASE("lpips-style distance") {
    GeneratorSpec g;
    const Networks n = Networks::init(g, 6);
    std::mt19937_64 rng(6);
    const Image a = generate(g, random_latent(rng)), b = generate(g, random_latent(rng));
    CHECK(lpips_distance(n.perceptual, a, a) == 0.0);
    CHECK(lpips_distance(n.perceptual, a, b) > 0.0);
    CHECK(lpips_distance(n.perceptual, a, b) == doctest::Approx(lpips_distance(n.perceptual, b, a)).epsilon(1e-15));
    CHECK_THROWS_AS(lpips_distance(n.identity, a, b), ValidationError);

    // Heavier masks move the features further, majority over 100 seeds.
    int wins = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const Image x = generate(g, random_latent(rng));
      DegradationSpec light, heavy;
      light.kind = heavy.kind = DegradationKind::Mask;
      light.seed = heavy.seed = s;
      light.mask.steps = 8;
      heavy.mask.steps = 80;
      if (lpips_distance(n.perceptual, x, degrade(x, heavy)) > lpips_distance(n.perceptual, x, degrade(x, light))) ++wins;
    }
    CHECK(wins > 50);
  }

  TEST_CASE("identity embedding") {
    GeneratorSpec g;
    const Networks n = Networks::init(g, 7);
    std::mt19937_64 rng(7);
    int below = 0;
    for (int i = 0; i < 100; ++i) {
      const Image a = generate(g, random_latent(rng)), b = generate(g, random_latent(rng));
      const std::vector<double> ea = identity_embed(n.identity, a), eb = identity_embed(n.identity, b);
      double na = 0, dot = 0, self = 0;
      for (std::size_t k = 0; k < ea.size(); ++k) {
        na += ea[k] * ea[k];
        dot += ea[k] * eb[k];
        self += ea[k] * ea[k];
      }
      CHECK(na == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(self == doctest::Approx(1.0).epsilon(1e-12));
      if (dot < 1.0 - 1e-9) ++below;
    }
    CHECK(below == 100);
    CHECK_THROWS_AS(identity_embed(n.perceptual, Image(16)), ValidationError);
    // All-zero final activations fall back to the first basis vector.
    FeatureNetParams zero = n.identity;
    for (Tensor& t : zero.mlp.params) t = Tensor(t.shape(), 0.0);
    const std::vector<double> e = identity_embed(zero, Image(16, 0.5));
    CHECK(e[0] == 1.0);
    for (std::size_t k = 1; k < e.size(); ++k) CHECK(e[k] == 0.0);
  }
}
