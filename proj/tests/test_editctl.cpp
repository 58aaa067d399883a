#include <cmath>
#include <numeric>
#include <random>

#include <doctest.h>

#include "support.hpp"
#include "udainv/editctl.hpp"
#include "udainv/error.hpp"

using namespace udainv;
using testsupport::normal_latent;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

std::vector<LatentCode> cloud(std::mt19937_64& rng, std::size_t n) {
  std::vector<LatentCode> ws;
  for (std::size_t i = 0; i < n; ++i) ws.push_back(normal_latent(rng));
  return ws;
}

std::vector<int> sign_labels(const std::vector<LatentCode>& ws, std::size_t axis) {
  std::vector<int> y;
  for (const LatentCode& w : ws) y.push_back(w.w[axis] > 0 ? 1 : 0);
  return y;
}

// Horizontal intensity centroid computed directly.
double centroid_oracle(const Image& x) {
  double m = 0, mx = 0;
  for (std::size_t r = 0; r < x.side; ++r)
    for (std::size_t c = 0; c < x.side; ++c) {
      m += x.at(r, c);
      mx += x.at(r, c) * static_cast<double>(c);
    }
  return m == 0 ? 0.5 : mx / m / static_cast<double>(x.side - 1);
}

}  // namespace

TEST_SUITE("editctl") {
  TEST_CASE("linear boundary recovers the labelled axis over 5 seeds") {
    for (std::uint64_t s = 0; s < 5; ++s) {
      std::mt19937_64 rng(s);
      const auto ws = cloud(rng, 400);
      for (std::size_t axis : {std::size_t{0}, std::size_t{4}}) {
        const EditDirection d = interfacegan_direction(ws, sign_labels(ws, axis), "x");
        CHECK(norm(d.v) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(d.v[axis] >= 0.95);
        CHECK(d.method == EditMethod::LinearBoundary);
      }
    }
  }

  TEST_CASE("flipping labels flips the direction") {
    std::mt19937_64 rng(9);
    const auto ws = cloud(rng, 200);
    std::vector<int> y = sign_labels(ws, 1), flipped;
    for (int v : y) flipped.push_back(1 - v);
    const EditDirection a = interfacegan_direction(ws, y, "y");
    const EditDirection b = interfacegan_direction(ws, flipped, "y");
    CHECK(dot(a.v, b.v) == doctest::Approx(-1.0).epsilon(1e-9));
  }

  TEST_CASE("linear boundary preconditions") {
    std::mt19937_64 rng(1);
    const auto ws = cloud(rng, 30);
    CHECK_THROWS_AS(interfacegan_direction(ws, std::vector<int>(30, 1), "a"), ValidationError);
    CHECK_THROWS_AS(interfacegan_direction(cloud(rng, 10), std::vector<int>{0, 1, 0, 1, 0, 1, 0, 1, 0, 1}, "a"),
                    ValidationError);
    CHECK_THROWS_AS(interfacegan_direction(ws, std::vector<int>(29, 1), "a"), ShapeError);
    std::vector<int> bad = sign_labels(ws, 0);
    bad[0] = 2;
    CHECK_THROWS_AS(interfacegan_direction(ws, bad, "a"), ValidationError);
  }

  TEST_CASE("principal directions of an anisotropic cloud") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z(0, 1);
    std::vector<LatentCode> ws;
    for (int i = 0; i < 2000; ++i) {
      LatentCode w;
      for (int k = 0; k < 8; ++k) w.w.push_back((k == 3 ? 2.0 : 1.0) * z(rng));
      ws.push_back(w);
    }
    const auto dirs = ganspace_directions(ws, 8);
    REQUIRE(dirs.size() == 8);
    CHECK(std::fabs(dirs[0].v[3]) >= 0.95);
    double ratios = 0;
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(norm(dirs[i].v) == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(dirs[i].method == EditMethod::Pca);
      ratios += dirs[i].meta;
      if (i > 0) CHECK(dirs[i].meta <= dirs[i - 1].meta);
      for (std::size_t j = 0; j < i; ++j) CHECK(std::fabs(dot(dirs[i].v, dirs[j].v)) <= 1e-8);
      // Largest-magnitude entry is positive.
      double big = 0;
      for (double v : dirs[i].v)
        if (std::fabs(v) > std::fabs(big)) big = v;
      CHECK(big > 0);
    }
    CHECK(ratios == doctest::Approx(1.0).epsilon(1e-8));
    CHECK_THROWS_AS(ganspace_directions(ws, 0), ValidationError);
    CHECK_THROWS_AS(ganspace_directions(ws, 9), ValidationError);
    CHECK_THROWS_AS(ganspace_directions(cloud(rng, 8), 1), ValidationError);
  }

  TEST_CASE("apply_edit: identity at zero, linearity") {
    GeneratorSpec g;
    std::mt19937_64 rng(3);
    const auto ws = cloud(rng, 100);
    const EditDirection d = interfacegan_direction(ws, sign_labels(ws, 0), "x");
    for (int k = 0; k < 20; ++k) {
      const LatentCode& w = ws[static_cast<std::size_t>(k)];
      const auto [w0, img0] = apply_edit(g, w, d, 0.0);
      CHECK(w0 == w);
      CHECK(img0 == generate(g, w));
      const LatentCode plus = apply_edit(g, w, d, 1.3).first, minus = apply_edit(g, w, d, -1.3).first;
      for (std::size_t i = 0; i < 8; ++i) CHECK(0.5 * (plus.w[i] + minus.w[i]) == doctest::Approx(w.w[i]).epsilon(1e-14));
    }
    EditDirection wrong = d;
    wrong.v.resize(5);
    CHECK_THROWS_AS(apply_edit(g, ws[0], wrong, 1.0), ShapeError);
  }

  TEST_CASE("probe: oracle agreement, degenerate image, centre, right edge, brightness scaling") {
    GeneratorSpec g;
    std::mt19937_64 rng(4);
    for (int k = 0; k < 20; ++k) {
      const Image x = generate(g, normal_latent(rng));
      CHECK(attribute_probe(x) == doctest::Approx(centroid_oracle(x)).epsilon(1e-12));
      Image dim = x;
      for (double& v : dim.pixels) v *= 0.37;
      CHECK(attribute_probe(dim) == doctest::Approx(attribute_probe(x)).epsilon(1e-12));
    }
    CHECK(attribute_probe(Image(16, 0.0)) == 0.5);

    // Single centred blob drawn directly.
    Image blob(16);
    for (std::size_t r = 0; r < 16; ++r)
      for (std::size_t c = 0; c < 16; ++c)
        blob.at(r, c) = std::exp(-(std::pow(c - 7.5, 2) + std::pow(r - 7.5, 2)) / 8.0);
    CHECK(attribute_probe(blob) == doctest::Approx(0.5).epsilon(0.05));

    // Both blobs pushed right, background off.
    int right = 0;
    for (int k = 0; k < 20; ++k) {
      LatentCode w = normal_latent(rng);
      w.w[0] = 4.0;
      w.w[4] = 4.0;
      w.w[7] = -6.0;
      right += attribute_probe(generate(g, w)) > 0.7;
    }
    CHECK(right == 20);
  }

  TEST_CASE("edits along the w0 axis move the probe") {
    GeneratorSpec g;
    std::mt19937_64 rng(5);
    EditDirection axis;
    axis.v.assign(8, 0.0);
    axis.v[0] = 1.0;
    int strict = 0;
    for (int k = 0; k < 100; ++k) {
      const LatentCode w = normal_latent(rng);
      double prev = -1;
      bool ok = true;
      for (double a : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
        const double p = attribute_probe(apply_edit(g, w, axis, a).second);
        ok = ok && p > prev;
        prev = p;
      }
      strict += ok;
    }
    CHECK(strict == 100);
  }

  TEST_CASE("recovered direction: probe monotone for at least 90% of latents") {
    GeneratorSpec g;
    std::mt19937_64 rng(6);
    const auto train = cloud(rng, 400);
    const EditDirection d = interfacegan_direction(train, sign_labels(train, 0), "blob1_x");
    int monotone = 0;
    for (int k = 0; k < 100; ++k) {
      const LatentCode w = normal_latent(rng);
      double prev = -1;
      bool ok = true;
      for (int i = -8; i <= 8; ++i) {
        const double p = attribute_probe(apply_edit(g, w, d, 0.25 * i).second);
        ok = ok && p >= prev;
        prev = p;
      }
      monotone += ok;
    }
    CHECK(monotone >= 90);
  }

  TEST_CASE("direction text round trip") {
    std::mt19937_64 rng(7);
    const auto ws = cloud(rng, 50);
    EditDirection d = interfacegan_direction(ws, sign_labels(ws, 2), "blob1_width");
    const EditDirection back = parse_direction(serialize_direction(d));
    CHECK(back.v == d.v);
    CHECK(back.method == d.method);
    CHECK(back.attribute == d.attribute);
    CHECK(back.meta == d.meta);
    const auto pcs = ganspace_directions(ws, 2);
    CHECK(parse_direction(serialize_direction(pcs[1])).method == EditMethod::Pca);
    CHECK(serialize_direction(d).rfind("linear-boundary,blob1_width,", 0) == 0);
    CHECK_THROWS_AS(parse_direction("linear-boundary,x,0\n"), FormatError);
    CHECK_THROWS_AS(parse_direction("linear-boundary,x,0\n1,abc\n"), FormatError);
    CHECK_THROWS_AS(parse_direction("svm,x,0\n1,0\n"), ValidationError);
  }
}
