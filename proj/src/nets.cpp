#include "udainv/nets.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "udainv/error.hpp"

namespace udainv {

namespace {

// Guards the norm of an all-zero activation row on the tape.
constexpr double kNormEps = 1e-12;

const Tensor& pixel_coords(std::size_t grid, bool columns) {
  thread_local std::size_t cached_grid = 0;
  thread_local Tensor xs, ys;
  if (cached_grid != grid) {
    xs = Tensor({1, grid * grid});
    ys = Tensor({1, grid * grid});
    for (std::size_t r = 0; r < grid; ++r)
      for (std::size_t c = 0; c < grid; ++c) {
        xs[r * grid + c] = static_cast<double>(c);
        ys[r * grid + c] = static_cast<double>(r);
      }
    cached_grid = grid;
  }
  return columns ? xs : ys;
}

ad::Var scaled(ad::Var p, std::size_t col, double lo, double hi) {
  return lo + ad::slice_cols(p, col, col + 1) * (hi - lo);
}

}  // namespace

ad::Var generate(const GeneratorSpec& g, ad::Var latents) {
  const Tensor& w = latents.value();
  if (w.cols() != g.latent_dim)
    throw ShapeError("generate: latent dimension " + std::to_string(w.cols()) + ", expected " +
                     std::to_string(g.latent_dim));
  if (g.latent_dim < 8) throw ShapeError("generate: latent dimension must be at least 8");
  ad::Tape& tape = latents.tape();
  ad::Var xs = tape.constant(pixel_coords(g.grid, true));
  ad::Var ys = tape.constant(pixel_coords(g.grid, false));
  const double extent = static_cast<double>(g.grid - 1);

  ad::Var p = ad::sigmoid(latents);
  auto blob = [&](std::size_t cx, std::size_t cy, std::size_t width) {
    ad::Var dx = xs - scaled(p, cx, g.position_margin, extent - g.position_margin);
    ad::Var dy = ys - scaled(p, cy, g.position_margin, extent - g.position_margin);
    ad::Var s = scaled(p, width, g.width_min, g.width_max);
    return ad::exp(-(ad::square(dx) + ad::square(dy)) / (2.0 * ad::square(s)));
  };
  ad::Var img = scaled(p, 7, g.background_min, g.background_max) +
                scaled(p, 3, g.amp1_min, g.amp1_max) * blob(0, 1, 2) + g.amp2 * blob(4, 5, 6);
  return ad::clamp(img, 0.0, 1.0);
}

Image generate(const GeneratorSpec& g, const LatentCode& w) {
  if (w.w.size() != g.latent_dim)
    throw ShapeError("generate: latent dimension " + std::to_string(w.w.size()) + ", expected " +
                     std::to_string(g.latent_dim));
  ad::Tape tape;
  ad::Var out = generate(g, tape.constant(Tensor({1, g.latent_dim}, w.w)));
  return image_from_row(out.value(), 0, g.grid);
}

MlpParams MlpParams::init(std::vector<std::size_t> dims, Rng& rng, bool linear_output) {
  if (dims.size() < 2) throw ValidationError("MlpParams: need at least two layer widths");
  MlpParams m;
  m.dims = std::move(dims);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
    const std::size_t in = m.dims[l], out = m.dims[l + 1];
    const bool last = l + 2 == m.dims.size();
    // He scaling for leaky-ReLU layers, unit-variance scaling for a linear head.
    const double gain = (last && linear_output) ? 1.0 : 2.0 / (1.0 + kLeakySlope * kLeakySlope);
    const double sd = std::sqrt(gain / static_cast<double>(in));
    Tensor w({in, out});
    for (double& v : w.values()) v = sd * normal(rng);
    m.params.push_back(std::move(w));
    m.params.emplace_back(std::vector<std::size_t>{1, out}, 0.0);
  }
  return m;
}

std::vector<std::vector<std::size_t>> MlpParams::shapes() const {
  std::vector<std::vector<std::size_t>> s;
  for (const Tensor& t : params) s.push_back(t.shape());
  return s;
}

EncoderParams EncoderParams::init(const GeneratorSpec& g, Rng& rng) {
  return {MlpParams::init({g.pixels(), 128, 64, g.latent_dim}, rng, true)};
}

FeatureNetParams FeatureNetParams::init(const GeneratorSpec& g, FeatureRole role, Rng& rng) {
  return {role, MlpParams::init({g.pixels(), 64, 32, 16}, rng, false)};
}

BoundNet bind(ad::Tape& tape, const MlpParams& mlp, bool trainable) {
  BoundNet net;
  for (const Tensor& t : mlp.params)
    net.params.push_back(trainable ? tape.parameter(t) : tape.constant(t));
  return net;
}

std::vector<Tensor> gradients(const BoundNet& net) {
  std::vector<Tensor> g;
  for (const ad::Var& v : net.params) g.push_back(v.grad());
  return g;
}

namespace {

void check_input(const BoundNet& net, ad::Var images, const char* what) {
  const std::size_t expected = net.params.front().value().rows();
  if (images.value().cols() != expected)
    throw ShapeError(std::string(what) + ": input width " + std::to_string(images.value().cols()) +
                     ", expected " + std::to_string(expected));
}

}  // namespace

ad::Var encode(const BoundNet& encoder, ad::Var images) {
  check_input(encoder, images, "encode");
  ad::Var h = 2.0 * images - 1.0;
  const std::size_t layers = encoder.params.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = ad::matmul(h, encoder.params[2 * l]) + encoder.params[2 * l + 1];
    if (l + 1 < layers) h = ad::leaky_relu(h, kLeakySlope);
  }
  return h;
}

std::vector<ad::Var> feature_stack(const BoundNet& net, ad::Var images) {
  check_input(net, images, "feature_stack");
  std::vector<ad::Var> out;
  ad::Var h = 2.0 * images - 1.0;
  const std::size_t layers = net.params.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = ad::leaky_relu(ad::matmul(h, net.params[2 * l]) + net.params[2 * l + 1], kLeakySlope);
    out.push_back(h);
  }
  return out;
}

ad::Var unit_rows(ad::Var a) {
  return a / ad::sqrt(ad::sum(ad::square(a), 1) + kNormEps);
}

ad::Var lpips_rows(const std::vector<ad::Var>& a, const std::vector<ad::Var>& b) {
  if (a.size() != b.size() || a.empty())
    throw ShapeError("lpips: feature stacks differ in depth");
  ad::Var total;
  for (std::size_t l = 0; l < a.size(); ++l) {
    ad::Var d = ad::mean(ad::square(unit_rows(a[l]) - unit_rows(b[l])), 1);
    total = l == 0 ? d : total + d;
  }
  return total;
}

ad::Var identity_rows(const BoundNet& r, ad::Var images) {
  return unit_rows(feature_stack(r, images).back());
}

Tensor batch_tensor(std::span<const Image> images) {
  if (images.empty()) throw ShapeError("batch_tensor: empty image list");
  const std::size_t p = images.front().pixels.size();
  Tensor t({images.size(), p});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].pixels.size() != p) throw ShapeError("batch_tensor: images differ in size");
    std::copy(images[i].pixels.begin(), images[i].pixels.end(), t.values().begin() + static_cast<long>(i * p));
  }
  return t;
}

Tensor batch_tensor(std::span<const LatentCode> latents) {
  if (latents.empty()) throw ShapeError("batch_tensor: empty latent list");
  const std::size_t d = latents.front().w.size();
  Tensor t({latents.size(), d});
  for (std::size_t i = 0; i < latents.size(); ++i) {
    if (latents[i].w.size() != d) throw ShapeError("batch_tensor: latents differ in size");
    std::copy(latents[i].w.begin(), latents[i].w.end(), t.values().begin() + static_cast<long>(i * d));
  }
  return t;
}

Image image_from_row(const Tensor& batch, std::size_t row, std::size_t side) {
  if (batch.cols() != side * side) throw ShapeError("image_from_row: width mismatch");
  Image img(side);
  for (std::size_t i = 0; i < side * side; ++i) img.pixels[i] = batch[row * batch.cols() + i];
  return img;
}

LatentCode latent_from_row(const Tensor& batch, std::size_t row) {
  LatentCode w;
  w.w.assign(batch.values().begin() + static_cast<long>(row * batch.cols()),
             batch.values().begin() + static_cast<long>((row + 1) * batch.cols()));
  return w;
}

LatentCode encode(const EncoderParams& e, const Image& x) {
  return encode_all(e, std::span<const Image>(&x, 1)).front();
}

std::vector<LatentCode> encode_all(const EncoderParams& e, std::span<const Image> xs) {
  ad::Tape tape;
  BoundNet net = bind(tape, e.mlp, false);
  ad::Var out = encode(net, tape.constant(batch_tensor(xs)));
  std::vector<LatentCode> codes;
  for (std::size_t i = 0; i < xs.size(); ++i) codes.push_back(latent_from_row(out.value(), i));
  return codes;
}

double lpips_distance(const FeatureNetParams& h, const Image& a, const Image& b) {
  if (h.role == FeatureRole::Identity)
    throw ValidationError("lpips_distance: identity network passed; use identity_embed");
  ad::Tape tape;
  BoundNet net = bind(tape, h.mlp, false);
  auto fa = feature_stack(net, tape.constant(batch_tensor(std::span<const Image>(&a, 1))));
  auto fb = feature_stack(net, tape.constant(batch_tensor(std::span<const Image>(&b, 1))));
  return lpips_rows(fa, fb).item();
}

std::vector<double> final_features(const FeatureNetParams& h, const Image& x) {
  ad::Tape tape;
  BoundNet net = bind(tape, h.mlp, false);
  auto f = feature_stack(net, tape.constant(batch_tensor(std::span<const Image>(&x, 1))));
  const Tensor& v = f.back().value();
  return {v.values().begin(), v.values().end()};
}

std::vector<double> identity_embed(const FeatureNetParams& r, const Image& x) {
  if (r.role != FeatureRole::Identity)
    throw ValidationError("identity_embed: network is not in the identity role");
  std::vector<double> f = final_features(r, x);
  double norm = 0.0;
  for (double v : f) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    std::fill(f.begin(), f.end(), 0.0);
    f[0] = 1.0;
    return f;
  }
  for (double& v : f) v /= norm;
  return f;
}

}  // namespace udainv
