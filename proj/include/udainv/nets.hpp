#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "udainv/autodiff.hpp"
#include "udainv/rng.hpp"
#include "udainv/tensor.hpp"

namespace udainv {

// Square grayscale image with pixels in [0,1], row-major.
struct Image {
  std::size_t side = 0;
  std::vector<double> pixels;

  Image() = default;
  explicit Image(std::size_t side, double fill = 0.0) : side(side), pixels(side * side, fill) {}
  double& at(std::size_t row, std::size_t col) { return pixels[row * side + col]; }
  double at(std::size_t row, std::size_t col) const { return pixels[row * side + col]; }
  friend bool operator==(const Image&, const Image&) = default;
};

struct LatentCode {
  std::vector<double> w;
  friend bool operator==(const LatentCode&, const LatentCode&) = default;
};

// Procedural stand-in for a pretrained generator: two Gaussian blobs over a
// constant background. Coordinates w0..w7 pass through a logistic sigmoid and
// set (blob1 x, blob1 y, blob1 width, blob1 brightness, blob2 x, blob2 y,
// blob2 width, background). Extra latent coordinates, if any, are ignored.
// Brightness ranges are chosen so the sum never leaves [0,1] before the clamp,
// and blob 1 is always the brighter one so the two blobs cannot swap roles.
struct GeneratorSpec {
  std::size_t latent_dim = 8;
  std::size_t grid = 16;
  // Blob centres stay this far inside the frame, so moving a blob outward never
  // loses enough mass to pull the intensity centroid back.
  double position_margin = 2.0;
  double width_min = 1.5;
  double width_max = 3.5;
  double amp1_min = 0.4;
  double amp1_max = 0.6;
  double amp2 = 0.2;
  double background_min = 0.0;
  double background_max = 0.2;

  std::size_t pixels() const { return grid * grid; }
};

// [B, d_w] latents -> [B, grid^2] images.
ad::Var generate(const GeneratorSpec& g, ad::Var latents);
Image generate(const GeneratorSpec& g, const LatentCode& w);

// Weights of a dense leaky-ReLU perceptron, stored as W0, b0, W1, b1, ...
// with W_i of shape [dims[i], dims[i+1]] and b_i of shape [1, dims[i+1]].
struct MlpParams {
  std::vector<std::size_t> dims;
  std::vector<Tensor> params;

  static MlpParams init(std::vector<std::size_t> dims, Rng& rng, bool linear_output);
  std::size_t layers() const { return dims.size() - 1; }
  std::vector<std::vector<std::size_t>> shapes() const;
  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

inline constexpr double kLeakySlope = 0.2;

struct EncoderParams {
  MlpParams mlp;

  // 256 -> 128 -> 64 -> d_w for the default 16x16 grid.
  static EncoderParams init(const GeneratorSpec& g, Rng& rng);
  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

enum class FeatureRole { Perceptual, Adversarial, Identity };

struct FeatureNetParams {
  FeatureRole role = FeatureRole::Perceptual;
  MlpParams mlp;

  // 256 -> 64 -> 32 -> 16 for the default grid; every layer leaky-ReLU.
  static FeatureNetParams init(const GeneratorSpec& g, FeatureRole role, Rng& rng);
  // Same weights under a different role (H -> H-hat at initialisation).
  FeatureNetParams with_role(FeatureRole r) const { return {r, mlp}; }
  friend bool operator==(const FeatureNetParams&, const FeatureNetParams&) = default;
};

// An MLP's parameters registered on a tape.
struct BoundNet {
  std::vector<ad::Var> params;
};

BoundNet bind(ad::Tape& tape, const MlpParams& mlp, bool trainable);
std::vector<Tensor> gradients(const BoundNet& net);

ad::Var encode(const BoundNet& encoder, ad::Var images);
// Activations of all layers, [B, width_l] each.
std::vector<ad::Var> feature_stack(const BoundNet& net, ad::Var images);
// Rows scaled to unit Euclidean norm.
ad::Var unit_rows(ad::Var a);
// Per-image LPIPS-style distance between two feature stacks, [B, 1].
ad::Var lpips_rows(const std::vector<ad::Var>& a, const std::vector<ad::Var>& b);
// Unit-normalised final-layer activations, [B, width].
ad::Var identity_rows(const BoundNet& r, ad::Var images);

Tensor batch_tensor(std::span<const Image> images);
Tensor batch_tensor(std::span<const LatentCode> latents);
Image image_from_row(const Tensor& batch, std::size_t row, std::size_t side);
LatentCode latent_from_row(const Tensor& batch, std::size_t row);

LatentCode encode(const EncoderParams& e, const Image& x);
std::vector<LatentCode> encode_all(const EncoderParams& e, std::span<const Image> xs);
double lpips_distance(const FeatureNetParams& h, const Image& a, const Image& b);
std::vector<double> identity_embed(const FeatureNetParams& r, const Image& x);
std::vector<double> final_features(const FeatureNetParams& h, const Image& x);

}  // namespace udainv
