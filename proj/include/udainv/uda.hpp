#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "udainv/adam.hpp"
#include "udainv/checkpoint.hpp"
#include "udainv/fdiv.hpp"
#include "udainv/nets.hpp"
#include "udainv/synthdeg.hpp"

namespace udainv {

struct LossWeights {
  double pixel = 1.0;       // lambda1
  double perceptual = 0.8;  // lambda2
  double identity = 1.0;    // lambda3
};

struct TrainConfig {
  LossWeights weights;
  double lambda_uda = 1.0;
  DivergenceKind divergence = DivergenceKind::PearsonChi2;
  std::size_t batch_size = 32;
  std::size_t iterations = 3000;
  std::size_t inner_steps = 1;
  double lr_encoder = 1e-3;
  // Ascent at the encoder's rate lets H-hat chase noise in each batch; the
  // slower critic tracks the domain gap and gives the larger target gain.
  double lr_hhat = 1e-5;
  // Relative scale of the seeded perturbation applied to the H-hat copy of H
  // when a run starts. H-hat == H is a stationary point of the discrepancy
  // (zero value, zero gradient), so an exact copy would never move.
  double hhat_init_noise = 0.1;
  std::size_t log_every = 50;
  std::uint64_t seed = 1;
};

// G is fixed by its spec; E and H-hat train; H and R stay frozen.
struct Networks {
  GeneratorSpec generator;
  EncoderParams encoder;
  FeatureNetParams perceptual;   // H
  FeatureNetParams adversarial;  // H-hat
  FeatureNetParams identity;     // R

  // H-hat starts as an exact copy of H.
  static Networks init(const GeneratorSpec& g, std::uint64_t seed);
};

// Seeded relative perturbation W + scale * sd(W) * N(0,1) of every weight matrix.
MlpParams perturbed_copy(const MlpParams& mlp, double scale, std::uint64_t seed);

struct TrainState {
  Networks nets;
  AdamState encoder_opt;
  AdamState hhat_opt;

  static TrainState init(const GeneratorSpec& g, const TrainConfig& cfg);
};

Checkpoint to_checkpoint(const TrainState& state, const std::string& config_text);
// Rebuilds the state; throws ValidationError when tensor shapes disagree with g.
TrainState state_from_checkpoint(const Checkpoint& ckpt, const GeneratorSpec& g);

// --- losses on a tape -----------------------------------------------------

// lambda1 * pixel MSE + lambda2 * LPIPS-style(H) + lambda3 * MSE of R embeddings
// between G(E(inputs)) and references, averaged over the batch.
ad::Var reconstruction_loss(const GeneratorSpec& g, const BoundNet& encoder, const BoundNet& h,
                            const BoundNet& r, ad::Var inputs, ad::Var references,
                            const LossWeights& w);
ad::Var reconstruction_loss_from_recon(const BoundNet& h, const BoundNet& r, ad::Var recon,
                                       ad::Var references, const LossWeights& w);

// Source loss: references are the inputs themselves.
ad::Var source_loss(const GeneratorSpec& g, const BoundNet& encoder, const BoundNet& h,
                    const BoundNet& r, ad::Var src, const LossWeights& w);

// Per-image l-hat between the H-hat and H feature stacks of the same images, [B,1].
ad::Var discrepancy_terms(const BoundNet& h, const BoundNet& hhat, ad::Var images);
// mean_src l-hat - mean_trg phi*(l-hat) on already inverted images.
ad::Var discrepancy_from_recon(const BoundNet& h, const BoundNet& hhat, ad::Var recon_src,
                               ad::Var recon_trg, const FDivergence& div);
ad::Var d_st(const GeneratorSpec& g, const BoundNet& encoder, const BoundNet& h,
             const BoundNet& hhat, ad::Var src, ad::Var trg, const FDivergence& div);

// Convenience wrappers that evaluate on plain parameter sets.
double source_loss_value(const Networks& nets, const Tensor& src, const LossWeights& w);
double d_st_value(const Networks& nets, const Tensor& src, const Tensor& trg, const FDivergence& div);

// One gradient-ascent step on d_st w.r.t. H-hat only. Returns d_st evaluated
// before the step (the point where the gradient was taken).
double inner_max_step(Networks& nets, const Tensor& src, const Tensor& trg, const FDivergence& div,
                      AdamState& hhat_opt);

// --- training --------------------------------------------------------------

struct IterationMetrics {
  std::size_t iteration;
  double source;
  double discrepancy;
  double total;
};

struct TrainResult {
  TrainState state;
  std::vector<IterationMetrics> trace;  // every iteration
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t iteration, TrainState last_finite);
  std::size_t iteration() const { return iteration_; }
  const TrainState& last_finite_state() const { return last_; }

 private:
  std::size_t iteration_;
  TrainState last_;
};

// Alternating min-max loop: per iteration, inner_steps ascent steps on H-hat
// with E frozen, then one descent step of L_s + lambda_uda * d_st on E.
TrainResult train(const TrainConfig& cfg, const DomainDataset& data, TrainState state,
                  const std::function<void(const IterationMetrics&)>& on_iteration = {});

// Pure reconstruction training on (input, reference) pairs; used for the
// ideal-joint-risk estimate.
EncoderParams train_supervised(const TrainConfig& cfg, const Networks& nets,
                               const std::vector<Image>& inputs,
                               const std::vector<Image>& references, std::uint64_t seed);

// CSV with header iteration,L_s,d_st,total; rows at iteration 1, every
// log_every iterations and the last iteration.
std::string metrics_csv(const std::vector<IterationMetrics>& trace, std::size_t log_every);

// --- bound audit -----------------------------------------------------------

struct AuditConfig {
  std::size_t ascent_steps = 500;
  double lr_hhat = 1e-3;
  double hhat_init_noise = 0.1;
  // Divides feature distances before clamping to [0,1]; <= 0 selects the 99th
  // percentile of distances between distinct source evaluation images.
  double clamp_scale = 0.0;
  std::size_t joint_iterations = 3000;
  std::uint64_t seed = 1;
};

struct BoundAuditReport {
  double risk_target = 0.0;
  double risk_source = 0.0;
  double discrepancy = 0.0;
  double joint_risk = 0.0;  // lambda-star estimate
  double se_target = 0.0;
  double se_source = 0.0;
  double se_discrepancy = 0.0;
  double se_joint = 0.0;
  double clamp_scale = 0.0;
  double slack = 0.0;
  double sigma = 0.0;
  bool holds = false;  // slack >= -3 sigma

  std::string to_text() const;
};

// eval must contain paired records with latents; train_data supplies the
// ground-truth-paired samples for the ideal joint hypothesis.
BoundAuditReport audit_bound(const Networks& nets, const DomainDataset& eval,
                             const DomainDataset& train_data, const FDivergence& div,
                             const TrainConfig& train_cfg, const AuditConfig& audit);

}  // namespace udainv
