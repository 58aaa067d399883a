#include "udainv/uda.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "udainv/error.hpp"
#include "udainv/rng.hpp"

namespace udainv {

Networks Networks::init(const GeneratorSpec& g, std::uint64_t seed) {
  Networks n;
  n.generator = g;
  Rng enc_rng(derive_seed(seed, "init/encoder"));
  Rng h_rng(derive_seed(seed, "init/perceptual"));
  Rng r_rng(derive_seed(seed, "init/identity"));
  n.encoder = EncoderParams::init(g, enc_rng);
  n.perceptual = FeatureNetParams::init(g, FeatureRole::Perceptual, h_rng);
  n.adversarial = n.perceptual.with_role(FeatureRole::Adversarial);
  n.identity = FeatureNetParams::init(g, FeatureRole::Identity, r_rng);
  return n;
}

MlpParams perturbed_copy(const MlpParams& mlp, double scale, std::uint64_t seed) {
  MlpParams out = mlp;
  if (scale == 0.0) return out;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < out.params.size(); i += 2) {
    Tensor& w = out.params[i];
    double mean = 0.0, sq = 0.0;
    for (double v : w.values()) mean += v;
    mean /= static_cast<double>(w.size());
    for (double v : w.values()) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / static_cast<double>(w.size()));
    for (double& v : w.values()) v += scale * sd * normal(rng);
  }
  return out;
}

TrainState TrainState::init(const GeneratorSpec& g, const TrainConfig& cfg) {
  TrainState s;
  s.nets = Networks::init(g, cfg.seed);
  s.nets.adversarial.mlp =
      perturbed_copy(s.nets.perceptual.mlp, cfg.hhat_init_noise, derive_seed(cfg.seed, "init/hhat"));
  s.encoder_opt = AdamState::for_params(s.nets.encoder.mlp.params, {cfg.lr_encoder});
  s.hhat_opt = AdamState::for_params(s.nets.adversarial.mlp.params, {cfg.lr_hhat});
  return s;
}

// --- checkpoint mapping -----------------------------------------------------

namespace {

void put_mlp(Checkpoint& c, const std::string& prefix, const MlpParams& m) {
  for (std::size_t i = 0; i < m.params.size(); ++i)
    c.put(prefix + (i % 2 == 0 ? ".W" : ".b") + std::to_string(i / 2), m.params[i]);
}

void put_adam(Checkpoint& c, const std::string& prefix, const AdamState& s) {
  c.put(prefix + ".hyper", Tensor({4}, {s.hyper.lr, s.hyper.beta1, s.hyper.beta2, s.hyper.eps}));
  c.put(prefix + ".step", Tensor::scalar(static_cast<double>(s.step)));
  for (std::size_t i = 0; i < s.m.size(); ++i) {
    c.put(prefix + ".m" + std::to_string(i), s.m[i]);
    c.put(prefix + ".v" + std::to_string(i), s.v[i]);
  }
}

MlpParams get_mlp(const Checkpoint& c, const std::string& prefix, const MlpParams& like) {
  MlpParams m = like;
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const std::string name = prefix + (i % 2 == 0 ? ".W" : ".b") + std::to_string(i / 2);
    const Tensor& t = c.get(name);
    if (t.shape() != like.params[i].shape())
      throw ValidationError("checkpoint tensor " + name + " has shape " + shape_string(t.shape()) +
                            " but the configuration expects " + shape_string(like.params[i].shape()));
    m.params[i] = t;
  }
  return m;
}

AdamState get_adam(const Checkpoint& c, const std::string& prefix, const std::vector<Tensor>& params) {
  const Tensor& h = c.get(prefix + ".hyper");
  if (h.size() != 4) throw FormatError("checkpoint: " + prefix + ".hyper must hold 4 values");
  AdamState s = AdamState::for_params(params, {h[0], h[1], h[2], h[3]});
  s.step = static_cast<std::uint64_t>(c.get(prefix + ".step")[0]);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& m = c.get(prefix + ".m" + std::to_string(i));
    const Tensor& v = c.get(prefix + ".v" + std::to_string(i));
    if (m.shape() != params[i].shape() || v.shape() != params[i].shape())
      throw ValidationError("checkpoint optimizer state " + prefix + " does not match parameter shapes");
    s.m[i] = m;
    s.v[i] = v;
  }
  return s;
}

}  // namespace

Checkpoint to_checkpoint(const TrainState& state, const std::string& config_text) {
  Checkpoint c;
  c.config_text = config_text;
  put_mlp(c, "encoder", state.nets.encoder.mlp);
  put_mlp(c, "hhat", state.nets.adversarial.mlp);
  put_mlp(c, "perceptual", state.nets.perceptual.mlp);
  put_mlp(c, "identity", state.nets.identity.mlp);
  put_adam(c, "adam.encoder", state.encoder_opt);
  put_adam(c, "adam.hhat", state.hhat_opt);
  return c;
}

TrainState state_from_checkpoint(const Checkpoint& ckpt, const GeneratorSpec& g) {
  TrainState s;
  s.nets = Networks::init(g, 0);  // shapes only; every tensor is overwritten
  s.nets.encoder.mlp = get_mlp(ckpt, "encoder", s.nets.encoder.mlp);
  s.nets.adversarial.mlp = get_mlp(ckpt, "hhat", s.nets.adversarial.mlp);
  s.nets.perceptual.mlp = get_mlp(ckpt, "perceptual", s.nets.perceptual.mlp);
  s.nets.identity.mlp = get_mlp(ckpt, "identity", s.nets.identity.mlp);
  s.encoder_opt = get_adam(ckpt, "adam.encoder", s.nets.encoder.mlp.params);
  s.hhat_opt = get_adam(ckpt, "adam.hhat", s.nets.adversarial.mlp.params);
  return s;
}

// --- losses -------------------------------------------------------------------

ad::Var reconstruction_loss_from_recon(const BoundNet& h, const BoundNet& r, ad::Var recon,
                                       ad::Var references, const LossWeights& w) {
  if (recon.value().rows() == 0) throw ValidationError("reconstruction loss: empty batch");
  ad::Var loss = w.pixel * ad::mean(ad::square(recon - references));
  if (w.perceptual != 0.0)
    loss = loss + w.perceptual * ad::mean(lpips_rows(feature_stack(h, recon), feature_stack(h, references)));
  if (w.identity != 0.0)
    loss = loss + w.identity * ad::mean(ad::square(identity_rows(r, recon) - identity_rows(r, references)));
  return loss;
}

ad::Var reconstruction_loss(const GeneratorSpec& g, const BoundNet& encoder, const BoundNet& h,
                            const BoundNet& r, ad::Var inputs, ad::Var references,
                            const LossWeights& w) {
  ad::Var recon = generate(g, encode(encoder, inputs));
  return reconstruction_loss_from_recon(h, r, recon, references, w);
}

ad::Var source_loss(const GeneratorSpec& g, const BoundNet& encoder, const BoundNet& h,
                    const BoundNet& r, ad::Var src, const LossWeights& w) {
  return reconstruction_loss(g, encoder, h, r, src, src, w);
}

ad::Var discrepancy_terms(const BoundNet& h, const BoundNet& hhat, ad::Var images) {
  return lpips_rows(feature_stack(hhat, images), feature_stack(h, images));
}

ad::Var discrepancy_from_recon(const BoundNet& h, const BoundNet& hhat, ad::Var recon_src,
                               ad::Var recon_trg, const FDivergence& div) {
  ad::Var src_terms = discrepancy_terms(h, hhat, recon_src);
  ad::Var trg_terms = discrepancy_terms(h, hhat, recon_trg);
  return ad::mean(src_terms) - ad::mean(div.conjugate(trg_terms));
}

ad::Var d_st(const GeneratorSpec& g, const BoundNet& encoder, const BoundNet& h,
             const BoundNet& hhat, ad::Var src, ad::Var trg, const FDivergence& div) {
  if (src.value().rows() == 0 || trg.value().rows() == 0)
    throw ValidationError("d_st: both batches must be nonempty");
  ad::Var rs = generate(g, encode(encoder, src));
  ad::Var rt = generate(g, encode(encoder, trg));
  return discrepancy_from_recon(h, hhat, rs, rt, div);
}

double source_loss_value(const Networks& nets, const Tensor& src, const LossWeights& w) {
  ad::Tape tape;
  return source_loss(nets.generator, bind(tape, nets.encoder.mlp, false),
                     bind(tape, nets.perceptual.mlp, false), bind(tape, nets.identity.mlp, false),
                     tape.constant(src), w)
      .item();
}

double d_st_value(const Networks& nets, const Tensor& src, const Tensor& trg, const FDivergence& div) {
  ad::Tape tape;
  return d_st(nets.generator, bind(tape, nets.encoder.mlp, false),
              bind(tape, nets.perceptual.mlp, false), bind(tape, nets.adversarial.mlp, false),
              tape.constant(src), tape.constant(trg), div)
      .item();
}

namespace {

// Ascent on H-hat with the inverted images held fixed.
double ascend_hhat(Networks& nets, const Tensor& recon_src, const Tensor& recon_trg,
                   const FDivergence& div, AdamState& opt) {
  ad::Tape tape;
  BoundNet h = bind(tape, nets.perceptual.mlp, false);
  BoundNet hhat = bind(tape, nets.adversarial.mlp, true);
  ad::Var d = discrepancy_from_recon(h, hhat, tape.constant(recon_src), tape.constant(recon_trg), div);
  tape.backward(d);
  adam_ascend(nets.adversarial.mlp.params, gradients(hhat), opt);
  return d.item();
}

Tensor invert(const Networks& nets, const Tensor& images) {
  ad::Tape tape;
  return generate(nets.generator, encode(bind(tape, nets.encoder.mlp, false), tape.constant(images)))
      .value();
}

bool all_finite(const std::vector<Tensor>& ts) {
  return std::all_of(ts.begin(), ts.end(), [](const Tensor& t) { return t.all_finite(); });
}

class BatchSampler {
 public:
  BatchSampler(std::vector<Image> images, std::uint64_t seed) : images_(std::move(images)), rng_(seed) {}

  bool empty() const { return images_.empty(); }

  Tensor next(std::size_t batch, std::vector<std::size_t>* picked = nullptr) {
    std::uniform_int_distribution<std::size_t> pick(0, images_.size() - 1);
    const std::size_t width = images_.front().pixels.size();
    Tensor t({batch, width});
    for (std::size_t i = 0; i < batch; ++i) {
      const std::size_t k = pick(rng_);
      if (picked) picked->push_back(k);
      std::copy(images_[k].pixels.begin(), images_[k].pixels.end(),
                t.values().begin() + static_cast<long>(i * width));
    }
    return t;
  }

 private:
  std::vector<Image> images_;
  Rng rng_;
};

}  // namespace

double inner_max_step(Networks& nets, const Tensor& src, const Tensor& trg, const FDivergence& div,
                      AdamState& hhat_opt) {
  return ascend_hhat(nets, invert(nets, src), invert(nets, trg), div, hhat_opt);
}

TrainingDiverged::TrainingDiverged(std::size_t iteration, TrainState last_finite)
    : std::runtime_error("training diverged to a non-finite loss at iteration " +
                         std::to_string(iteration)),
      iteration_(iteration),
      last_(std::move(last_finite)) {}

TrainResult train(const TrainConfig& cfg, const DomainDataset& data, TrainState state,
                  const std::function<void(const IterationMetrics&)>& on_iteration) {
  if (cfg.batch_size < 2) throw ValidationError("train: batch_size must be at least 2");
  if (cfg.weights.pixel < 0 || cfg.weights.perceptual < 0 || cfg.weights.identity < 0 ||
      cfg.lambda_uda < 0)
    throw ValidationError("train: loss weights must be non-negative");
  const FDivergence div(cfg.divergence);
  const GeneratorSpec& g = state.nets.generator;

  BatchSampler src(data.images(Domain::Source), derive_seed(cfg.seed, "batches/src"));
  BatchSampler trg(data.images(Domain::Target), derive_seed(cfg.seed, "batches/trg"));
  if (src.empty()) throw ValidationError("train: no source-domain records");
  if (trg.empty() && cfg.lambda_uda != 0.0)
    throw ValidationError("train: target domain is empty but lambda_uda != 0");

  TrainResult result;
  result.trace.reserve(cfg.iterations);
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    const Tensor xs = src.next(cfg.batch_size);
    const Tensor xt = trg.empty() ? Tensor() : trg.next(cfg.batch_size);

    ad::Tape tape;
    BoundNet enc = bind(tape, state.nets.encoder.mlp, true);
    ad::Var src_in = tape.constant(xs);
    ad::Var recon_src = generate(g, encode(enc, src_in));
    ad::Var recon_trg;
    if (!trg.empty()) recon_trg = generate(g, encode(enc, tape.constant(xt)));

    // Steps 1-2: ascend H-hat against the current (pre-update) encoder.
    const MlpParams hhat_before = state.nets.adversarial.mlp;
    const AdamState hhat_opt_before = state.hhat_opt;
    auto diverged = [&] {
      state.nets.adversarial.mlp = hhat_before;
      state.hhat_opt = hhat_opt_before;
      return TrainingDiverged(it, state);
    };
    if (!recon_src.value().all_finite() || (!trg.empty() && !recon_trg.value().all_finite()))
      throw diverged();
    if (!trg.empty())
      for (std::size_t k = 0; k < cfg.inner_steps; ++k)
        ascend_hhat(state.nets, recon_src.value(), recon_trg.value(), div, state.hhat_opt);

    // Steps 3-5: L = L_s + lambda_uda * d_st, descend E.
    BoundNet h = bind(tape, state.nets.perceptual.mlp, false);
    BoundNet r = bind(tape, state.nets.identity.mlp, false);
    ad::Var ls = reconstruction_loss_from_recon(h, r, recon_src, src_in, cfg.weights);
    double d_value = 0.0;
    ad::Var total = ls;
    if (!trg.empty()) {
      if (cfg.lambda_uda != 0.0) {
        BoundNet hhat = bind(tape, state.nets.adversarial.mlp, false);
        ad::Var d = discrepancy_from_recon(h, hhat, recon_src, recon_trg, div);
        total = ls + cfg.lambda_uda * d;
        d_value = d.item();
      } else {
        ad::Tape side;
        d_value = discrepancy_from_recon(bind(side, state.nets.perceptual.mlp, false),
                                         bind(side, state.nets.adversarial.mlp, false),
                                         side.constant(recon_src.value()),
                                         side.constant(recon_trg.value()), div)
                      .item();
      }
    }
    const IterationMetrics m{it, ls.item(), d_value, total.item()};
    if (!std::isfinite(m.total) || !std::isfinite(m.discrepancy) ||
        !state.nets.adversarial.mlp.params.front().all_finite())
      throw diverged();
    tape.backward(total);
    const std::vector<Tensor> grads = gradients(enc);
    if (!all_finite(grads)) throw diverged();
    adam_step(state.nets.encoder.mlp.params, grads, state.encoder_opt);

    result.trace.push_back(m);
    if (on_iteration) on_iteration(m);
  }
  result.state = std::move(state);
  return result;
}

EncoderParams train_supervised(const TrainConfig& cfg, const Networks& nets,
                               const std::vector<Image>& inputs,
                               const std::vector<Image>& references, std::uint64_t seed) {
  if (inputs.size() != references.size() || inputs.empty())
    throw ValidationError("train_supervised: need equally many nonempty inputs and references");
  Rng init_rng(derive_seed(seed, "joint/encoder"));
  EncoderParams enc = EncoderParams::init(nets.generator, init_rng);
  AdamState opt = AdamState::for_params(enc.mlp.params, {cfg.lr_encoder});
  Rng rng(derive_seed(seed, "joint/batches"));
  std::uniform_int_distribution<std::size_t> pick(0, inputs.size() - 1);
  const std::size_t width = inputs.front().pixels.size();
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    Tensor xin({cfg.batch_size, width}), xref({cfg.batch_size, width});
    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      const std::size_t k = pick(rng);
      std::copy(inputs[k].pixels.begin(), inputs[k].pixels.end(), xin.values().begin() + static_cast<long>(i * width));
      std::copy(references[k].pixels.begin(), references[k].pixels.end(), xref.values().begin() + static_cast<long>(i * width));
    }
    ad::Tape tape;
    BoundNet e = bind(tape, enc.mlp, true);
    ad::Var loss = reconstruction_loss(nets.generator, e, bind(tape, nets.perceptual.mlp, false),
                                       bind(tape, nets.identity.mlp, false), tape.constant(xin),
                                       tape.constant(xref), cfg.weights);
    if (!std::isfinite(loss.item()))
      throw std::runtime_error("train_supervised: non-finite loss at iteration " + std::to_string(it));
    tape.backward(loss);
    adam_step(enc.mlp.params, gradients(e), opt);
  }
  return enc;
}

std::string metrics_csv(const std::vector<IterationMetrics>& trace, std::size_t log_every) {
  std::string out = "iteration,L_s,d_st,total\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const IterationMetrics& m = trace[i];
    const bool keep = m.iteration == 1 || (log_every > 0 && m.iteration % log_every == 0) ||
                      i + 1 == trace.size();
    if (!keep) continue;
    out += std::to_string(m.iteration) + "," + format_double(m.source) + "," +
           format_double(m.discrepancy) + "," + format_double(m.total) + "\n";
  }
  return out;
}

// --- bound audit -----------------------------------------------------------------

namespace {

// Feature map for the audited risk: per-layer unit-normalised activations,
// concatenated.
ad::Var audit_features(const BoundNet& net, ad::Var images) {
  std::vector<ad::Var> parts;
  for (ad::Var f : feature_stack(net, images)) parts.push_back(unit_rows(f));
  return ad::concat(parts, 1);
}

ad::Var row_distance(ad::Var a, ad::Var b) {
  return ad::sqrt(ad::sum(ad::square(a - b), 1) + 1e-18);
}

struct Sample {
  double mean = 0.0;
  double se = 0.0;
};

Sample summarize(const std::vector<double>& xs) {
  Sample s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  if (xs.size() > 1) s.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  return s;
}

std::vector<double> column(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

// min(1, ||phi_H(a_i) - phi_H(b_i)|| / scale) per row.
std::vector<double> clamped_risk(const FeatureNetParams& h, const Tensor& a, const Tensor& b, double scale) {
  ad::Tape tape;
  BoundNet net = bind(tape, h.mlp, false);
  ad::Var d = row_distance(audit_features(net, tape.constant(a)), audit_features(net, tape.constant(b)));
  return column(ad::clamp(d / scale, 0.0, 1.0).value());
}

}  // namespace

std::string BoundAuditReport::to_text() const {
  std::ostringstream o;
  o << "R_t=" << format_double(risk_target) << "\n"
    << "R_s=" << format_double(risk_source) << "\n"
    << "D_hat=" << format_double(discrepancy) << "\n"
    << "lambda_star_hat=" << format_double(joint_risk) << "\n"
    << "slack=" << format_double(slack) << "\n"
    << "se_R_t=" << format_double(se_target) << "\n"
    << "se_R_s=" << format_double(se_source) << "\n"
    << "se_D_hat=" << format_double(se_discrepancy) << "\n"
    << "se_lambda_star_hat=" << format_double(se_joint) << "\n"
    << "sigma=" << format_double(sigma) << "\n"
    << "clamp_scale=" << format_double(clamp_scale) << "\n"
    << "holds=" << (holds ? "true" : "false") << "\n";
  return o.str();
}

BoundAuditReport audit_bound(const Networks& nets, const DomainDataset& eval,
                             const DomainDataset& train_data, const FDivergence& div,
                             const TrainConfig& train_cfg, const AuditConfig& audit) {
  const GeneratorSpec& g = nets.generator;
  auto src = eval.select(Domain::Source);
  auto trg = eval.select(Domain::Target);
  if (src.size() < 2 || trg.empty()) throw ValidationError("audit_bound: eval set needs both domains");
  for (const Record& r : eval.records)
    if (!r.paired || !r.latent)
      throw ValidationError("audit_bound: eval record " + r.filename + " is unpaired or has no latent");

  auto images_of = [](const std::vector<const Record*>& rs) {
    std::vector<Image> v;
    for (const Record* r : rs) v.push_back(r->image);
    return batch_tensor(v);
  };
  auto refs_of = [&](const std::vector<const Record*>& rs) {
    std::vector<LatentCode> ws;
    for (const Record* r : rs) ws.push_back(*r->latent);
    ad::Tape tape;
    return generate(g, tape.constant(batch_tensor(ws))).value();
  };
  const Tensor xs = images_of(src), xt = images_of(trg);
  const Tensor fs = refs_of(src), ft = refs_of(trg);

  BoundAuditReport rep;
  if (audit.clamp_scale > 0.0) {
    rep.clamp_scale = audit.clamp_scale;
  } else {
    Tensor shifted(xs.shape());
    const std::size_t n = xs.rows(), w = xs.cols();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < w; ++c) shifted[i * w + c] = xs[((i + 1) % n) * w + c];
    std::vector<double> d = clamped_risk(nets.perceptual, xs, shifted, 1e300);
    for (double& v : d) v *= 1e300;
    std::sort(d.begin(), d.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(d.size())));
    rep.clamp_scale = d[std::max<std::size_t>(rank, 1) - 1];
  }
  const double c = rep.clamp_scale;

  // Risks of the audited hypothesis against ground-truth references.
  const Tensor recon_s = invert(nets, xs), recon_t = invert(nets, xt);
  const Sample rs = summarize(clamped_risk(nets.perceptual, recon_s, fs, c));
  const Sample rt = summarize(clamped_risk(nets.perceptual, recon_t, ft, c));
  rep.risk_source = rs.mean;
  rep.se_source = rs.se;
  rep.risk_target = rt.mean;
  rep.se_target = rt.se;

  // Discrepancy: ascend a perturbed copy of H on the clamped loss.
  MlpParams hhat = perturbed_copy(nets.perceptual.mlp, audit.hhat_init_noise,
                                  derive_seed(audit.seed, "audit/hhat"));
  AdamState opt = AdamState::for_params(hhat.params, {audit.lr_hhat});
  std::vector<double> terms_s, terms_t;
  for (std::size_t step = 0; step <= audit.ascent_steps; ++step) {
    ad::Tape tape;
    BoundNet h = bind(tape, nets.perceptual.mlp, false);
    BoundNet hh = bind(tape, hhat, step < audit.ascent_steps);
    auto loss_rows = [&](const Tensor& recon) {
      ad::Var x = tape.constant(recon);
      return ad::clamp(row_distance(audit_features(hh, x), audit_features(h, x)) / c, 0.0, 1.0);
    };
    ad::Var ls = loss_rows(recon_s);
    ad::Var lt = div.conjugate(loss_rows(recon_t));
    ad::Var d = ad::mean(ls) - ad::mean(lt);
    if (step == audit.ascent_steps) {
      terms_s = column(ls.value());
      terms_t = column(lt.value());
      break;
    }
    tape.backward(d);
    adam_ascend(hhat.params, gradients(hh), opt);
  }
  const Sample ds = summarize(terms_s), dt = summarize(terms_t);
  rep.discrepancy = ds.mean - dt.mean;
  rep.se_discrepancy = std::hypot(ds.se, dt.se);

  // Ideal joint hypothesis: same architecture and budget, trained with pairs.
  std::vector<Image> inputs, references;
  for (const Record& r : train_data.records) {
    if (!r.latent) throw ValidationError("audit_bound: training record " + r.filename + " has no latent");
    inputs.push_back(r.image);
    references.push_back(generate(g, *r.latent));
  }
  TrainConfig joint_cfg = train_cfg;
  joint_cfg.iterations = audit.joint_iterations;
  Networks joint = nets;
  joint.encoder = train_supervised(joint_cfg, nets, inputs, references, audit.seed);
  const Sample js = summarize(clamped_risk(nets.perceptual, invert(joint, xs), fs, c));
  const Sample jt = summarize(clamped_risk(nets.perceptual, invert(joint, xt), ft, c));
  rep.joint_risk = js.mean + jt.mean;
  rep.se_joint = std::hypot(js.se, jt.se);

  rep.slack = rep.risk_source + rep.discrepancy + rep.joint_risk - rep.risk_target;
  rep.sigma = std::sqrt(rep.se_source * rep.se_source + rep.se_target * rep.se_target +
                        rep.se_discrepancy * rep.se_discrepancy + rep.se_joint * rep.se_joint);
  rep.holds = rep.slack >= -3.0 * rep.sigma;
  return rep;
}

}  // namespace udainv
