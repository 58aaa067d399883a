#include "udainv/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>

#include "udainv/checks.hpp"
#include "udainv/checkpoint.hpp"
#include "udainv/config.hpp"
#include "udainv/editctl.hpp"
#include "udainv/error.hpp"
#include "udainv/metrics.hpp"
#include "udainv/rng.hpp"
#include "udainv/synthdeg.hpp"
#include "udainv/uda.hpp"

namespace fs = std::filesystem;

namespace udainv {

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
  std::string data;
  std::string resume;
  std::size_t count = 8;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

std::optional<Checkpoint> maybe_checkpoint(const Options& o) {
  if (o.checkpoint.empty()) return std::nullopt;
  if (!fs::exists(o.checkpoint)) throw ValidationError("checkpoint " + o.checkpoint + " does not exist");
  return load_checkpoint(o.checkpoint);
}

// --config wins, then the checkpoint's config echo, then defaults; --seed overrides all.
RunConfig resolve_config(const Options& o, const std::optional<Checkpoint>& ckpt) {
  RunConfig c;
  if (!o.config.empty())
    c = RunConfig::load(o.config);
  else if (ckpt)
    c = RunConfig::parse(ckpt->config_text);
  if (o.seed) c.set_seed(*o.seed);
  return c;
}

fs::path out_dir(const Options& o, const RunConfig& c) { return o.out.empty() ? fs::path(c.output_dir) : fs::path(o.out); }

DomainDataset training_data(const Options& o, const RunConfig& c) {
  if (!o.data.empty()) return read_dataset(fs::path(o.data) / "train");
  return sample_training_split(c.generator, c.src_size, c.trg_size, c.degradation, c.train.seed);
}

DomainDataset eval_data(const Options& o, const RunConfig& c) {
  if (!o.data.empty()) {
    const fs::path root(o.data);
    return read_dataset(fs::exists(root / "manifest.csv") ? root : root / "eval");
  }
  return sample_paired_eval(c.generator, c.eval_size, c.degradation, c.train.seed);
}

Networks networks_from(const Checkpoint& ckpt, const RunConfig& c) {
  return state_from_checkpoint(ckpt, c.generator).nets;
}

const Checkpoint& require(const std::optional<Checkpoint>& ckpt, const char* cmd) {
  if (!ckpt) throw ValidationError(std::string(cmd) + " needs --checkpoint");
  return *ckpt;
}

std::string stem(const Record& r) { return fs::path(r.filename).stem().string(); }

int cmd_synth(const Options& o, std::ostream& out) {
  const RunConfig c = resolve_config(o, std::nullopt);
  const fs::path dir = out_dir(o, c);
  const DomainDataset train = training_data({}, c);
  const DomainDataset eval = eval_data({}, c);
  write_dataset(train, dir / "train");
  write_dataset(eval, dir / "eval");
  write_text(dir / "config.txt", c.to_text());
  out << "synth: " << train.count(Domain::Source) << " src + " << train.count(Domain::Target)
      << " trg training records, " << eval.records.size() << " paired eval records -> " << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve_config(o, std::nullopt);
  TrainState state;
  if (!o.resume.empty()) {
    if (!fs::exists(o.resume)) throw ValidationError("resume checkpoint " + o.resume + " does not exist");
    const Checkpoint ckpt = load_checkpoint(o.resume);
    const RunConfig saved = RunConfig::parse(ckpt.config_text);
    if (saved.generator.latent_dim != c.generator.latent_dim || saved.generator.grid != c.generator.grid)
      throw ValidationError("resume checkpoint was trained with latent_dim=" +
                            std::to_string(saved.generator.latent_dim) + " image_size=" +
                            std::to_string(saved.generator.grid) + ", config has latent_dim=" +
                            std::to_string(c.generator.latent_dim) + " image_size=" +
                            std::to_string(c.generator.grid));
    state = state_from_checkpoint(ckpt, c.generator);
  } else {
    state = TrainState::init(c.generator, c.train);
  }
  const DomainDataset data = training_data(o, c);
  const fs::path dir = out_dir(o, c);
  fs::create_directories(dir);
  const std::size_t total = c.train.iterations;
  try {
    TrainResult r = train(c.train, data, std::move(state), [&](const IterationMetrics& m) {
      if (m.iteration == 1 || m.iteration % std::max<std::size_t>(c.train.log_every, 1) == 0 || m.iteration == total)
        out << "iter " << m.iteration << " L_s=" << m.source << " d_st=" << m.discrepancy
            << " total=" << m.total << "\n"
            << std::flush;
    });
    save_checkpoint(to_checkpoint(r.state, c.to_text()), dir / "checkpoint.bin");
    write_text(dir / "metrics.csv", metrics_csv(r.trace, c.train.log_every));
  } catch (const TrainingDiverged& e) {
    save_checkpoint(to_checkpoint(e.last_finite_state(), c.to_text()), dir / "checkpoint.diverged.bin");
    err << "train: " << e.what() << "; last finite state saved to "
        << (dir / "checkpoint.diverged.bin").string() << "\n";
    return kExitRuntime;
  }
  out << "train: checkpoint -> " << (dir / "checkpoint.bin").string() << "\n";
  return kExitOk;
}

int cmd_invert(const Options& o, std::ostream& out) {
  const auto ckpt = maybe_checkpoint(o);
  const RunConfig c = resolve_config(o, require(ckpt, "invert"));
  const Networks nets = networks_from(*ckpt, c);
  const DomainDataset eval = eval_data(o, c);
  const fs::path dir = out_dir(o, c);
  fs::create_directories(dir);
  std::vector<Image> inputs;
  for (const Record& r : eval.records) inputs.push_back(r.image);
  const std::vector<LatentCode> ws = encode_all(nets.encoder, inputs);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    write_pgm(dir / (stem(eval.records[i]) + "_input.pgm"), inputs[i]);
    write_pgm(dir / (stem(eval.records[i]) + "_recon.pgm"), generate(nets.generator, ws[i]));
  }
  out << "invert: " << ws.size() << " pairs -> " << dir.string() << "\n";
  return kExitOk;
}

int cmd_edit(const Options& o, std::ostream& out) {
  const auto ckpt = maybe_checkpoint(o);
  const RunConfig c = resolve_config(o, require(ckpt, "edit"));
  const Networks nets = networks_from(*ckpt, c);
  const DomainDataset eval = eval_data(o, c);
  const auto src = eval.select(Domain::Source);
  std::vector<Image> images;
  std::vector<int> labels;
  for (const Record* r : src) {
    if (!r->latent) throw ValidationError("edit: record " + r->filename + " carries no latent for labelling");
    images.push_back(r->image);
    labels.push_back(r->latent->w[0] > 0 ? 1 : 0);
  }
  const std::vector<LatentCode> ws = encode_all(nets.encoder, images);
  std::vector<EditDirection> dirs{interfacegan_direction(ws, labels, "w0-sign")};
  for (EditDirection& d : ganspace_directions(ws, std::min<std::size_t>(3, c.generator.latent_dim)))
    dirs.push_back(std::move(d));

  const fs::path dir = out_dir(o, c);
  std::string text;
  for (const EditDirection& d : dirs) text += serialize_direction(d);
  write_text(dir / "directions.txt", text);
  const double alphas[] = {-2.0, -1.0, 0.0, 1.0, 2.0};
  const std::size_t n = std::min(o.count, ws.size());
  for (std::size_t i = 0; i < n; ++i)
    for (const EditDirection& d : dirs) {
      std::vector<Image> strip;
      for (double a : alphas) strip.push_back(apply_edit(nets.generator, ws[i], d, a).second);
      write_pgm_strip(dir / (stem(*src[i]) + "_edit_" + d.attribute + ".pgm"), strip);
    }
  out << "edit: " << dirs.size() << " directions, " << n << " strips each -> " << dir.string() << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const auto ckpt = maybe_checkpoint(o);
  const RunConfig c = resolve_config(o, require(ckpt, "eval"));
  const Networks nets = networks_from(*ckpt, c);
  const std::string csv = metrics_table_csv(evaluate_networks(nets, eval_data(o, c)));
  write_text(out_dir(o, c) / "eval.csv", csv);
  out << csv;
  return kExitOk;
}

int cmd_audit(const Options& o, std::ostream& out) {
  const auto ckpt = maybe_checkpoint(o);
  const RunConfig c = resolve_config(o, require(ckpt, "audit-bound"));
  const Networks nets = networks_from(*ckpt, c);
  const BoundAuditReport rep = audit_bound(nets, eval_data(o, c), training_data(o, c),
                                           FDivergence(c.train.divergence), c.train, c.audit);
  write_text(out_dir(o, c) / "bound.txt", rep.to_text());
  out << rep.to_text();
  return kExitOk;
}

int cmd_divcheck(const Options& o, std::ostream& out) {
  bool ok = true;
  for (const DivCheckLine& l : divcheck_suite(o.seed.value_or(1))) {
    out << (l.pass ? "PASS " : "FAIL ") << l.name << " value=" << format_double(l.value)
        << " reference=" << format_double(l.reference) << " tolerance=" << format_double(l.tolerance) << "\n";
    ok = ok && l.pass;
  }
  return ok ? kExitOk : kExitRuntime;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  double worst = 0.0;
  for (const GradCheckCase& g : gradcheck_suite(o.seed.value_or(1))) {
    out << g.name << " " << format_double(g.max_rel_error) << "\n";
    worst = std::max(worst, g.max_rel_error);
  }
  const bool ok = worst < kGradCheckTolerance;
  out << "max_rel_error=" << format_double(worst) << " " << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"latent inversion of a procedural generator across clean and degraded domains", "udainv"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub, bool with_checkpoint) {
    sub->add_option("--config", o.config, "key=value run configuration");
    sub->add_option("--seed", o.seed, "overrides the configured seed");
    sub->add_option("--out", o.out, "output directory");
    if (with_checkpoint) {
      sub->add_option("--checkpoint", o.checkpoint, "trained checkpoint");
      sub->add_option("--data", o.data, "dataset directory written by synth");
    }
  };
  auto* synth = app.add_subcommand("synth", "render training and paired evaluation datasets");
  common(synth, false);
  auto* train_cmd = app.add_subcommand("train", "train the encoder");
  common(train_cmd, false);
  train_cmd->add_option("--data", o.data, "dataset directory written by synth");
  train_cmd->add_option("--resume", o.resume, "continue from a checkpoint");
  auto* invert = app.add_subcommand("invert", "write input/reconstruction image pairs");
  common(invert, true);
  auto* edit = app.add_subcommand("edit", "discover edit directions and write alpha sweeps");
  common(edit, true);
  edit->add_option("--count", o.count, "number of images to edit");
  auto* eval = app.add_subcommand("eval", "reconstruction metrics per split");
  common(eval, true);
  auto* audit = app.add_subcommand("audit-bound", "empirical audit of the domain adaptation bound");
  common(audit, true);
  auto* divcheck = app.add_subcommand("divcheck", "f-divergence conjugate and estimator checks");
  common(divcheck, false);
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  common(gradcheck, false);

  if (!args.empty() && !args[0].empty() && args[0][0] != '-' && !app.get_subcommand_no_throw(args[0])) {
    err << "udainv: unknown command '" << args[0] << "'\n";
    return kExitValidation;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "udainv: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (synth->parsed()) return cmd_synth(o, out);
    if (train_cmd->parsed()) return cmd_train(o, out, err);
    if (invert->parsed()) return cmd_invert(o, out);
    if (edit->parsed()) return cmd_edit(o, out);
    if (eval->parsed()) return cmd_eval(o, out);
    if (audit->parsed()) return cmd_audit(o, out);
    if (divcheck->parsed()) return cmd_divcheck(o, out);
    if (gradcheck->parsed()) return cmd_gradcheck(o, out);
  } catch (const std::invalid_argument& e) {
    err << "udainv: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "udainv: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace udainv
