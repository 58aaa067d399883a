#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <sys/wait.h>

#include <doctest.h>

#include "support.hpp"
#include "udainv/checkpoint.hpp"
#include "udainv/cli.hpp"
#include "udainv/config.hpp"

using namespace udainv;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const char* kTiny =
    "src_size=32\ntrg_size=32\neval_size=24\niterations=12\nbatch_size=8\nlog_every=5\n"
    "audit_ascent_steps=10\naudit_joint_iterations=10\n";

fs::path tiny_config(const TempDir& dir, const std::string& extra = "") {
  const fs::path p = dir / "tiny.cfg";
  std::ofstream(p) << kTiny << extra;
  return p;
}

// Every regular file below root, relative path -> bytes.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("unknown command and unknown flag exit 1 naming the offender") {
    Run r = run({"fly"});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("fly") != std::string::npos);
    r = run({"train", "--speed", "3"});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("--speed") != std::string::npos);
    CHECK(run({}).code == kExitValidation);
    CHECK(run({"--help"}).code == kExitOk);
  }

  TEST_CASE("unreadable or invalid config exits 1 naming the problem") {
    TempDir dir("cli_cfg");
    Run r = run({"synth", "--config", (dir / "missing.cfg").string(), "--out", dir.path().string()});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("missing.cfg") != std::string::npos);

    std::ofstream(dir / "bad.cfg") << "iterations=5\nwarp_factor=9\n";
    r = run({"synth", "--config", (dir / "bad.cfg").string(), "--out", dir.path().string()});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("warp_factor") != std::string::npos);
    CHECK(r.err.find("line 2") != std::string::npos);

    std::ofstream(dir / "nan.cfg") << "lr_encoder=fast\n";
    CHECK(run({"train", "--config", (dir / "nan.cfg").string()}).code == kExitValidation);
  }

  TEST_CASE("shipped default config equals the built-in defaults") {
    CHECK(RunConfig::load(UDAINV_DEFAULT_CFG).to_text() == RunConfig().to_text());
  }

  TEST_CASE("the built executable maps errors to exit codes") {
    const std::string exe = UDAINV_CLI;
    auto status = [](const std::string& cmd) {
      const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
      return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    CHECK(status(exe + " fly") == kExitValidation);
    CHECK(status(exe + " divcheck") == kExitOk);
    TempDir dir("cli_exe");
    std::ofstream(dir / "junk.bin") << "not a checkpoint";
    CHECK(status(exe + " eval --checkpoint " + (dir / "junk.bin").string() + " --out " + dir.path().string()) ==
          kExitRuntime);
  }

  TEST_CASE("synth, train, eval: byte-identical reruns; seed changes artifacts") {
    TempDir dir("cli_det");
    const std::string cfg = tiny_config(dir).string();
    for (const char* sub : {"a", "b"}) {
      const std::string out = (dir / sub).string();
      REQUIRE(run({"synth", "--config", cfg, "--out", out + "/data"}).code == kExitOk);
      REQUIRE(run({"train", "--config", cfg, "--out", out + "/run"}).code == kExitOk);
      REQUIRE(run({"eval", "--config", cfg, "--checkpoint", out + "/run/checkpoint.bin", "--out", out + "/eval"})
                  .code == kExitOk);
    }
    const auto a = tree(dir / "a"), b = tree(dir / "b");
    CHECK(a.size() == b.size());
    CHECK(a.count("run/checkpoint.bin") == 1);
    CHECK(a.count("run/metrics.csv") == 1);
    CHECK(a.count("eval/eval.csv") == 1);
    CHECK(a.count("data/train/manifest.csv") == 1);
    for (const auto& [name, bytes] : a) {
      INFO(name);
      CHECK(b.count(name) == 1);
      if (b.count(name)) CHECK(bytes == b.at(name));
    }

    REQUIRE(run({"train", "--config", cfg, "--seed", "2", "--out", (dir / "c").string()}).code == kExitOk);
    CHECK(slurp(dir / "c" / "checkpoint.bin") != a.at("run/checkpoint.bin"));

    const std::string metrics = a.at("run/metrics.csv");
    CHECK(metrics.rfind("iteration,", 0) == 0);
    const std::string evalcsv = a.at("eval/eval.csv");
    CHECK(evalcsv.rfind("split,PSNR,SSIM,MSE,FFD,IDs\n", 0) == 0);
  }

  TEST_CASE("training from a synth directory matches in-memory sampling") {
    TempDir dir("cli_data");
    const std::string cfg = tiny_config(dir).string();
    REQUIRE(run({"synth", "--config", cfg, "--out", (dir / "data").string()}).code == kExitOk);
    REQUIRE(run({"train", "--config", cfg, "--data", (dir / "data").string(), "--out", (dir / "r").string()}).code ==
            kExitOk);
    CHECK(fs::exists(dir / "r" / "checkpoint.bin"));
  }

  TEST_CASE("invert, edit and audit-bound write their artifacts") {
    TempDir dir("cli_art");
    const std::string cfg = tiny_config(dir).string();
    const std::string ckpt = (dir / "run" / "checkpoint.bin").string();
    REQUIRE(run({"train", "--config", cfg, "--out", (dir / "run").string()}).code == kExitOk);

    Run r = run({"invert", "--checkpoint", ckpt, "--out", (dir / "inv").string()});
    REQUIRE(r.code == kExitOk);
    std::size_t inputs = 0, recons = 0;
    for (const auto& e : fs::directory_iterator(dir / "inv")) {
      const std::string n = e.path().filename().string();
      inputs += n.find("_input.pgm") != std::string::npos;
      recons += n.find("_recon.pgm") != std::string::npos;
    }
    CHECK(inputs == 48);
    CHECK(recons == 48);

    r = run({"edit", "--checkpoint", ckpt, "--count", "2", "--out", (dir / "edit").string()});
    REQUIRE(r.code == kExitOk);
    CHECK(slurp(dir / "edit" / "directions.txt").rfind("linear-boundary,w0-sign,", 0) == 0);
    std::size_t strips = 0;
    for (const auto& e : fs::directory_iterator(dir / "edit")) strips += e.path().extension() == ".pgm";
    CHECK(strips == 2 * 4);

    r = run({"audit-bound", "--checkpoint", ckpt, "--out", (dir / "audit").string()});
    REQUIRE(r.code == kExitOk);
    for (const char* key : {"R_t=", "R_s=", "D_hat=", "lambda_star_hat=", "sigma=", "slack=", "holds="})
      CHECK(r.out.find(key) != std::string::npos);
    CHECK(slurp(dir / "audit" / "bound.txt") == r.out);

    CHECK(run({"invert", "--out", (dir / "x").string()}).code == kExitValidation);
    CHECK(run({"eval", "--checkpoint", (dir / "nope.bin").string()}).code == kExitValidation);
  }

  TEST_CASE("damaged checkpoints: truncation and bad magic are runtime errors with details") {
    TempDir dir("cli_ckpt");
    const std::string cfg = tiny_config(dir).string();
    REQUIRE(run({"train", "--config", cfg, "--out", dir.path().string()}).code == kExitOk);
    const std::string bytes = slurp(dir / "checkpoint.bin");

    std::ofstream(dir / "short.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 100);
    Run r = run({"eval", "--checkpoint", (dir / "short.bin").string(), "--out", (dir / "e").string()});
    CHECK(r.code == kExitRuntime);
    CHECK(r.err.find("truncated payload") != std::string::npos);
    CHECK(r.err.find("expected") != std::string::npos);

    std::string bad = bytes;
    bad[0] = 'X';
    std::ofstream(dir / "magic.bin", std::ios::binary) << bad;
    r = run({"eval", "--checkpoint", (dir / "magic.bin").string(), "--out", (dir / "e").string()});
    CHECK(r.code == kExitRuntime);
    CHECK(r.err.find("magic") != std::string::npos);
  }

  TEST_CASE("resume: continues training, rejects a different latent_dim") {
    TempDir dir("cli_resume");
    const std::string cfg = tiny_config(dir).string();
    REQUIRE(run({"train", "--config", cfg, "--out", (dir / "first").string()}).code == kExitOk);
    const std::string first = (dir / "first" / "checkpoint.bin").string();
    REQUIRE(run({"train", "--config", cfg, "--resume", first, "--out", (dir / "second").string()}).code == kExitOk);
    const Checkpoint a = load_checkpoint(first), b = load_checkpoint(dir / "second" / "checkpoint.bin");
    CHECK_FALSE(a == b);

    std::ofstream(dir / "wide.cfg") << kTiny << "latent_dim=12\n";
    const Run r = run({"train", "--config", (dir / "wide.cfg").string(), "--resume", first, "--out",
                       (dir / "third").string()});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("latent_dim=8") != std::string::npos);
    CHECK(r.err.find("latent_dim=12") != std::string::npos);
  }

  TEST_CASE("divcheck and gradcheck reports") {
    Run r = run({"divcheck"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(r.out.find("PearsonChi2") != std::string::npos);

    r = run({"gradcheck", "--seed", "7"});
    INFO(r.out);
    CHECK(r.out.find("max_rel_error=") != std::string::npos);
    CHECK(r.code == kExitOk);
  }
}
