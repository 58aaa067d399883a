#include "udainv/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "udainv/error.hpp"

namespace udainv {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end)
    throw ValidationError("config key '" + key + "': cannot parse '" + v + "' as a number");
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Builds a Field for a numeric lvalue reachable from the config.
template <class T, class Access>
Field numeric(const char* key, Access access) {
  return {[key, access](RunConfig& c, const std::string& v) { access(c) = parse_number<T>(key, v); },
          [access](const RunConfig& c) {
            const T& x = access(const_cast<RunConfig&>(c));
            if constexpr (std::is_floating_point_v<T>)
              return format_double(x);
            else
              return std::to_string(x);
          }};
}

using Table = std::vector<std::pair<std::string, Field>>;

const Table& table() {
  static const Table t = [] {
    Table t;
    auto d = [&](const char* k, auto access) {
      using T = std::remove_reference_t<decltype(access(std::declval<RunConfig&>()))>;
      t.emplace_back(k, numeric<T>(k, access));
    };
    d("latent_dim", [](RunConfig& c) -> std::size_t& { return c.generator.latent_dim; });
    d("image_size", [](RunConfig& c) -> std::size_t& { return c.generator.grid; });
    d("lambda1", [](RunConfig& c) -> double& { return c.train.weights.pixel; });
    d("lambda2", [](RunConfig& c) -> double& { return c.train.weights.perceptual; });
    d("lambda3", [](RunConfig& c) -> double& { return c.train.weights.identity; });
    d("lambda_uda", [](RunConfig& c) -> double& { return c.train.lambda_uda; });
    t.emplace_back("divergence",
                   Field{[](RunConfig& c, const std::string& v) { c.train.divergence = divergence_by_name(v).kind(); },
                         [](const RunConfig& c) { return FDivergence(c.train.divergence).name(); }});
    d("batch_size", [](RunConfig& c) -> std::size_t& { return c.train.batch_size; });
    d("iterations", [](RunConfig& c) -> std::size_t& { return c.train.iterations; });
    d("inner_steps", [](RunConfig& c) -> std::size_t& { return c.train.inner_steps; });
    d("lr_encoder", [](RunConfig& c) -> double& { return c.train.lr_encoder; });
    d("lr_hhat", [](RunConfig& c) -> double& { return c.train.lr_hhat; });
    d("hhat_init_noise", [](RunConfig& c) -> double& { return c.train.hhat_init_noise; });
    d("log_every", [](RunConfig& c) -> std::size_t& { return c.train.log_every; });
    d("seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; });
    t.emplace_back("degradation",
                   Field{[](RunConfig& c, const std::string& v) { c.degradation.kind = parse_degradation_kind(v); },
                         [](const RunConfig& c) { return to_string(c.degradation.kind); }});
    d("rain_streaks", [](RunConfig& c) -> int& { return c.degradation.rain.streaks; });
    d("rain_length", [](RunConfig& c) -> int& { return c.degradation.rain.length; });
    d("rain_angle_min", [](RunConfig& c) -> double& { return c.degradation.rain.angle_min_deg; });
    d("rain_angle_max", [](RunConfig& c) -> double& { return c.degradation.rain.angle_max_deg; });
    d("rain_intensity", [](RunConfig& c) -> double& { return c.degradation.rain.intensity; });
    d("mask_steps", [](RunConfig& c) -> int& { return c.degradation.mask.steps; });
    d("mask_radius_min", [](RunConfig& c) -> int& { return c.degradation.mask.radius_min; });
    d("mask_radius_max", [](RunConfig& c) -> int& { return c.degradation.mask.radius_max; });
    d("mask_fill", [](RunConfig& c) -> double& { return c.degradation.mask.fill; });
    d("downsample_factor", [](RunConfig& c) -> int& { return c.degradation.downsample.factor; });
    d("src_size", [](RunConfig& c) -> std::size_t& { return c.src_size; });
    d("trg_size", [](RunConfig& c) -> std::size_t& { return c.trg_size; });
    d("eval_size", [](RunConfig& c) -> std::size_t& { return c.eval_size; });
    t.emplace_back("output_dir", Field{[](RunConfig& c, const std::string& v) { c.output_dir = v; },
                                       [](const RunConfig& c) { return c.output_dir; }});
    d("audit_ascent_steps", [](RunConfig& c) -> std::size_t& { return c.audit.ascent_steps; });
    d("audit_lr_hhat", [](RunConfig& c) -> double& { return c.audit.lr_hhat; });
    d("audit_hhat_init_noise", [](RunConfig& c) -> double& { return c.audit.hhat_init_noise; });
    d("audit_clamp_scale", [](RunConfig& c) -> double& { return c.audit.clamp_scale; });
    d("audit_joint_iterations", [](RunConfig& c) -> std::size_t& { return c.audit.joint_iterations; });
    return t;
  }();
  return t;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : table()) k.push_back(name);
    return k;
  }();
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, f] : table())
    if (name == key) {
      f.set(*this, value);
      if (key == "seed") set_seed(train.seed);
      return;
    }
  throw ValidationError("unknown config key '" + key + "'");
}

void RunConfig::set_seed(std::uint64_t seed) {
  train.seed = seed;
  audit.seed = seed;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (auto [it, fresh] = seen.emplace(key, lineno); !fresh)
      throw ValidationError("config line " + std::to_string(lineno) + ": key '" + key +
                            "' already set on line " + std::to_string(it->second));
    try {
      c.set(key, value);
    } catch (const std::invalid_argument& e) {
      throw ValidationError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [name, f] : table()) out += name + "=" + f.get(*this) + "\n";
  return out;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("config: " + m); };
  if (generator.latent_dim < 8) fail("latent_dim must be at least 8 (the generator reads w0..w7)");
  if (generator.grid < 8) fail("image_size must be at least 8");
  if (train.batch_size < 2) fail("batch_size must be at least 2");
  if (train.iterations == 0) fail("iterations must be positive");
  if (train.weights.pixel < 0 || train.weights.perceptual < 0 || train.weights.identity < 0 ||
      train.lambda_uda < 0)
    fail("loss weights must be non-negative");
  if (!(train.lr_encoder > 0) || !(train.lr_hhat > 0) || !(audit.lr_hhat > 0))
    fail("learning rates must be positive");
  if (train.hhat_init_noise < 0 || audit.hhat_init_noise < 0) fail("hhat_init_noise must be non-negative");
  if (src_size == 0) fail("src_size must be positive");
  if (trg_size == 0 && train.lambda_uda != 0) fail("trg_size may be 0 only when lambda_uda = 0");
  if (eval_size < 2) fail("eval_size must be at least 2");
  if (audit.clamp_scale < 0) fail("audit_clamp_scale must be non-negative");
  if (degradation.rain.angle_min_deg > degradation.rain.angle_max_deg) fail("rain_angle_min exceeds rain_angle_max");
  if (degradation.mask.radius_min < 0 || degradation.mask.radius_min > degradation.mask.radius_max)
    fail("mask radius range is empty");
  if (degradation.downsample.factor < 1) fail("downsample_factor must be at least 1");
  if (output_dir.empty()) fail("output_dir must not be empty");
}

}  // namespace udainv
