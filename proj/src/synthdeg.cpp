#include "udainv/synthdeg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "udainv/error.hpp"
#include "udainv/rng.hpp"

namespace udainv {

std::string to_string(DegradationKind kind) {
  switch (kind) {
    case DegradationKind::None: return "none";
    case DegradationKind::Rain: return "rain";
    case DegradationKind::Mask: return "mask";
    case DegradationKind::Downsample: return "downsample";
  }
  return "?";
}

DegradationKind parse_degradation_kind(std::string_view name) {
  for (auto k : {DegradationKind::None, DegradationKind::Rain, DegradationKind::Mask,
                 DegradationKind::Downsample})
    if (to_string(k) == name) return k;
  throw ValidationError("unknown degradation kind '" + std::string(name) +
                        "' (expected none, rain, mask or downsample)");
}

std::string to_string(Domain d) { return d == Domain::Source ? "src" : "trg"; }

Domain parse_domain(std::string_view name) {
  if (name == "src") return Domain::Source;
  if (name == "trg") return Domain::Target;
  throw ValidationError("unknown domain '" + std::string(name) + "' (expected src or trg)");
}

namespace {

Image rain(const Image& x, const RainParams& p, Rng& rng) {
  Image out = x;
  const auto side = static_cast<int>(x.side);
  std::uniform_real_distribution<double> angle_dist(p.angle_min_deg, p.angle_max_deg);
  std::uniform_real_distribution<double> pos(0.0, static_cast<double>(side));
  const double theta = angle_dist(rng) * std::numbers::pi / 180.0;
  const double dx = std::cos(theta);
  const double dy = -std::sin(theta);  // rows grow downward
  std::vector<char> hit(x.pixels.size());
  for (int s = 0; s < p.streaks; ++s) {
    const double x0 = pos(rng);
    const double y0 = pos(rng);
    std::fill(hit.begin(), hit.end(), 0);
    for (int k = 0; k < p.length; ++k) {
      const int c = static_cast<int>(std::floor(x0 + k * dx));
      const int r = static_cast<int>(std::floor(y0 + k * dy));
      if (r < 0 || r >= side || c < 0 || c >= side) continue;
      hit[static_cast<std::size_t>(r * side + c)] = 1;
    }
    for (std::size_t i = 0; i < hit.size(); ++i)
      if (hit[i]) out.pixels[i] += p.intensity;
  }
  for (double& v : out.pixels) v = std::clamp(v, 0.0, 1.0);
  return out;
}

Image mask(const Image& x, const MaskParams& p, Rng& rng) {
  Image out = x;
  const auto side = static_cast<int>(x.side);
  std::uniform_int_distribution<int> radius_dist(p.radius_min, p.radius_max);
  std::uniform_int_distribution<int> start(0, side - 1);
  std::uniform_int_distribution<int> move(0, 7);
  static constexpr int kDx[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
  static constexpr int kDy[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
  const int radius = radius_dist(rng);
  int r = start(rng), c = start(rng);
  const double fill = std::clamp(p.fill, 0.0, 1.0);
  for (int step = 0; step < p.steps; ++step) {
    for (int dr = -radius; dr <= radius; ++dr)
      for (int dc = -radius; dc <= radius; ++dc) {
        if (dr * dr + dc * dc > radius * radius) continue;
        const int rr = r + dr, cc = c + dc;
        if (rr < 0 || rr >= side || cc < 0 || cc >= side) continue;
        out.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)) = fill;
      }
    const int m = move(rng);
    r += kDy[m];
    c += kDx[m];
    if (r < 0 || r >= side) r -= 2 * kDy[m];  // reflect off the border
    if (c < 0 || c >= side) c -= 2 * kDx[m];
  }
  return out;
}

// Average pooling by `factor`, then bilinear upsampling (half-pixel centres,
// edge-clamped) back to the original grid.
Image downsample(const Image& x, const DownsampleParams& p) {
  const auto side = static_cast<int>(x.side);
  const int f = p.factor;
  if (f < 1 || side % f != 0)
    throw ValidationError("downsample: factor " + std::to_string(f) + " does not divide image side " +
                          std::to_string(side));
  const int small = side / f;
  std::vector<double> pooled(static_cast<std::size_t>(small * small), 0.0);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c)
      pooled[static_cast<std::size_t>((r / f) * small + c / f)] +=
          x.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  for (double& v : pooled) v /= static_cast<double>(f * f);

  Image out(x.side);
  auto sample = [&](int r, int c) { return pooled[static_cast<std::size_t>(r * small + c)]; };
  for (int r = 0; r < side; ++r) {
    const double sy = std::clamp((r + 0.5) / f - 0.5, 0.0, static_cast<double>(small - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, small - 1);
    const double ty = sy - y0;
    for (int c = 0; c < side; ++c) {
      const double sx = std::clamp((c + 0.5) / f - 0.5, 0.0, static_cast<double>(small - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, small - 1);
      const double tx = sx - x0;
      const double top = (1.0 - tx) * sample(y0, x0) + tx * sample(y0, x1);
      const double bottom = (1.0 - tx) * sample(y1, x0) + tx * sample(y1, x1);
      out.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
          std::clamp((1.0 - ty) * top + ty * bottom, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace

Image degrade(const Image& x, const DegradationSpec& deg) {
  Rng rng(deg.seed);
  switch (deg.kind) {
    case DegradationKind::None: return x;
    case DegradationKind::Rain: return rain(x, deg.rain, rng);
    case DegradationKind::Mask: return mask(x, deg.mask, rng);
    case DegradationKind::Downsample: return downsample(x, deg.downsample);
  }
  throw ValidationError("degrade: unknown degradation kind " +
                        std::to_string(static_cast<int>(deg.kind)));
}

std::vector<Image> DomainDataset::images(Domain d) const {
  std::vector<Image> out;
  for (const Record& r : records)
    if (r.domain == d) out.push_back(r.image);
  return out;
}

std::vector<const Record*> DomainDataset::select(Domain d) const {
  std::vector<const Record*> out;
  for (const Record& r : records)
    if (r.domain == d) out.push_back(&r);
  return out;
}

std::size_t DomainDataset::count(Domain d) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [d](const Record& r) { return r.domain == d; }));
}

namespace {

std::vector<LatentCode> draw_latents(std::size_t n, std::size_t dim, std::uint64_t stream_seed) {
  Rng rng(stream_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<LatentCode> ws(n);
  for (auto& w : ws) {
    w.w.resize(dim);
    for (double& v : w.w) v = normal(rng);
  }
  return ws;
}

std::string record_name(std::size_t index, Domain d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu_%s.pgm", index, to_string(d).c_str());
  return buf;
}

// Renders (and for the target domain degrades) every record; records are
// independent, each with its own seed.
void render(const GeneratorSpec& g, std::vector<Record>& records) {
  const auto n = static_cast<long>(records.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    Record& r = records[static_cast<std::size_t>(i)];
    Image clean = generate(g, *r.latent);
    r.image = r.domain == Domain::Target ? degrade(clean, r.degradation) : std::move(clean);
  }
}

}  // namespace

DomainDataset sample_domain(const GeneratorSpec& g, std::size_t n, Domain domain,
                            const DegradationSpec& deg, std::uint64_t seed) {
  if (n == 0) throw ValidationError("sample_domain: n must be positive");
  const std::uint64_t stream = derive_seed(seed, domain == Domain::Source ? "latents/src" : "latents/trg");
  const auto ws = draw_latents(n, g.latent_dim, stream);
  DomainDataset ds;
  ds.records.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Record& r = ds.records[i];
    r.filename = record_name(i, domain);
    r.domain = domain;
    r.record_seed = derive_seed(stream, i);
    r.degradation = domain == Domain::Target ? deg.with_seed(derive_seed(r.record_seed, "degrade"))
                                             : DegradationSpec{};
    r.latent = ws[i];
  }
  render(g, ds.records);
  return ds;
}

DomainDataset sample_training_split(const GeneratorSpec& g, std::size_t n_src, std::size_t n_trg,
                                    const DegradationSpec& deg, std::uint64_t seed) {
  DomainDataset ds = sample_domain(g, n_src, Domain::Source, deg, seed);
  if (n_trg > 0) {
    DomainDataset trg = sample_domain(g, n_trg, Domain::Target, deg, seed);
    for (Record& r : trg.records) {
      r.filename = record_name(ds.records.size(), Domain::Target);
      ds.records.push_back(std::move(r));
    }
  }
  return ds;
}

DomainDataset sample_paired_eval(const GeneratorSpec& g, std::size_t n, const DegradationSpec& deg,
                                 std::uint64_t seed) {
  if (n == 0) throw ValidationError("sample_paired_eval: n must be positive");
  const std::uint64_t stream = derive_seed(seed, "latents/eval");
  const auto ws = draw_latents(n, g.latent_dim, stream);
  DomainDataset ds;
  ds.records.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < 2; ++k) {
      const Domain d = k == 0 ? Domain::Source : Domain::Target;
      Record& r = ds.records[k * n + i];
      r.filename = record_name(k * n + i, d);
      r.domain = d;
      r.record_seed = derive_seed(stream, i);
      r.degradation = d == Domain::Target ? deg.with_seed(derive_seed(r.record_seed, "degrade"))
                                          : DegradationSpec{};
      r.latent = ws[i];
      r.paired = true;
    }
  }
  render(g, ds.records);
  return ds;
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
  write_pgm_strip(path, {img});
}

void write_pgm_strip(const std::filesystem::path& path, const std::vector<Image>& images) {
  if (images.empty()) throw ValidationError("write_pgm: no images");
  const std::size_t side = images.front().side;
  const std::size_t width = side * images.size();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << "P5\n" << width << " " << side << "\n255\n";
  std::vector<unsigned char> row(width);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t k = 0; k < images.size(); ++k) {
      if (images[k].side != side) throw ShapeError("write_pgm_strip: images differ in size");
      for (std::size_t c = 0; c < side; ++c) {
        const double v = std::clamp(images[k].at(r, c), 0.0, 1.0);
        row[k * side + c] = static_cast<unsigned char>(std::lround(255.0 * v));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

namespace {

std::string next_token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  while (in) {
    const int ch = in.peek();
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  in >> tok;
  if (tok.empty()) throw FormatError(path.string() + ": truncated PGM header");
  return tok;
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  if (next_token(in, path) != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
  std::size_t w = 0, h = 0;
  int maxval = 0;
  try {
    w = std::stoul(next_token(in, path));
    h = std::stoul(next_token(in, path));
    maxval = std::stoi(next_token(in, path));
  } catch (const std::logic_error&) {
    throw FormatError(path.string() + ": malformed PGM header");
  }
  if (w != h || w == 0) throw FormatError(path.string() + ": expected a square image");
  if (maxval != 255) throw FormatError(path.string() + ": maxval must be 255");
  in.get();  // single whitespace before raster
  std::vector<unsigned char> raster(w * h);
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (in.gcount() != static_cast<std::streamsize>(raster.size()))
    throw FormatError(path.string() + ": truncated raster");
  Image img(w);
  for (std::size_t i = 0; i < raster.size(); ++i) img.pixels[i] = raster[i] / 255.0;
  return img;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void write_dataset(const DomainDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::size_t dim = 0;
  for (const Record& r : ds.records)
    if (r.latent) dim = std::max(dim, r.latent->w.size());
  std::ofstream out(dir / "manifest.csv", std::ios::binary);
  if (!out) throw FormatError("cannot write manifest in " + dir.string());
  out << "filename,domain,deg_kind,deg_seed,paired";
  for (std::size_t i = 0; i < dim; ++i) out << ",w" << i;
  out << "\n";
  for (const Record& r : ds.records) {
    write_pgm(dir / r.filename, r.image);
    out << r.filename << "," << to_string(r.domain) << "," << to_string(r.degradation.kind) << ","
        << r.degradation.seed << "," << (r.paired ? "true" : "false");
    for (std::size_t i = 0; i < dim; ++i) {
      out << ",";
      if (r.latent) out << format_double(r.latent->w.at(i));
    }
    out << "\n";
  }
  if (!out) throw FormatError("write failed for manifest in " + dir.string());
}

DomainDataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.csv", std::ios::binary);
  if (!in) throw FormatError("cannot open " + (dir / "manifest.csv").string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("manifest: missing header row");
  const auto header = split_csv(line);
  const std::vector<std::string> fixed = {"filename", "domain", "deg_kind", "deg_seed", "paired"};
  if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin()))
    throw FormatError("manifest: unexpected header '" + line + "'");
  const std::size_t dim = header.size() - fixed.size();
  for (std::size_t i = 0; i < dim; ++i)
    if (header[fixed.size() + i] != "w" + std::to_string(i))
      throw FormatError("manifest: unexpected latent column '" + header[fixed.size() + i] + "'");

  DomainDataset ds;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    auto fail = [&](const std::string& why) {
      return FormatError("manifest row " + std::to_string(row) + ": " + why);
    };
    if (f.size() != header.size())
      throw fail("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    Record r;
    r.filename = f[0];
    try {
      r.domain = parse_domain(f[1]);
      r.degradation.kind = parse_degradation_kind(f[2]);
      std::size_t used = 0;
      r.degradation.seed = std::stoull(f[3], &used);
      if (used != f[3].size()) throw fail("bad deg_seed '" + f[3] + "'");
    } catch (const ValidationError& e) {
      throw fail(e.what());
    } catch (const std::logic_error&) {
      throw fail("bad deg_seed '" + f[3] + "'");
    }
    if (f[4] != "true" && f[4] != "false") throw fail("paired must be true or false");
    r.paired = f[4] == "true";
    std::size_t empty = 0;
    for (std::size_t i = 0; i < dim; ++i) empty += f[fixed.size() + i].empty();
    if (empty != 0 && empty != dim) throw fail("latent partially present");
    if (dim > 0 && empty == 0) {
      LatentCode w;
      for (std::size_t i = 0; i < dim; ++i) {
        const std::string& s = f[fixed.size() + i];
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(s, &used);
        } catch (const std::logic_error&) {
          throw fail("bad latent value '" + s + "'");
        }
        if (used != s.size()) throw fail("bad latent value '" + s + "'");
        w.w.push_back(v);
      }
      r.latent = std::move(w);
    }
    try {
      r.image = read_pgm(dir / r.filename);
    } catch (const FormatError& e) {
      throw fail(e.what());
    }
    ds.records.push_back(std::move(r));
  }
  return ds;
}

DomainDataset manifest_roundtrip(const DomainDataset& ds, const std::filesystem::path& dir) {
  write_dataset(ds, dir);
  return read_dataset(dir);
}

}  // namespace udainv
