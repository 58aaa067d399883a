#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "udainv/nets.hpp"

namespace udainv {

enum class DegradationKind { None, Rain, Mask, Downsample };

std::string to_string(DegradationKind kind);
DegradationKind parse_degradation_kind(std::string_view name);

struct RainParams {
  int streaks = 12;
  int length = 5;
  double angle_min_deg = -60.0;
  double angle_max_deg = -45.0;
  double intensity = 0.25;
};

// Free-form stroke: a random walk painted with a round brush.
struct MaskParams {
  int steps = 40;
  int radius_min = 1;
  int radius_max = 2;
  double fill = 0.0;
};

struct DownsampleParams {
  int factor = 2;
};

struct DegradationSpec {
  DegradationKind kind = DegradationKind::None;
  std::uint64_t seed = 0;
  RainParams rain;
  MaskParams mask;
  DownsampleParams downsample;

  DegradationSpec with_seed(std::uint64_t s) const {
    DegradationSpec d = *this;
    d.seed = s;
    return d;
  }
};

// Deterministic in (kind, seed, params); output pixels stay in [0,1].
Image degrade(const Image& x, const DegradationSpec& deg);

enum class Domain { Source, Target };

std::string to_string(Domain d);
Domain parse_domain(std::string_view name);

struct Record {
  std::string filename;
  Image image;
  Domain domain = Domain::Source;
  DegradationSpec degradation;
  std::optional<LatentCode> latent;
  std::uint64_t record_seed = 0;
  bool paired = false;
};

struct DomainDataset {
  std::vector<Record> records;

  std::vector<Image> images(Domain d) const;
  std::vector<const Record*> select(Domain d) const;
  std::size_t count(Domain d) const;
};

// n records of one domain. Latents come from a stream seeded by (seed, domain),
// so source and target never share latents. Target images are degraded renders.
DomainDataset sample_domain(const GeneratorSpec& g, std::size_t n, Domain domain,
                            const DegradationSpec& deg, std::uint64_t seed);

// Unpaired training split: n_src clean renders plus n_trg degraded renders from
// an independent latent stream.
DomainDataset sample_training_split(const GeneratorSpec& g, std::size_t n_src, std::size_t n_trg,
                                    const DegradationSpec& deg, std::uint64_t seed);

// Evaluation split: n latents, each rendered clean (src) and degraded (trg),
// every record flagged paired and carrying its latent.
DomainDataset sample_paired_eval(const GeneratorSpec& g, std::size_t n, const DegradationSpec& deg,
                                 std::uint64_t seed);

// Binary PGM (P5, maxval 255); pixel byte = round(255 * value).
void write_pgm(const std::filesystem::path& path, const Image& img);
Image read_pgm(const std::filesystem::path& path);
// Several equally sized images side by side.
void write_pgm_strip(const std::filesystem::path& path, const std::vector<Image>& images);

void write_dataset(const DomainDataset& ds, const std::filesystem::path& dir);
DomainDataset read_dataset(const std::filesystem::path& dir);
DomainDataset manifest_roundtrip(const DomainDataset& ds, const std::filesystem::path& dir);

// %.17g, enough digits for an exact double round trip.
std::string format_double(double v);

}  // namespace udainv
