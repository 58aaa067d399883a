#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "udainv/nets.hpp"
#include "udainv/synthdeg.hpp"
#include "udainv/uda.hpp"

namespace udainv {

inline constexpr double kPsnrCap = 99.0;

struct PixelMetrics {
  double mse = 0.0;
  double psnr = 0.0;
};

PixelMetrics pixel_metrics(const Image& a, const Image& b);
double psnr_from_mse(double mse);

// Uniform 7x7 window, stride 1, C1 = 0.01^2, C2 = 0.03^2, mean over windows.
inline constexpr std::size_t kSsimWindow = 7;
double ssim(const Image& a, const Image& b);

// Frechet distance between Gaussians fit to two feature sets (rows = samples).
double frechet_feature_distance(const std::vector<std::vector<double>>& a,
                                const std::vector<std::vector<double>>& b);

double identity_similarity(const FeatureNetParams& r, const Image& a, const Image& b);

struct MetricsRow {
  std::string split;
  double psnr = 0.0;
  double ssim = 0.0;
  double mse = 0.0;
  double ffd = 0.0;
  double ids = 0.0;
};

// Reconstruction rows for each domain present in eval, src first.
std::vector<MetricsRow> evaluate_networks(const Networks& nets, const DomainDataset& eval);
// Same, with reconstructions supplied directly (one per record, record order).
std::vector<MetricsRow> evaluate_reconstructions(const Networks& nets, const DomainDataset& eval,
                                                 const std::vector<Image>& recon);
std::string metrics_table_csv(const std::vector<MetricsRow>& rows);

}  // namespace udainv
