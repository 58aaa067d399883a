#include "udainv/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "udainv/error.hpp"

namespace udainv {

namespace {

void require_same(const Image& a, const Image& b, const char* what) {
  if (a.side != b.side || a.pixels.size() != b.pixels.size())
    throw ShapeError(std::string(what) + ": images are " + std::to_string(a.side) + "x" +
                     std::to_string(a.side) + " and " + std::to_string(b.side) + "x" + std::to_string(b.side));
}

using Matrix = Eigen::MatrixXd;

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != d)
      throw ShapeError("frechet_feature_distance: ragged feature rows");
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Matrix clipped_sqrt(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = ev(i) < 1e-10 ? 0.0 : std::sqrt(ev(i));
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double psnr_from_mse(double mse) {
  if (mse < 1e-12) return kPsnrCap;
  return -10.0 * std::log10(mse);
}

PixelMetrics pixel_metrics(const Image& a, const Image& b) {
  require_same(a, b, "pixel_metrics");
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    s += d * d;
  }
  PixelMetrics m;
  m.mse = s / static_cast<double>(a.pixels.size());
  m.psnr = psnr_from_mse(m.mse);
  return m;
}

double ssim(const Image& a, const Image& b) {
  require_same(a, b, "ssim");
  const std::size_t n = a.side, w = kSsimWindow;
  if (n < w) throw ShapeError("ssim: image smaller than the 7x7 window");
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const double count = static_cast<double>(w * w);
  double total = 0.0;
  for (std::size_t r = 0; r + w <= n; ++r) {
    for (std::size_t c = 0; c + w <= n; ++c) {
      double ma = 0, mb = 0;
      for (std::size_t i = 0; i < w; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          ma += a.at(r + i, c + j);
          mb += b.at(r + i, c + j);
        }
      ma /= count;
      mb /= count;
      double va = 0, vb = 0, cov = 0;
      for (std::size_t i = 0; i < w; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          const double da = a.at(r + i, c + j) - ma, db = b.at(r + i, c + j) - mb;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      va /= count;
      vb /= count;
      cov /= count;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  }
  const std::size_t windows = (n - w + 1) * (n - w + 1);
  return total / static_cast<double>(windows);
}

double frechet_feature_distance(const std::vector<std::vector<double>>& a,
                                const std::vector<std::vector<double>>& b) {
  if (a.empty() || b.empty()) throw ValidationError("frechet_feature_distance: empty feature set");
  const std::size_t dim = a.front().size();
  if (b.front().size() != dim) throw ShapeError("frechet_feature_distance: feature widths differ");
  if (a.size() < dim + 1 || b.size() < dim + 1)
    throw ValidationError("frechet_feature_distance: need at least " + std::to_string(dim + 1) +
                          " samples per set, got " + std::to_string(a.size()) + " and " +
                          std::to_string(b.size()));
  const Matrix ma = to_matrix(a), mb = to_matrix(b);
  const Eigen::RowVectorXd mu_a = ma.colwise().mean(), mu_b = mb.colwise().mean();
  const Matrix ca = ma.rowwise() - mu_a, cb = mb.rowwise() - mu_b;
  const Matrix sa = ca.transpose() * ca / static_cast<double>(a.size() - 1);
  const Matrix sb = cb.transpose() * cb / static_cast<double>(b.size() - 1);
  // tr((Sa Sb)^1/2) = tr((Sa^1/2 Sb Sa^1/2)^1/2), the inner product being symmetric PSD.
  const Matrix ra = clipped_sqrt(sa);
  Matrix inner = ra * sb * ra;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(inner, Eigen::EigenvaluesOnly);
  double tr_sqrt = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) >= 1e-10) tr_sqrt += std::sqrt(es.eigenvalues()(i));
  const double d = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, d);
}

double identity_similarity(const FeatureNetParams& r, const Image& a, const Image& b) {
  const std::vector<double> ea = identity_embed(r, a), eb = identity_embed(r, b);
  double dot = 0.0;
  for (std::size_t i = 0; i < ea.size(); ++i) dot += ea[i] * eb[i];
  return std::clamp(dot, -1.0, 1.0);
}

std::vector<MetricsRow> evaluate_reconstructions(const Networks& nets, const DomainDataset& eval,
                                                 const std::vector<Image>& recon) {
  const std::size_t n = eval.records.size();
  if (recon.size() != n) throw ValidationError("evaluate: one reconstruction per record required");
  std::vector<Image> refs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Record& r = eval.records[i];
    if (!r.paired || !r.latent)
      throw ValidationError("evaluate: record " + r.filename + " has no paired reference");
    refs[i] = generate(nets.generator, *r.latent);
  }

  struct PerImage {
    PixelMetrics px;
    double ssim = 0, ids = 0;
    std::vector<double> feat_recon, feat_ref;
  };
  std::vector<PerImage> per(n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    per[i].px = pixel_metrics(recon[i], refs[i]);
    per[i].ssim = ssim(recon[i], refs[i]);
    per[i].ids = identity_similarity(nets.identity, recon[i], refs[i]);
    per[i].feat_recon = final_features(nets.perceptual, recon[i]);
    per[i].feat_ref = final_features(nets.perceptual, refs[i]);
  }

  std::vector<MetricsRow> rows;
  for (Domain d : {Domain::Source, Domain::Target}) {
    MetricsRow row;
    row.split = to_string(d);
    std::vector<std::vector<double>> fa, fb;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (eval.records[i].domain != d) continue;
      ++count;
      row.psnr += per[i].px.psnr;
      row.mse += per[i].px.mse;
      row.ssim += per[i].ssim;
      row.ids += per[i].ids;
      fa.push_back(per[i].feat_recon);
      fb.push_back(per[i].feat_ref);
    }
    if (count == 0) continue;
    const double k = static_cast<double>(count);
    row.psnr /= k;
    row.mse /= k;
    row.ssim /= k;
    row.ids /= k;
    row.ffd = frechet_feature_distance(fa, fb);
    rows.push_back(row);
  }
  return rows;
}

std::vector<MetricsRow> evaluate_networks(const Networks& nets, const DomainDataset& eval) {
  std::vector<Image> inputs;
  for (const Record& r : eval.records) inputs.push_back(r.image);
  std::vector<Image> recon(inputs.size());
  const std::vector<LatentCode> ws = encode_all(nets.encoder, inputs);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < ws.size(); ++i) recon[i] = generate(nets.generator, ws[i]);
  return evaluate_reconstructions(nets, eval, recon);
}

std::string metrics_table_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "split,PSNR,SSIM,MSE,FFD,IDs\n";
  for (const MetricsRow& r : rows)
    out += r.split + "," + format_double(r.psnr) + "," + format_double(r.ssim) + "," +
           format_double(r.mse) + "," + format_double(r.ffd) + "," + format_double(r.ids) + "\n";
  return out;
}

}  // namespace udainv
