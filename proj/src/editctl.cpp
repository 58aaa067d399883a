#include "udainv/editctl.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "udainv/error.hpp"
#include "udainv/synthdeg.hpp"

namespace udainv {

std::string to_string(EditMethod m) { return m == EditMethod::LinearBoundary ? "linear-boundary" : "pca"; }

EditMethod parse_edit_method(std::string_view name) {
  if (name == "linear-boundary") return EditMethod::LinearBoundary;
  if (name == "pca") return EditMethod::Pca;
  throw ValidationError("unknown edit method '" + std::string(name) + "'");
}

namespace {

void normalize(std::vector<double>& v) {
  const double n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  if (n == 0.0) throw DomainError("edit direction has zero norm");
  for (double& x : v) x /= n;
}

std::size_t common_dim(const std::vector<LatentCode>& ws) {
  const std::size_t d = ws.front().w.size();
  for (const LatentCode& w : ws)
    if (w.w.size() != d) throw ShapeError("latent codes of different dimension");
  return d;
}

}  // namespace

EditDirection interfacegan_direction(const std::vector<LatentCode>& latents,
                                     const std::vector<int>& labels, std::string attribute,
                                     const LogisticOptions& opt) {
  if (latents.size() != labels.size()) throw ShapeError("interfacegan: latents and labels differ in count");
  if (latents.size() < 20) throw ValidationError("interfacegan: need at least 20 labelled latents");
  const std::size_t positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0 || positives == labels.size())
    throw ValidationError("interfacegan: labels contain a single class");
  for (int y : labels)
    if (y != 0 && y != 1) throw ValidationError("interfacegan: labels must be 0 or 1");
  const std::size_t n = latents.size(), d = common_dim(latents);

  const Tensor x = batch_tensor(latents);
  Tensor y({n, 1});
  for (std::size_t i = 0; i < n; ++i) y[i] = labels[i];
  Tensor w({d, 1}), b({1, 1});
  for (std::size_t step = 0; step < opt.steps; ++step) {
    ad::Tape tape;
    ad::Var wv = tape.parameter(w), bv = tape.parameter(b);
    ad::Var z = ad::matmul(tape.constant(x), wv) + bv;
    ad::Var yv = tape.constant(y);
    // Binary cross-entropy in the stable form log(1 + e^z) - y z = max(z,0) - y z + log(1 + e^-|z|).
    ad::Var relu_z = 0.5 * (z + ad::abs(z));
    ad::Var nll = relu_z - yv * z + ad::log(1.0 + ad::exp(-ad::abs(z)));
    ad::Var loss = ad::mean(nll) + opt.l2 * ad::sum(ad::square(wv));
    tape.backward(loss);
    const Tensor& gw = wv.grad();
    const Tensor& gb = bv.grad();
    for (std::size_t i = 0; i < d; ++i) w[i] -= opt.lr * gw[i];
    b[0] -= opt.lr * gb[0];
  }

  EditDirection dir;
  dir.v.assign(w.values().begin(), w.values().end());
  const double norm = std::sqrt(std::inner_product(dir.v.begin(), dir.v.end(), dir.v.begin(), 0.0));
  normalize(dir.v);
  dir.method = EditMethod::LinearBoundary;
  dir.attribute = std::move(attribute);
  // Smallest signed distance to the boundary over the training set (negative if not separated).
  double margin = INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    double z = b[0];
    for (std::size_t j = 0; j < d; ++j) z += w[j] * latents[i].w[j];
    margin = std::min(margin, (labels[i] == 1 ? z : -z) / norm);
  }
  dir.meta = margin;
  return dir;
}

std::vector<EditDirection> ganspace_directions(const std::vector<LatentCode>& latents, std::size_t k) {
  if (latents.empty()) throw ValidationError("ganspace: no latents");
  const std::size_t d = common_dim(latents);
  if (latents.size() <= d)
    throw ValidationError("ganspace: need more latents than dimensions (" + std::to_string(d) + ")");
  if (k < 1 || k > d) throw ValidationError("ganspace: k must lie in [1, " + std::to_string(d) + "]");
  const auto n = static_cast<Eigen::Index>(latents.size());
  Eigen::MatrixXd m(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, static_cast<Eigen::Index>(j)) = latents[static_cast<std::size_t>(i)].w[j];
  const Eigen::MatrixXd c = m.rowwise() - m.colwise().mean();
  const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd ev = es.eigenvalues();  // ascending
  const double total = ev.sum();

  std::vector<EditDirection> out;
  for (std::size_t r = 0; r < k; ++r) {
    const Eigen::Index col = static_cast<Eigen::Index>(d - 1 - r);
    EditDirection dir;
    dir.method = EditMethod::Pca;
    dir.attribute = "pc" + std::to_string(r);
    dir.v.resize(d);
    std::size_t arg = 0;
    for (std::size_t j = 0; j < d; ++j) {
      dir.v[j] = es.eigenvectors()(static_cast<Eigen::Index>(j), col);
      if (std::abs(dir.v[j]) > std::abs(dir.v[arg])) arg = j;
    }
    if (dir.v[arg] < 0)
      for (double& x : dir.v) x = -x;
    normalize(dir.v);
    dir.meta = total > 0 ? ev(col) / total : 0.0;
    out.push_back(std::move(dir));
  }
  return out;
}

std::pair<LatentCode, Image> apply_edit(const GeneratorSpec& g, const LatentCode& w,
                                        const EditDirection& dir, double alpha) {
  if (w.w.size() != dir.v.size())
    throw ShapeError("apply_edit: latent has " + std::to_string(w.w.size()) + " dims, direction " +
                     std::to_string(dir.v.size()));
  LatentCode out = w;
  if (alpha != 0.0)
    for (std::size_t i = 0; i < out.w.size(); ++i) out.w[i] += alpha * dir.v[i];
  Image img = generate(g, out);
  return {std::move(out), std::move(img)};
}

double attribute_probe(const Image& x) {
  if (x.side == 0) throw ValidationError("attribute_probe: empty image");
  double mass = 0.0, moment = 0.0;
  for (std::size_t r = 0; r < x.side; ++r)
    for (std::size_t c = 0; c < x.side; ++c) {
      mass += x.at(r, c);
      moment += x.at(r, c) * static_cast<double>(c);
    }
  if (mass == 0.0 || x.side == 1) return 0.5;
  return moment / mass / static_cast<double>(x.side - 1);
}

std::string serialize_direction(const EditDirection& d) {
  std::string out = to_string(d.method) + "," + d.attribute + "," + format_double(d.meta) + "\n";
  for (std::size_t i = 0; i < d.v.size(); ++i) out += (i ? "," : "") + format_double(d.v[i]);
  return out + "\n";
}

EditDirection parse_direction(const std::string& text) {
  std::istringstream in(text);
  std::string header, body;
  if (!std::getline(in, header) || !std::getline(in, body))
    throw FormatError("direction: expected a header line and a vector line");
  EditDirection d;
  std::istringstream h(header);
  std::string method, meta;
  if (!std::getline(h, method, ',') || !std::getline(h, d.attribute, ',') || !std::getline(h, meta))
    throw FormatError("direction: header must be method,attribute,meta");
  d.method = parse_edit_method(method);
  try {
    d.meta = std::stod(meta);
    std::istringstream b(body);
    std::string cell;
    while (std::getline(b, cell, ',')) d.v.push_back(std::stod(cell));
  } catch (const std::logic_error&) {
    throw FormatError("direction: malformed number");
  }
  if (d.v.empty()) throw FormatError("direction: empty vector");
  return d;
}

}  // namespace udainv
