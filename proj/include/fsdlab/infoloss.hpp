#pragma once

// Gaussian information measures over layer activations: differential
// entropy, mutual information between the two sides of a downsampling
// layer, a reciprocal information-loss score, and low-rank spectral
// retention — plus a per-reduction-layer report for a built model.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fsdlab/linalg.hpp"
#include "fsdlab/model.hpp"
#include "fsdlab/rng.hpp"

namespace fsdlab {

constexpr double kLn2PiE = 2.8378770664093454836;  // ln(2*pi*e)

struct GaussianModel {
  std::vector<double> mean;
  Matrix cov;

  int dim() const { return static_cast<int>(mean.size()); }

  void validate() const {
    if (mean.empty()) throw ValueError("GaussianModel: dimension must be >= 1");
    if (cov.rows != dim() || cov.cols != dim())
      throw ShapeError("GaussianModel: covariance must be " + std::to_string(dim()) + "x" +
                       std::to_string(dim()));
    if (!is_symmetric(cov)) throw ValueError("GaussianModel: covariance is not symmetric");
    const EigenSym es = eigen_symmetric(cov);
    for (double l : es.values)
      if (l < -1e-10)
        throw ValueError("GaussianModel: covariance has negative eigenvalue " +
                         std::to_string(l));
  }
};

struct JointGaussian {
  GaussianModel x;
  GaussianModel y;
  Matrix cross;  // cov(X, Y), dim(x) rows by dim(y) cols

  Matrix joint_cov() const {
    const int nx = x.dim(), ny = y.dim();
    Matrix j(nx + ny, nx + ny);
    for (int i = 0; i < nx; ++i)
      for (int k = 0; k < nx; ++k) j.at(i, k) = x.cov.at(i, k);
    for (int i = 0; i < ny; ++i)
      for (int k = 0; k < ny; ++k) j.at(nx + i, nx + k) = y.cov.at(i, k);
    for (int i = 0; i < nx; ++i)
      for (int k = 0; k < ny; ++k) {
        j.at(i, nx + k) = cross.at(i, k);
        j.at(nx + k, i) = cross.at(i, k);
      }
    return j;
  }

  void validate() const {
    x.validate();
    y.validate();
    if (cross.rows != x.dim() || cross.cols != y.dim())
      throw ShapeError("JointGaussian: cross-covariance must be " + std::to_string(x.dim()) +
                       "x" + std::to_string(y.dim()));
    const EigenSym es = eigen_symmetric(joint_cov());
    for (double l : es.values)
      if (l < -1e-8 * std::max(1.0, std::abs(es.values.front())))
        throw ValueError("JointGaussian: joint covariance has negative eigenvalue " +
                         std::to_string(l));
  }
};

struct EntropyResult {
  double nats = 0.0;
  bool degenerate = false;  // singular covariance; nats is -inf in that case
};

inline EntropyResult gaussian_entropy(const GaussianModel& g) {
  g.validate();
  const LogDet ld = logdet_psd(g.cov);
  EntropyResult out;
  if (ld.degenerate) {
    out.degenerate = true;
    out.nats = -std::numeric_limits<double>::infinity();
    return out;
  }
  out.nats = 0.5 * (g.dim() * kLn2PiE + ld.value);
  return out;
}

struct MutualInfoResult {
  double nats = 0.0;
  bool fully_correlated = false;  // joint covariance singular: MI unbounded
};

inline MutualInfoResult gaussian_mutual_info(const JointGaussian& j) {
  j.validate();
  const LogDet lx = logdet_psd(j.x.cov);
  const LogDet ly = logdet_psd(j.y.cov);
  const LogDet lj = logdet_psd(j.joint_cov());
  MutualInfoResult out;
  if (lj.degenerate) {
    // |C_joint| collapsed while the marginals need not have: the variables
    // share a deterministic component and the MI diverges.
    out.fully_correlated = true;
    out.nats = std::numeric_limits<double>::infinity();
    return out;
  }
  double nats = 0.5 * (lx.value + ly.value - lj.value);
  if (nats < 0.0) {
    if (nats < -1e-9) throw ValueError("mutual information came out negative: " +
                                       std::to_string(nats));
    nats = 0.0;
  }
  out.nats = nats;
  return out;
}

// Reciprocal-information score: smaller shared information reads as larger
// loss; zero shared information maps to the +infinity sentinel.
inline double info_loss_proxy(double mi_nats) {
  if (mi_nats < 0.0) {
    if (mi_nats < -1e-9) throw ValueError("info_loss_proxy: negative mutual information");
    mi_nats = 0.0;
  }
  if (mi_nats == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / mi_nats;
}

inline GaussianModel empirical_covariance(const std::vector<std::vector<double>>& samples) {
  const int m = static_cast<int>(samples.size());
  if (m < 2) throw ValueError("empirical_covariance: need at least 2 samples, got " +
                              std::to_string(m));
  const int n = static_cast<int>(samples.front().size());
  if (n < 1) throw ValueError("empirical_covariance: samples must be non-empty vectors");
  for (const auto& s : samples)
    if (static_cast<int>(s.size()) != n)
      throw ShapeError("empirical_covariance: ragged sample list");

  GaussianModel g;
  g.mean.assign(static_cast<std::size_t>(n), 0.0);
  for (const auto& s : samples)
    for (int i = 0; i < n; ++i) g.mean[static_cast<std::size_t>(i)] += s[static_cast<std::size_t>(i)];
  for (double& v : g.mean) v /= m;

  g.cov = Matrix(n, n);
  for (const auto& s : samples)
    for (int i = 0; i < n; ++i) {
      const double di = s[static_cast<std::size_t>(i)] - g.mean[static_cast<std::size_t>(i)];
      for (int k = i; k < n; ++k) {
        const double dk = s[static_cast<std::size_t>(k)] - g.mean[static_cast<std::size_t>(k)];
        g.cov.at(i, k) += di * dk;
      }
    }
  for (int i = 0; i < n; ++i)
    for (int k = i; k < n; ++k) {
      const double v = g.cov.at(i, k) / (m - 1);
      g.cov.at(i, k) = v;
      g.cov.at(k, i) = v;
    }
  return g;
}

struct SvdProjection {
  Matrix basis;              // n x d, orthonormal columns (top eigenvectors)
  std::vector<double> spectrum;  // all eigenvalues, descending
  double retention = 0.0;    // top-d eigenvalue mass / total mass
  Matrix project(const Matrix& f) const { return matmul(basis.transposed(), f); }
};

inline SvdProjection svd_project(const Matrix& m, int d) {
  if (m.rows != m.cols) throw ShapeError("svd_project: matrix must be square");
  if (d < 1 || d > m.rows)
    throw ValueError("svd_project: rank " + std::to_string(d) + " out of range [1, " +
                     std::to_string(m.rows) + "]");
  if (!is_symmetric(m, 1e-8)) throw ValueError("svd_project: matrix is not symmetric");
  const EigenSym es = eigen_symmetric(m);
  SvdProjection out;
  out.spectrum = es.values;
  out.basis = Matrix(m.rows, d);
  for (int i = 0; i < m.rows; ++i)
    for (int k = 0; k < d; ++k) out.basis.at(i, k) = es.vectors.at(i, k);
  double total = 0.0, kept = 0.0;
  for (int k = 0; k < m.rows; ++k) {
    const double l = std::max(0.0, es.values[static_cast<std::size_t>(k)]);
    total += l;
    if (k < d) kept += l;
  }
  out.retention = total > 0.0 ? std::min(1.0, kept / total) : 1.0;
  return out;
}

struct BlockInfo {
  std::string block;
  double mi_nats = 0.0;
  bool fully_correlated = false;
  bool degenerate = false;
  double info_loss = 0.0;
  double svd_retention = 1.0;
  int rank = 0;                      // retained rank used for svd_retention
  std::optional<double> model_mi;    // additive-noise closed form, convs only
};

struct InfoReport {
  std::vector<BlockInfo> blocks;
  int sample_dims = 0;
  int batch = 0;
};

namespace detail {

// Evenly seeded coordinate subsample of a flattened activation.
inline std::vector<int> pick_dims(int total, int want, Rng& rng) {
  std::vector<int> dims;
  if (want >= total) {
    dims.resize(static_cast<std::size_t>(total));
    for (int i = 0; i < total; ++i) dims[static_cast<std::size_t>(i)] = i;
    return dims;
  }
  // Floyd's sampling: distinct, order-normalized afterwards.
  std::vector<int> chosen;
  for (int j = total - want; j < total; ++j) {
    const int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(j) + 1));
    if (std::find(chosen.begin(), chosen.end(), t) == chosen.end())
      chosen.push_back(t);
    else
      chosen.push_back(j);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

inline std::vector<std::vector<double>> gather(const Tensor& acts, const std::vector<int>& dims) {
  const int n = acts.dim(0);
  const std::size_t stride = acts.numel() / static_cast<std::size_t>(n);
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& r = rows[static_cast<std::size_t>(i)];
    r.reserve(dims.size());
    const float* base = acts.ptr() + static_cast<std::size_t>(i) * stride;
    for (int d : dims) r.push_back(static_cast<double>(base[d]));
  }
  return rows;
}

}  // namespace detail

// Measures, for every downsampling layer of a built model, how much of the
// incoming signal statistically survives to the outgoing side: empirical MI
// between seeded coordinate subsamples of the two activations, the
// reciprocal-information score, and the spectral mass a proportional rank
// cut of the incoming Gram matrix would retain.  Convolutional reducers
// additionally get the closed-form MI of the additive-noise channel
// Y = X + K with K ~ N(0, var(kernel) I), reported side by side.
inline InfoReport layer_info_report(Model& model, const Tensor& batch, int sample_dims,
                                    std::uint64_t seed = 7) {
  if (sample_dims < 1) throw ValueError("layer_info_report: sample_dims must be >= 1");
  const int n = batch.dim(0);
  if (n < sample_dims + 2)
    throw ValueError("layer_info_report: batch of " + std::to_string(n) +
                     " too small for sample_dims " + std::to_string(sample_dims) +
                     " (need >= sample_dims + 2)");

  InfoReport report;
  report.sample_dims = sample_dims;
  report.batch = n;

  Rng eval_rng(0);  // unused in eval mode; dropout is inert
  model.forward(batch, Mode::Eval, eval_rng);

  bool any_reduction = false;
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const auto& layer = model.layers[li];
    const bool pool_reduce = layer.kind == LayerKind::MaxPool;
    const bool conv_reduce = layer.kind == LayerKind::Conv && layer.stride > 1;
    if (!pool_reduce && !conv_reduce) continue;
    any_reduction = true;

    const Tensor& pre = model.activation(layer.in0);
    const Tensor& post = model.activation(layer.out);
    const int n_pre = static_cast<int>(pre.numel()) / n;
    const int n_post = static_cast<int>(post.numel()) / n;

    Rng rng = Rng::derive(seed, "infoloss", static_cast<std::uint64_t>(li));
    const auto pre_dims = detail::pick_dims(n_pre, sample_dims, rng);
    const auto post_dims = detail::pick_dims(n_post, sample_dims, rng);
    const auto pre_rows = detail::gather(pre, pre_dims);
    const auto post_rows = detail::gather(post, post_dims);

    BlockInfo info;
    info.block = layer.block;

    std::vector<std::vector<double>> joint_rows(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      auto& r = joint_rows[static_cast<std::size_t>(i)];
      r = pre_rows[static_cast<std::size_t>(i)];
      r.insert(r.end(), post_rows[static_cast<std::size_t>(i)].begin(),
               post_rows[static_cast<std::size_t>(i)].end());
    }
    const GaussianModel joint_g = empirical_covariance(joint_rows);
    const int nx = static_cast<int>(pre_dims.size());
    const int ny = static_cast<int>(post_dims.size());

    JointGaussian jg;
    jg.x.mean.assign(joint_g.mean.begin(), joint_g.mean.begin() + nx);
    jg.y.mean.assign(joint_g.mean.begin() + nx, joint_g.mean.end());
    jg.x.cov = Matrix(nx, nx);
    jg.y.cov = Matrix(ny, ny);
    jg.cross = Matrix(nx, ny);
    for (int i = 0; i < nx; ++i)
      for (int k = 0; k < nx; ++k) jg.x.cov.at(i, k) = joint_g.cov.at(i, k);
    for (int i = 0; i < ny; ++i)
      for (int k = 0; k < ny; ++k) jg.y.cov.at(i, k) = joint_g.cov.at(nx + i, nx + k);
    for (int i = 0; i < nx; ++i)
      for (int k = 0; k < ny; ++k) jg.cross.at(i, k) = joint_g.cov.at(i, nx + k);

    const LogDet ldx = logdet_psd(jg.x.cov);
    const LogDet ldy = logdet_psd(jg.y.cov);
    info.degenerate = ldx.degenerate || ldy.degenerate;
    try {
      const MutualInfoResult mi = gaussian_mutual_info(jg);
      info.mi_nats = mi.nats;
      info.fully_correlated = mi.fully_correlated;
      info.info_loss = mi.fully_correlated ? 0.0 : info_loss_proxy(mi.nats);
    } catch (const ValueError&) {
      info.degenerate = true;
      info.mi_nats = 0.0;
      info.info_loss = std::numeric_limits<double>::infinity();
    }

    // Spectral retention of the incoming side at the layer's own reduction
    // ratio, evaluated on the subsampled Gram spectrum.
    {
      const GaussianModel pre_g = empirical_covariance(pre_rows);
      const double ratio = static_cast<double>(n_post) / static_cast<double>(n_pre);
      const int d = std::clamp(static_cast<int>(std::lround(ratio * nx)), 1, nx);
      info.rank = d;
      const SvdProjection proj = svd_project(pre_g.cov, d);
      info.svd_retention = proj.retention;
    }

    if (conv_reduce) {
      // Additive-noise channel with isotropic kernel noise:
      // MI = 1/2 sum ln((lambda_i + s2) / s2) over the incoming spectrum.
      const Tensor& kern = layer.kernel;
      double mean = 0.0;
      for (float w : kern.data) mean += w;
      mean /= static_cast<double>(kern.numel());
      double var = 0.0;
      for (float w : kern.data) var += (w - mean) * (w - mean);
      var /= static_cast<double>(kern.numel());
      const GaussianModel pre_g = empirical_covariance(pre_rows);
      const EigenSym es = eigen_symmetric(pre_g.cov);
      if (var > 0.0) {
        double mi = 0.0;
        for (double l : es.values) mi += 0.5 * std::log((std::max(0.0, l) + var) / var);
        info.model_mi = mi;
      }
    }

    report.blocks.push_back(std::move(info));
  }

  if (!any_reduction) {
    // Nothing downsamples: the "output" is the input itself, so the two
    // sides are identical and the shared information diverges.
    BlockInfo info;
    info.block = "(identity)";
    info.fully_correlated = true;
    info.mi_nats = std::numeric_limits<double>::infinity();
    info.info_loss = 0.0;
    info.svd_retention = 1.0;
    info.rank = 0;
    report.blocks.push_back(std::move(info));
  }
  return report;
}

// --- rendering --------------------------------------------------------------

inline nlohmann::json info_to_json(const InfoReport& r) {
  nlohmann::json j;
  j["sample_dims"] = r.sample_dims;
  j["batch"] = r.batch;
  j["reductions"] = nlohmann::json::array();
  for (const auto& b : r.blocks) {
    nlohmann::json o;
    o["block"] = b.block;
    if (std::isinf(b.mi_nats))
      o["mi_nats"] = "inf";
    else
      o["mi_nats"] = b.mi_nats;
    o["fully_correlated"] = b.fully_correlated;
    o["degenerate"] = b.degenerate;
    if (std::isinf(b.info_loss))
      o["info_loss"] = "inf";
    else
      o["info_loss"] = b.info_loss;
    o["svd_retention"] = b.svd_retention;
    o["rank"] = b.rank;
    if (b.model_mi) o["model_mi_nats"] = *b.model_mi;
    j["reductions"].push_back(std::move(o));
  }
  return j;
}

inline std::string info_to_text(const InfoReport& r) {
  std::ostringstream out;
  out << "information flow at spatial reductions (" << r.sample_dims
      << " sampled coordinates, batch " << r.batch << ")\n";
  out << std::left << std::setw(14) << "block" << std::right << std::setw(12) << "mi (nats)"
      << std::setw(12) << "1/mi" << std::setw(12) << "retention" << std::setw(6) << "rank"
      << std::setw(14) << "model mi" << "\n";
  for (const auto& b : r.blocks) {
    out << std::left << std::setw(14) << b.block << std::right << std::fixed
        << std::setprecision(4);
    if (std::isinf(b.mi_nats))
      out << std::setw(12) << "inf";
    else
      out << std::setw(12) << b.mi_nats;
    if (std::isinf(b.info_loss))
      out << std::setw(12) << "inf";
    else
      out << std::setw(12) << b.info_loss;
    out << std::setw(12) << b.svd_retention << std::setw(6) << b.rank;
    if (b.model_mi)
      out << std::setw(14) << *b.model_mi;
    else
      out << std::setw(14) << "-";
    if (b.fully_correlated) out << "  (fully correlated)";
    if (b.degenerate) out << "  (degenerate)";
    out << "\n";
  }
  return out.str();
}

}  // namespace fsdlab
