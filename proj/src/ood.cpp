#include "dci/ood.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "json.hpp"

#include "dci/util.hpp"

namespace dci::ood {
namespace {

double norm2(const Vec& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Denominator |refs u {y}| - 1 under set-union semantics.
double union_denominator(const Vec& y, const std::vector<Vec>& refs) {
  const bool coincident = std::any_of(refs.begin(), refs.end(),
                                      [&](const Vec& r) { return r == y; });
  return static_cast<double>(refs.size()) - (coincident ? 1.0 : 0.0);
}

void check_refs(const Vec& y, const std::vector<Vec>& refs) {
  if (refs.empty()) throw EmptyReferenceSet("empty reference set");
  for (const auto& r : refs)
    if (r.size() != y.size()) throw Error("reference dimension mismatch");
}

// Shared KSD expansion over an arbitrary kernel:
//   ||sum_i S(y_i-y)||^2
//     = sum_ij <y_i-y, y_j-y> / (||y_i-y|| ||y_j-y||)
// with every inner product written through k(a,b) = <a,b>:
//   <y_i-y, y_j-y> -> k(y_i,y_j) - k(y_i,y) - k(y_j,y) + k(y,y)
// References coinciding with y (kernelized distance 0) contribute nothing,
// matching the zero spatial sign. The reference-reference kernel values come
// through `gram` so batch callers can precompute them once per class.
template <typename KernelYFn, typename GramFn>
double ksd_core(const Vec& y, const std::vector<Vec>& refs, double kyy, GramFn gram,
                KernelYFn kernel_with_y) {
  check_refs(y, refs);
  const std::size_t n = refs.size();
  std::vector<double> kiy(n);
  std::vector<double> dist(n);  // kernelized ||y_i - y||^2
  for (std::size_t i = 0; i < n; ++i) {
    kiy[i] = kernel_with_y(i);
    dist[i] = std::max(0.0, gram(i, i) - 2.0 * kiy[i] + kyy);
  }
  double sumsq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (dist[i] == 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (dist[j] == 0) continue;
      const double numer = gram(i, j) - kiy[i] - kiy[j] + kyy;
      sumsq += numer / std::sqrt(dist[i] * dist[j]);
    }
  }
  const double denom = union_denominator(y, refs);
  if (denom <= 0) return 1.0;  // refs == {y}
  const double depth = 1.0 - std::sqrt(std::max(0.0, sumsq)) / denom;
  return std::clamp(depth, 0.0, 1.0);
}

template <typename KernelFn>
double ksd_impl(const Vec& y, const std::vector<Vec>& refs, KernelFn kernel) {
  return ksd_core(
      y, refs, kernel(y, y),
      [&](std::size_t i, std::size_t j) { return kernel(refs[i], refs[j]); },
      [&](std::size_t i) { return kernel(refs[i], y); });
}

// Query-independent reference kernel matrix for one class.
std::vector<double> gram_matrix(const std::vector<Vec>& refs, const Spd& sigma) {
  const std::size_t n = refs.size();
  std::vector<double> gram(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double k = gaussian_kernel(refs[i], refs[j], sigma);
      gram[i * n + j] = k;
      gram[j * n + i] = k;
    }
  return gram;
}

double ksd_with_gram(const Vec& y, const std::vector<Vec>& refs, const Spd& sigma,
                     const std::vector<double>& gram) {
  const std::size_t n = refs.size();
  return ksd_core(
      y, refs, 1.0,  // gaussian kernel of a point with itself
      [&](std::size_t i, std::size_t j) { return gram[i * n + j]; },
      [&](std::size_t i) { return gaussian_kernel(refs[i], y, sigma); });
}

}  // namespace

Vec spatial_sign(const Vec& y) {
  const double n = norm2(y);
  if (n == 0) return Vec(y.size(), 0.0);
  Vec out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] / n;
  return out;
}

double spatial_depth(const Vec& y, const std::vector<Vec>& refs) {
  check_refs(y, refs);
  Vec sum(y.size(), 0.0);
  for (const auto& r : refs) {
    Vec diff(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) diff[i] = r[i] - y[i];
    const Vec s = spatial_sign(diff);
    for (std::size_t i = 0; i < y.size(); ++i) sum[i] += s[i];
  }
  const double denom = union_denominator(y, refs);
  if (denom <= 0) return 1.0;
  const double depth = 1.0 - norm2(sum) / denom;
  return std::clamp(depth, 0.0, 1.0);
}

Spd::Spd(learn::Tensor2 matrix) : matrix_(std::move(matrix)) {
  const int n = matrix_.rows;
  if (n < 1 || matrix_.cols != n) throw SingularCovariance("matrix is not square");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j)
      if (std::abs(matrix_.at(i, j) - matrix_.at(j, i)) > 1e-12)
        throw SingularCovariance("matrix is not symmetric");
  chol_ = learn::Tensor2::zeros(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = matrix_.at(i, j);
      for (int k = 0; k < j; ++k) s -= chol_.at(i, k) * chol_.at(j, k);
      if (i == j) {
        if (s <= 0) throw SingularCovariance("matrix is not positive definite");
        chol_.at(i, i) = std::sqrt(s);
      } else {
        chol_.at(i, j) = s / chol_.at(j, j);
      }
    }
  }
}

double Spd::inverse_quadratic(const Vec& x) const {
  const int n = matrix_.rows;
  if (static_cast<int>(x.size()) != n) throw Error("quadratic form dimension mismatch");
  // solve L z = x, then x^T M^{-1} x = ||z||^2
  Vec z(x);
  for (int i = 0; i < n; ++i) {
    double s = z[static_cast<std::size_t>(i)];
    for (int k = 0; k < i; ++k) s -= chol_.at(i, k) * z[static_cast<std::size_t>(k)];
    z[static_cast<std::size_t>(i)] = s / chol_.at(i, i);
  }
  double q = 0;
  for (double v : z) q += v * v;
  return q;
}

double gaussian_kernel(const Vec& x, const Vec& y, const Spd& sigma) {
  if (x.size() != y.size()) throw Error("kernel dimension mismatch");
  Vec diff(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) diff[i] = x[i] - y[i];
  return std::exp(-sigma.inverse_quadratic(diff));
}

double ksd(const Vec& y, const std::vector<Vec>& refs, LinearKernel) {
  return ksd_impl(y, refs, [](const Vec& a, const Vec& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  });
}

double ksd(const Vec& y, const std::vector<Vec>& refs, const GaussianKernel& k) {
  return ksd_impl(y, refs,
                  [&](const Vec& a, const Vec& b) { return gaussian_kernel(a, b, *k.sigma); });
}

learn::Tensor2 estimate_covariance(const std::vector<Vec>& vectors, double ridge) {
  if (vectors.size() < 2) throw EmptyReferenceSet("covariance needs at least 2 vectors");
  const int d = static_cast<int>(vectors[0].size());
  Vec mean(static_cast<std::size_t>(d), 0.0);
  for (const auto& v : vectors)
    for (int i = 0; i < d; ++i) mean[static_cast<std::size_t>(i)] += v[static_cast<std::size_t>(i)];
  for (auto& m : mean) m /= static_cast<double>(vectors.size());
  auto cov = learn::Tensor2::zeros(d, d);
  for (const auto& v : vectors)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        cov.at(i, j) += (v[static_cast<std::size_t>(i)] - mean[static_cast<std::size_t>(i)]) *
                        (v[static_cast<std::size_t>(j)] - mean[static_cast<std::size_t>(j)]);
  const double scale = 1.0 / (static_cast<double>(vectors.size()) - 1.0);
  for (auto& v : cov.data) v *= scale;
  for (int i = 0; i < d; ++i) cov.at(i, i) += ridge;
  return cov;
}

OodDetector build_detector(const ProbaFn& proba, int k,
                           const std::vector<WindowSample>& train_windows,
                           const std::vector<int>& train_labels, double ridge,
                           std::size_t max_per_class, std::uint64_t seed, Exec exec) {
  if (train_windows.size() != train_labels.size()) throw Error("label count mismatch");
  std::vector<Vec> responses(train_windows.size());
  for_each_index(train_windows.size(), exec,
                 [&](std::size_t i) { responses[i] = proba(train_windows[i]); });

  OodDetector detector;
  detector.ridge = ridge;
  detector.seed = seed;
  for (int c = 0; c < k; ++c) {
    ClassReferenceSet refs;
    refs.class_id = c;
    for (std::size_t i = 0; i < responses.size(); ++i)
      if (train_labels[i] == c) refs.vectors.push_back(responses[i]);
    if (refs.vectors.size() < 2)
      throw EmptyReferenceSet("class " + std::to_string(c) +
                              " has fewer than 2 training responses");
    if (refs.vectors.size() > max_per_class) {
      std::mt19937_64 rng(mix_seed(seed, 0x0D'0D'0D'0DULL + static_cast<std::uint64_t>(c)));
      std::shuffle(refs.vectors.begin(), refs.vectors.end(), rng);
      refs.vectors.resize(max_per_class);
    }
    refs.covariance = estimate_covariance(refs.vectors, ridge);
    detector.classes.push_back(std::move(refs));
  }
  return detector;
}

double depth_for(const OodDetector& detector, const Vec& y) {
  const int cls = learn::argmax(y);
  if (cls < 0 || static_cast<std::size_t>(cls) >= detector.classes.size())
    throw Error("class " + std::to_string(cls) + " has no reference set");
  const auto& refs = detector.classes[static_cast<std::size_t>(cls)];
  const Spd sigma(refs.covariance);
  return ksd(y, refs.vectors, GaussianKernel{&sigma});
}

GateResult classify_with_ood(const OodDetector& detector, const ProbaFn& proba,
                             const WindowSample& x) {
  const Vec y = proba(x);
  GateResult result;
  result.cls = learn::argmax(y);
  result.depth = depth_for(detector, y);
  result.is_ood = result.depth < detector.threshold;
  return result;
}

std::vector<GateResult> classify_with_ood_batch(const OodDetector& detector,
                                                const ProbaFn& proba,
                                                const std::vector<WindowSample>& windows,
                                                Exec exec) {
  // Cholesky factors and reference kernel matrices shared across the batch
  std::vector<Spd> sigmas;
  std::vector<std::vector<double>> grams;
  sigmas.reserve(detector.classes.size());
  grams.reserve(detector.classes.size());
  for (const auto& c : detector.classes) {
    sigmas.emplace_back(c.covariance);
    grams.push_back(gram_matrix(c.vectors, sigmas.back()));
  }
  std::vector<GateResult> out(windows.size());
  for_each_index(windows.size(), exec, [&](std::size_t i) {
    const Vec y = proba(windows[i]);
    GateResult r;
    r.cls = learn::argmax(y);
    const auto cls = static_cast<std::size_t>(r.cls);
    r.depth = ksd_with_gram(y, detector.classes[cls].vectors, sigmas[cls], grams[cls]);
    r.is_ood = r.depth < detector.threshold;
    out[i] = r;
  });
  return out;
}

double tune_threshold(OodDetector& detector, const ProbaFn& proba,
                      const std::vector<WindowSample>& test_windows,
                      std::vector<double>* depths_out, Exec exec) {
  if (test_windows.empty()) throw EmptyTestSet("cannot tune on an empty test set");
  const auto results = classify_with_ood_batch(detector, proba, test_windows, exec);
  double t_star = 1.0;
  for (const auto& r : results) t_star = std::min(t_star, r.depth);
  if (depths_out != nullptr) {
    depths_out->clear();
    for (const auto& r : results) depths_out->push_back(r.depth);
  }
  detector.threshold = t_star;
  return t_star;
}

void save_detector(const OodDetector& detector, const std::string& path) {
  nlohmann::ordered_json j;
  j["format"] = "dci-detector";
  j["version"] = 1;
  j["threshold"] = detector.threshold;
  j["ridge"] = detector.ridge;
  j["seed"] = detector.seed;
  char hash_hex[24];
  std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                static_cast<unsigned long long>(detector.model_hash));
  j["model_hash"] = hash_hex;
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (const auto& c : detector.classes) {
    nlohmann::ordered_json jc;
    jc["class_id"] = c.class_id;
    jc["vectors"] = c.vectors;
    jc["covariance"] = {{"dim", c.covariance.rows}, {"data", c.covariance.data}};
    classes.push_back(std::move(jc));
  }
  j["classes"] = std::move(classes);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << j.dump() << '\n';
}

OodDetector load_detector(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open detector file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CompatibilityError(std::string("bad detector file: ") + e.what());
  }
  if (j.value("format", "") != "dci-detector" || j.value("version", 0) != 1)
    throw CompatibilityError("unsupported detector file format");
  OodDetector detector;
  try {
    detector.threshold = j.at("threshold").get<double>();
    detector.ridge = j.at("ridge").get<double>();
    detector.seed = j.at("seed").get<std::uint64_t>();
    detector.model_hash = std::stoull(j.at("model_hash").get<std::string>(), nullptr, 16);
    for (const auto& jc : j.at("classes")) {
      ClassReferenceSet refs;
      refs.class_id = jc.at("class_id").get<int>();
      refs.vectors = jc.at("vectors").get<std::vector<Vec>>();
      const int dim = jc.at("covariance").at("dim").get<int>();
      refs.covariance =
          learn::Tensor2{dim, dim, jc.at("covariance").at("data").get<std::vector<double>>()};
      if (refs.covariance.data.size() != static_cast<std::size_t>(dim) * dim)
        throw CompatibilityError("covariance size mismatch");
      detector.classes.push_back(std::move(refs));
    }
  } catch (const CompatibilityError&) {
    throw;
  } catch (const std::exception& e) {
    throw CompatibilityError(std::string("bad detector file: ") + e.what());
  }
  if (static_cast<int>(detector.classes.size()) == 0)
    throw CompatibilityError("detector has no classes");
  for (std::size_t c = 0; c < detector.classes.size(); ++c)
    if (detector.classes[c].class_id != static_cast<int>(c))
      throw CompatibilityError("detector class ids must be 0..K-1 in order");
  return detector;
}

}  // namespace dci::ood
