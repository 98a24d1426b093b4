#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dci/learn.hpp"
#include "dci/parallel.hpp"

namespace dci::ood {

class EmptyReferenceSet : public Error {
 public:
  using Error::Error;
};

class SingularCovariance : public Error {
 public:
  using Error::Error;
};

class EmptyTestSet : public Error {
 public:
  using Error::Error;
};

using Vec = std::vector<double>;

// y/||y||, zero vector maps to zero.
Vec spatial_sign(const Vec& y);

// Sample spatial depth of y against the reference set:
//   D = 1 - ||sum_i S(y_i - y)|| / (|refs u {y}| - 1)
// 1 at the spatial median, decays to 0 far away. A reference equal to y
// contributes a zero sign and shrinks the denominator (set-union count).
double spatial_depth(const Vec& y, const std::vector<Vec>& refs);

// Symmetric positive-definite matrix with a cached Cholesky factor.
class Spd {
 public:
  explicit Spd(learn::Tensor2 matrix);  // throws SingularCovariance
  const learn::Tensor2& matrix() const { return matrix_; }
  int dim() const { return matrix_.rows; }
  // x^T M^{-1} x via two triangular solves
  double inverse_quadratic(const Vec& x) const;

 private:
  learn::Tensor2 matrix_;
  learn::Tensor2 chol_;
};

// exp(-(x-y)^T Sigma^{-1} (x-y))
double gaussian_kernel(const Vec& x, const Vec& y, const Spd& sigma);

struct LinearKernel {};
struct GaussianKernel {
  const Spd* sigma;
};

// Kernelized spatial depth: the norm in spatial_depth expanded into inner
// products, each replaced by the kernel. With LinearKernel this reproduces
// spatial_depth exactly (up to round-off).
double ksd(const Vec& y, const std::vector<Vec>& refs, LinearKernel k);
double ksd(const Vec& y, const std::vector<Vec>& refs, const GaussianKernel& k);

// Unbiased sample covariance plus ridge*I (softmax vectors live on a
// simplex, so the raw covariance is singular).
learn::Tensor2 estimate_covariance(const std::vector<Vec>& vectors, double ridge);

struct ClassReferenceSet {
  int class_id = 0;
  std::vector<Vec> vectors;
  learn::Tensor2 covariance;
};

struct OodDetector {
  std::vector<ClassReferenceSet> classes;  // one per class id
  double threshold = 0.0;
  double ridge = 1e-6;
  std::uint64_t seed = 0;
  std::uint64_t model_hash = 0;  // file hash of the classifier it was built with
};

using ProbaFn = std::function<Vec(const WindowSample&)>;

// Reference sets from the classifier's softmax responses on the training
// windows, capped at max_per_class by seeded uniform subsampling. Every
// class in [0, k) must be present.
OodDetector build_detector(const ProbaFn& proba, int k,
                           const std::vector<WindowSample>& train_windows,
                           const std::vector<int>& train_labels, double ridge = 1e-6,
                           std::size_t max_per_class = 500, std::uint64_t seed = 1,
                           Exec exec = Exec::Parallel);

// Depth of y against the reference set of its argmax class.
double depth_for(const OodDetector& detector, const Vec& y);

struct GateResult {
  int cls = 0;       // argmax class
  double depth = 0;  // KSD depth against that class
  bool is_ood = false;
};

// k* = argmax softmax; OOD iff depth < threshold (strict).
GateResult classify_with_ood(const OodDetector& detector, const ProbaFn& proba,
                             const WindowSample& x);

std::vector<GateResult> classify_with_ood_batch(const OodDetector& detector,
                                                const ProbaFn& proba,
                                                const std::vector<WindowSample>& windows,
                                                Exec exec = Exec::Parallel);

// Highest threshold accepting the whole test set under the strict d < t
// rule, i.e. the minimum test depth. Stores it on the detector and returns
// the per-window depths through depths_out when given.
double tune_threshold(OodDetector& detector, const ProbaFn& proba,
                      const std::vector<WindowSample>& test_windows,
                      std::vector<double>* depths_out = nullptr, Exec exec = Exec::Parallel);

// Detector JSON round trip (reference vectors, covariances, ridge, t, the
// classifier hash and the subsampling seed).
void save_detector(const OodDetector& detector, const std::string& path);
OodDetector load_detector(const std::string& path);

}  // namespace dci::ood
