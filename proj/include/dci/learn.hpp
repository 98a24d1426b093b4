#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dci/parallel.hpp"
#include "dci/sessionize.hpp"

namespace dci::learn {

class BadSimplex : public Error {
 public:
  using Error::Error;
};

class WindowTooShort : public Error {
 public:
  using Error::Error;
};

class Degenerate : public Error {
 public:
  using Error::Error;
};

struct Tensor2 {
  int rows = 0, cols = 0;
  std::vector<double> data;  // row-major

  static Tensor2 zeros(int r, int c) {
    return {r, c, std::vector<double>(static_cast<std::size_t>(r) * c, 0.0)};
  }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

// ---------------------------------------------------------------------------
// datasets

enum class Task { Service, App };

const char* to_string(Task t);
Task task_from_string(const std::string& s);

struct Dataset {
  int w = 0;
  int num_classes = 0;
  std::vector<WindowSample> windows;
  std::vector<int> labels;  // class ids in [0, num_classes)

  std::size_t size() const { return windows.size(); }
  Dataset subset(const std::vector<std::size_t>& idx) const;
};

// Maps window label tags onto class ids for the task (K=3 services, K=6
// apps). Throws Degenerate on unlabeled windows or unknown tags.
Dataset make_dataset(std::vector<WindowSample> windows, Task task);

struct SplitIndices {
  std::vector<std::size_t> train, val;
};

// Class-balanced split: per class, a seeded shuffle and a floor(split*n)
// prefix into train. Degenerate when a class cannot place at least one
// sample on each side.
SplitIndices balanced_split(const std::vector<int>& labels, double split, std::uint64_t seed);

// ---------------------------------------------------------------------------
// shared numeric pieces

std::vector<double> softmax(const std::vector<double>& z);
int argmax(const std::vector<double>& v);  // lowest index wins ties

// -log(probs[target]); probs must sum to 1 within 1e-9. Probabilities are
// clamped to [1e-12, 1] before the log.
double cross_entropy(const std::vector<double>& probs, int target_class);

// Valid (no padding) 1-D convolution with a 5-tap kernel.
std::vector<double> conv1d(const std::vector<double>& signal,
                           const std::array<double, 5>& kernel, double bias);

// Non-overlapping max pooling; the trailing remainder is dropped.
std::vector<double> maxpool1d(const std::vector<double>& signal, int width = 3);

struct RmsProp {
  double lr = 1e-3;
  double rho = 0.9;
  double eps = 1e-8;
};

// cache <- rho*cache + (1-rho)*g^2 ; p <- p - lr*g/(sqrt(cache)+eps)
void rmsprop_step(std::vector<double>& params, const std::vector<double>& grad,
                  std::vector<double>& cache, const RmsProp& opt);

// ---------------------------------------------------------------------------
// multilayer perceptron: fully connected stack, leaky-ReLU hidden layers,
// softmax output. Parameters live in one flat vector (per layer: weight
// matrix row-major, then bias).

struct MlpModel {
  std::vector<int> sizes;  // [in, hidden..., K]
  double alpha = 0.1;      // leaky-ReLU negative slope
  std::vector<double> params;

  int input_len() const { return sizes.front(); }
  int num_classes() const { return sizes.back(); }
  int parameter_count() const { return static_cast<int>(params.size()); }
};

// The classifier stack used throughout: hidden layers of 128 and 64 units.
MlpModel make_mlp(int input_len, int k, std::uint64_t seed);
MlpModel make_mlp_custom(const std::vector<int>& sizes, double alpha, std::uint64_t seed);

std::vector<double> forward_mlp(const MlpModel& model, const std::vector<double>& x);

// Summed cross-entropy over a batch and its exact gradient w.r.t. params.
double mlp_batch_loss(const MlpModel& model, const Dataset& data,
                      std::span<const std::size_t> idx);
std::vector<double> mlp_batch_gradient(const MlpModel& model, const Dataset& data,
                                       std::span<const std::size_t> idx,
                                       double* loss_out = nullptr);

// ---------------------------------------------------------------------------
// 1-D CNN: two conv(1x5)+maxpool(1x3) stages, then dense 32 (leaky ReLU) and
// dense K (softmax). conv1 applies each of its n1 kernels to the DL and UL
// channels separately (shared weights, one bias per kernel), giving 2*n1
// maps; conv2 is a full multi-channel convolution over those maps.

struct CnnShape {
  int w = 0;
  int conv1_len = 0, pool1_len = 0, conv2_len = 0, pool2_len = 0;
};

// Shape arithmetic for the two stages; throws WindowTooShort when any stage
// comes out empty (W must be at least 25).
CnnShape cnn_shape(int w);

struct CnnModel {
  int w = 0, k = 0;
  int n1 = 32, n2 = 64, fc = 32;
  double alpha = 0.1;
  std::vector<double> params;

  CnnShape shape() const { return cnn_shape(w); }
  int parameter_count() const { return static_cast<int>(params.size()); }
};

CnnModel make_cnn(int w, int k, std::uint64_t seed);
CnnModel make_cnn_custom(int w, int k, int n1, int n2, int fc, double alpha,
                         std::uint64_t seed);

std::vector<double> forward_cnn(const CnnModel& model, const WindowSample& x);

double cnn_batch_loss(const CnnModel& model, const Dataset& data,
                      std::span<const std::size_t> idx);
std::vector<double> cnn_batch_gradient(const CnnModel& model, const Dataset& data,
                                       std::span<const std::size_t> idx,
                                       double* loss_out = nullptr);

// ---------------------------------------------------------------------------
// training

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  RmsProp opt{};
  std::uint64_t seed = 1;
  double split = 0.7;
};

struct TrainResult {
  SplitIndices split;
  // entry 0 is the pre-training state, entry e the state after epoch e
  std::vector<double> train_acc, val_acc, train_loss;
};

TrainResult train(MlpModel& model, const Dataset& data, const TrainConfig& cfg);
TrainResult train(CnnModel& model, const Dataset& data, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// benchmark classifiers

struct KnnModel {
  int k_neighbors = 3;
  int num_classes = 0;
  int dim = 0;
  std::vector<std::vector<double>> points;
  std::vector<int> labels;
};

KnnModel make_knn(const Dataset& data, const std::vector<std::size_t>& train_idx,
                  int k_neighbors = 3);

// Majority vote among the k nearest by Euclidean distance; ties broken by
// smaller summed distance, then lower class index.
int knn_classify(const KnnModel& model, const std::vector<double>& x);
std::vector<double> knn_proba(const KnnModel& model, const std::vector<double>& x);

// One-vs-rest L2-regularized logistic regression trained by full-batch
// gradient descent from zero weights (deterministic).
struct LogRegModel {
  int num_classes = 0;
  int dim = 0;
  double lambda = 1.0;
  std::vector<double> params;  // per class: dim weights then bias
};

struct LogRegConfig {
  int epochs = 400;
  double lr = 0.5;
  double lambda = 1.0;  // = 1/c with the conventional c = 1
};

LogRegModel train_logreg(const Dataset& data, const std::vector<std::size_t>& train_idx,
                         const LogRegConfig& cfg);
std::vector<double> logreg_scores(const LogRegModel& model, const std::vector<double>& x);
int logreg_classify(const LogRegModel& model, const std::vector<double>& x);

// Objective and exact gradient of one binary one-vs-rest problem (targets in
// {0,1}); exposed for the finite-difference check. params = dim weights + bias.
double logreg_loss(std::span<const double> params, const std::vector<std::vector<double>>& xs,
                   const std::vector<int>& targets, double lambda);
std::vector<double> logreg_gradient(std::span<const double> params,
                                    const std::vector<std::vector<double>>& xs,
                                    const std::vector<int>& targets, double lambda);

// ---------------------------------------------------------------------------
// metrics

struct EvalReport {
  int num_classes = 0;
  double accuracy = 0, precision = 0, recall = 0, f_score = 0;
  std::vector<std::vector<std::int64_t>> counts;  // K x K, row = true class
  std::vector<std::vector<double>> confusion;     // rows normalized to 1 (or 0)
};

EvalReport report_from_predictions(const std::vector<int>& truth,
                                   const std::vector<int>& pred, int k);

// ---------------------------------------------------------------------------
// trained-model container and persistence

struct ModelMeta {
  std::string type;  // mlp|cnn|knn|logreg
  Task task = Task::Service;
  int k = 0;
  WindowingParams windowing;
  double split = 0.7;
  std::uint64_t seed = 0;
};

struct SavedModel {
  ModelMeta meta;
  std::variant<MlpModel, CnnModel, KnnModel, LogRegModel> model;

  int num_classes() const { return meta.k; }
  int window_len() const { return meta.windowing.w_s; }
  std::vector<double> proba(const WindowSample& x) const;
  int classify(const WindowSample& x) const;
  int parameter_count() const;
};

std::vector<std::vector<double>> proba_batch(const SavedModel& model,
                                             const std::vector<WindowSample>& windows,
                                             Exec exec = Exec::Parallel);
EvalReport evaluate(const SavedModel& model, const Dataset& data,
                    Exec exec = Exec::Parallel);

// Model file: one JSON header line (type, task, K, W, windowing, seed, arch,
// parameter count, architecture hash) followed by the raw little-endian
// float64 parameter blob. Loading re-derives the architecture hash and
// validates it together with all size fields.
void save_model(const SavedModel& model, const std::string& path);

struct LoadedModel {
  SavedModel model;
  std::uint64_t file_hash = 0;  // FNV-1a over the file bytes
};
LoadedModel load_model(const std::string& path);

}  // namespace dci::learn
