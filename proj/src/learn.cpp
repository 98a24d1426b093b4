#include "dci/learn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

#include "dci/util.hpp"

namespace dci::learn {
namespace {

double leaky(double x, double alpha) { return x >= 0 ? x : alpha * x; }
double leaky_grad(double x, double alpha) { return x >= 0 ? 1.0 : alpha; }

std::vector<double> glorot_fill(std::size_t count, int fan_in, int fan_out,
                                std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> out(count);
  for (auto& v : out) v = dist(rng);
  return out;
}

void append(std::vector<double>& dst, const std::vector<double>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

// ---- MLP parameter layout -------------------------------------------------

struct MlpLayout {
  struct Layer {
    std::size_t w_off, b_off;
    int in, out;
  };
  std::vector<Layer> layers;
  std::size_t total = 0;
};

MlpLayout mlp_layout(const std::vector<int>& sizes) {
  MlpLayout layout;
  std::size_t off = 0;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const int in = sizes[i], out = sizes[i + 1];
    layout.layers.push_back({off, off + static_cast<std::size_t>(in) * out, in, out});
    off += static_cast<std::size_t>(in) * out + static_cast<std::size_t>(out);
  }
  layout.total = off;
  return layout;
}

struct MlpTrace {
  std::vector<std::vector<double>> pre;   // z per layer
  std::vector<std::vector<double>> post;  // activations per layer (post[0] = x)
  std::vector<double> probs;
};

MlpTrace mlp_forward_trace(const MlpModel& model, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != model.input_len())
    throw Degenerate("input length " + std::to_string(x.size()) + " != " +
                     std::to_string(model.input_len()));
  const MlpLayout layout = mlp_layout(model.sizes);
  MlpTrace trace;
  trace.post.push_back(x);
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const auto& layer = layout.layers[l];
    const double* w = model.params.data() + layer.w_off;
    const double* b = model.params.data() + layer.b_off;
    const auto& in = trace.post.back();
    std::vector<double> z(static_cast<std::size_t>(layer.out));
    for (int r = 0; r < layer.out; ++r) {
      double acc = b[r];
      const double* row = w + static_cast<std::size_t>(r) * layer.in;
      for (int c = 0; c < layer.in; ++c) acc += row[c] * in[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = acc;
    }
    trace.pre.push_back(z);
    const bool last = l + 1 == layout.layers.size();
    if (last) {
      trace.probs = softmax(z);
      trace.post.push_back(trace.probs);
    } else {
      for (auto& v : z) v = leaky(v, model.alpha);
      trace.post.push_back(std::move(z));
    }
  }
  return trace;
}

// ---- CNN parameter layout ---------------------------------------------------

struct CnnLayout {
  std::size_t conv1_w, conv1_b, conv2_w, conv2_b, fc1_w, fc1_b, fc2_w, fc2_b;
  std::size_t total;
  int maps1;       // 2*n1 maps after conv1
  int flat;        // n2 * pool2_len
  CnnShape shape;
};

CnnLayout cnn_layout(const CnnModel& m) {
  CnnLayout l{};
  l.shape = cnn_shape(m.w);
  l.maps1 = 2 * m.n1;
  l.flat = m.n2 * l.shape.pool2_len;
  std::size_t off = 0;
  l.conv1_w = off; off += static_cast<std::size_t>(m.n1) * 5;
  l.conv1_b = off; off += static_cast<std::size_t>(m.n1);
  l.conv2_w = off; off += static_cast<std::size_t>(m.n2) * l.maps1 * 5;
  l.conv2_b = off; off += static_cast<std::size_t>(m.n2);
  l.fc1_w = off; off += static_cast<std::size_t>(m.fc) * l.flat;
  l.fc1_b = off; off += static_cast<std::size_t>(m.fc);
  l.fc2_w = off; off += static_cast<std::size_t>(m.k) * m.fc;
  l.fc2_b = off; off += static_cast<std::size_t>(m.k);
  l.total = off;
  return l;
}

struct CnnTrace {
  // [map][position] activations; pools carry the argmax index
  std::vector<std::vector<double>> a1, p1, h2, p2;
  std::vector<std::vector<int>> arg1, arg2;
  std::vector<double> flat, z3, h3, z4, probs;
};

CnnTrace cnn_forward_trace(const CnnModel& m, const CnnLayout& l, const WindowSample& x) {
  if (x.w != m.w) throw Degenerate("window length mismatch");
  CnnTrace t;
  const double* P = m.params.data();
  // conv1: kernel f on channel c -> map f*2+c, linear activation
  t.a1.assign(static_cast<std::size_t>(l.maps1), {});
  for (int f = 0; f < m.n1; ++f) {
    const double* k = P + l.conv1_w + static_cast<std::size_t>(f) * 5;
    const double b = P[l.conv1_b + static_cast<std::size_t>(f)];
    for (int c = 0; c < 2; ++c) {
      auto& map = t.a1[static_cast<std::size_t>(f * 2 + c)];
      map.resize(static_cast<std::size_t>(l.shape.conv1_len));
      for (int i = 0; i < l.shape.conv1_len; ++i) {
        double acc = b;
        for (int j = 0; j < 5; ++j) acc += k[j] * x.at(i + j, c);
        map[static_cast<std::size_t>(i)] = acc;
      }
    }
  }
  // pool1
  t.p1.assign(t.a1.size(), {});
  t.arg1.assign(t.a1.size(), {});
  for (std::size_t mi = 0; mi < t.a1.size(); ++mi) {
    t.p1[mi].resize(static_cast<std::size_t>(l.shape.pool1_len));
    t.arg1[mi].resize(static_cast<std::size_t>(l.shape.pool1_len));
    for (int u = 0; u < l.shape.pool1_len; ++u) {
      int best = 3 * u;
      for (int i = 3 * u + 1; i < 3 * u + 3; ++i)
        if (t.a1[mi][static_cast<std::size_t>(i)] > t.a1[mi][static_cast<std::size_t>(best)])
          best = i;
      t.p1[mi][static_cast<std::size_t>(u)] = t.a1[mi][static_cast<std::size_t>(best)];
      t.arg1[mi][static_cast<std::size_t>(u)] = best;
    }
  }
  // conv2 (full multi-channel) + tanh
  t.h2.assign(static_cast<std::size_t>(m.n2), {});
  for (int g = 0; g < m.n2; ++g) {
    auto& map = t.h2[static_cast<std::size_t>(g)];
    map.resize(static_cast<std::size_t>(l.shape.conv2_len));
    const double b = P[l.conv2_b + static_cast<std::size_t>(g)];
    for (int i = 0; i < l.shape.conv2_len; ++i) {
      double acc = b;
      for (int mi = 0; mi < l.maps1; ++mi) {
        const double* k = P + l.conv2_w + (static_cast<std::size_t>(g) * l.maps1 + mi) * 5;
        const auto& src = t.p1[static_cast<std::size_t>(mi)];
        for (int j = 0; j < 5; ++j) acc += k[j] * src[static_cast<std::size_t>(i + j)];
      }
      map[static_cast<std::size_t>(i)] = std::tanh(acc);
    }
  }
  // pool2
  t.p2.assign(t.h2.size(), {});
  t.arg2.assign(t.h2.size(), {});
  for (std::size_t g = 0; g < t.h2.size(); ++g) {
    t.p2[g].resize(static_cast<std::size_t>(l.shape.pool2_len));
    t.arg2[g].resize(static_cast<std::size_t>(l.shape.pool2_len));
    for (int u = 0; u < l.shape.pool2_len; ++u) {
      int best = 3 * u;
      for (int i = 3 * u + 1; i < 3 * u + 3; ++i)
        if (t.h2[g][static_cast<std::size_t>(i)] > t.h2[g][static_cast<std::size_t>(best)])
          best = i;
      t.p2[g][static_cast<std::size_t>(u)] = t.h2[g][static_cast<std::size_t>(best)];
      t.arg2[g][static_cast<std::size_t>(u)] = best;
    }
  }
  // flatten map-major
  t.flat.resize(static_cast<std::size_t>(l.flat));
  for (int g = 0; g < m.n2; ++g)
    for (int u = 0; u < l.shape.pool2_len; ++u)
      t.flat[static_cast<std::size_t>(g * l.shape.pool2_len + u)] =
          t.p2[static_cast<std::size_t>(g)][static_cast<std::size_t>(u)];
  // fc1 (leaky ReLU)
  t.z3.resize(static_cast<std::size_t>(m.fc));
  t.h3.resize(static_cast<std::size_t>(m.fc));
  for (int r = 0; r < m.fc; ++r) {
    double acc = P[l.fc1_b + static_cast<std::size_t>(r)];
    const double* row = P + l.fc1_w + static_cast<std::size_t>(r) * l.flat;
    for (int c = 0; c < l.flat; ++c) acc += row[c] * t.flat[static_cast<std::size_t>(c)];
    t.z3[static_cast<std::size_t>(r)] = acc;
    t.h3[static_cast<std::size_t>(r)] = leaky(acc, m.alpha);
  }
  // fc2 + softmax
  t.z4.resize(static_cast<std::size_t>(m.k));
  for (int r = 0; r < m.k; ++r) {
    double acc = P[l.fc2_b + static_cast<std::size_t>(r)];
    const double* row = P + l.fc2_w + static_cast<std::size_t>(r) * m.fc;
    for (int c = 0; c < m.fc; ++c) acc += row[c] * t.h3[static_cast<std::size_t>(c)];
    t.z4[static_cast<std::size_t>(r)] = acc;
  }
  t.probs = softmax(t.z4);
  return t;
}

void cnn_backward_sample(const CnnModel& m, const CnnLayout& l, const WindowSample& x,
                         const CnnTrace& t, int target, std::vector<double>& grad) {
  const double* P = m.params.data();
  std::vector<double> dz4 = t.probs;
  dz4[static_cast<std::size_t>(target)] -= 1.0;
  // fc2
  std::vector<double> dh3(static_cast<std::size_t>(m.fc), 0.0);
  for (int r = 0; r < m.k; ++r) {
    grad[l.fc2_b + static_cast<std::size_t>(r)] += dz4[static_cast<std::size_t>(r)];
    const double* row = P + l.fc2_w + static_cast<std::size_t>(r) * m.fc;
    double* grow = grad.data() + l.fc2_w + static_cast<std::size_t>(r) * m.fc;
    for (int c = 0; c < m.fc; ++c) {
      grow[c] += dz4[static_cast<std::size_t>(r)] * t.h3[static_cast<std::size_t>(c)];
      dh3[static_cast<std::size_t>(c)] += row[c] * dz4[static_cast<std::size_t>(r)];
    }
  }
  // fc1
  std::vector<double> dflat(static_cast<std::size_t>(l.flat), 0.0);
  for (int r = 0; r < m.fc; ++r) {
    const double dz = dh3[static_cast<std::size_t>(r)] *
                      leaky_grad(t.z3[static_cast<std::size_t>(r)], m.alpha);
    grad[l.fc1_b + static_cast<std::size_t>(r)] += dz;
    const double* row = P + l.fc1_w + static_cast<std::size_t>(r) * l.flat;
    double* grow = grad.data() + l.fc1_w + static_cast<std::size_t>(r) * l.flat;
    for (int c = 0; c < l.flat; ++c) {
      grow[c] += dz * t.flat[static_cast<std::size_t>(c)];
      dflat[static_cast<std::size_t>(c)] += row[c] * dz;
    }
  }
  // pool2 -> conv2 activations
  std::vector<std::vector<double>> dh2(static_cast<std::size_t>(m.n2));
  for (int g = 0; g < m.n2; ++g)
    dh2[static_cast<std::size_t>(g)].assign(static_cast<std::size_t>(l.shape.conv2_len), 0.0);
  for (int g = 0; g < m.n2; ++g)
    for (int u = 0; u < l.shape.pool2_len; ++u)
      dh2[static_cast<std::size_t>(g)]
         [static_cast<std::size_t>(t.arg2[static_cast<std::size_t>(g)][static_cast<std::size_t>(u)])] +=
          dflat[static_cast<std::size_t>(g * l.shape.pool2_len + u)];
  // conv2 (through tanh)
  std::vector<std::vector<double>> dp1(static_cast<std::size_t>(l.maps1));
  for (int mi = 0; mi < l.maps1; ++mi)
    dp1[static_cast<std::size_t>(mi)].assign(static_cast<std::size_t>(l.shape.pool1_len), 0.0);
  for (int g = 0; g < m.n2; ++g) {
    for (int i = 0; i < l.shape.conv2_len; ++i) {
      const double h = t.h2[static_cast<std::size_t>(g)][static_cast<std::size_t>(i)];
      const double dz = dh2[static_cast<std::size_t>(g)][static_cast<std::size_t>(i)] * (1.0 - h * h);
      if (dz == 0) continue;
      grad[l.conv2_b + static_cast<std::size_t>(g)] += dz;
      for (int mi = 0; mi < l.maps1; ++mi) {
        const std::size_t koff = l.conv2_w + (static_cast<std::size_t>(g) * l.maps1 + mi) * 5;
        const auto& src = t.p1[static_cast<std::size_t>(mi)];
        auto& dsrc = dp1[static_cast<std::size_t>(mi)];
        for (int j = 0; j < 5; ++j) {
          grad[koff + static_cast<std::size_t>(j)] += dz * src[static_cast<std::size_t>(i + j)];
          dsrc[static_cast<std::size_t>(i + j)] += dz * P[koff + static_cast<std::size_t>(j)];
        }
      }
    }
  }
  // pool1 -> conv1 activations (linear)
  for (int f = 0; f < m.n1; ++f) {
    for (int c = 0; c < 2; ++c) {
      const std::size_t mi = static_cast<std::size_t>(f * 2 + c);
      for (int u = 0; u < l.shape.pool1_len; ++u) {
        const double da = dp1[mi][static_cast<std::size_t>(u)];
        if (da == 0) continue;
        const int i = t.arg1[mi][static_cast<std::size_t>(u)];
        grad[l.conv1_b + static_cast<std::size_t>(f)] += da;
        const std::size_t koff = l.conv1_w + static_cast<std::size_t>(f) * 5;
        for (int j = 0; j < 5; ++j)
          grad[koff + static_cast<std::size_t>(j)] += da * x.at(i + j, c);
      }
    }
  }
}

std::vector<double> flattened(const WindowSample& w) { return w.values; }

double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

// log(1 + e^s), stable for large |s|
double softplus(double s) {
  return s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
}

// ---- generic training over MLP/CNN adapters -------------------------------

template <typename Model, typename LossFn, typename GradFn, typename PredictFn>
TrainResult train_impl(Model& model, const Dataset& data, const TrainConfig& cfg,
                       LossFn batch_loss, GradFn batch_gradient, PredictFn predict) {
  if (cfg.epochs < 0 || cfg.batch_size < 1) throw Degenerate("bad train config");
  TrainResult result;
  result.split = balanced_split(data.labels, cfg.split, cfg.seed);

  auto accuracy = [&](const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0;
    std::size_t hit = 0;
    for (auto i : idx)
      if (predict(data.windows[i]) == data.labels[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(idx.size());
  };
  auto mean_loss = [&](const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0;
    return batch_loss(std::span<const std::size_t>(idx)) / static_cast<double>(idx.size());
  };

  result.train_acc.push_back(accuracy(result.split.train));
  result.val_acc.push_back(accuracy(result.split.val));
  result.train_loss.push_back(mean_loss(result.split.train));

  std::vector<double> cache(model.params.size(), 0.0);
  std::vector<std::size_t> order = result.split.train;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch_size));
      std::span<const std::size_t> batch(order.data() + pos, end - pos);
      const std::vector<double> grad = batch_gradient(batch);
      rmsprop_step(model.params, grad, cache, cfg.opt);
    }
    result.train_acc.push_back(accuracy(result.split.train));
    result.val_acc.push_back(accuracy(result.split.val));
    result.train_loss.push_back(mean_loss(result.split.train));
  }
  return result;
}

std::string arch_descriptor(const SavedModel& m);

}  // namespace

// ---------------------------------------------------------------------------

const char* to_string(Task t) { return t == Task::Service ? "service" : "app"; }

Task task_from_string(const std::string& s) {
  if (s == "service") return Task::Service;
  if (s == "app") return Task::App;
  throw Degenerate("unknown task " + s);
}

Dataset Dataset::subset(const std::vector<std::size_t>& idx) const {
  Dataset out;
  out.w = w;
  out.num_classes = num_classes;
  for (auto i : idx) {
    out.windows.push_back(windows[i]);
    out.labels.push_back(labels[i]);
  }
  return out;
}

Dataset make_dataset(std::vector<WindowSample> windows, Task task) {
  Dataset data;
  data.num_classes = task == Task::Service ? synth::kServiceCount : synth::kAppCount;
  data.windows = std::move(windows);
  data.labels.reserve(data.windows.size());
  for (const auto& w : data.windows) {
    if (!w.label) throw Degenerate("unlabeled window in labeled dataset");
    int id;
    if (task == Task::App) {
      auto app = synth::app_from_tag(*w.label);
      if (!app) throw Degenerate("label '" + *w.label + "' is not an app tag");
      id = static_cast<int>(*app);
    } else {
      auto svc = synth::service_of_label(*w.label);
      if (!svc) throw Degenerate("label '" + *w.label + "' has no service class");
      id = static_cast<int>(*svc);
    }
    data.labels.push_back(id);
    if (data.w == 0) data.w = w.w;
    if (w.w != data.w) throw Degenerate("mixed window lengths in dataset");
  }
  return data;
}

SplitIndices balanced_split(const std::vector<int>& labels, double split, std::uint64_t seed) {
  if (!(split > 0.0) || !(split < 1.0)) throw Degenerate("split must lie in (0, 1)");
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  std::vector<std::vector<std::size_t>> per_class(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i)
    per_class[static_cast<std::size_t>(labels[i])].push_back(i);

  int present = 0;
  for (const auto& c : per_class)
    if (!c.empty()) ++present;
  if (present < 2) throw Degenerate("need at least two classes to train");

  SplitIndices out;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    auto idx = per_class[c];
    if (idx.empty()) continue;
    if (idx.size() < 2)
      throw Degenerate("class " + std::to_string(c) + " has fewer than 2 samples");
    std::mt19937_64 rng(mix_seed(seed, 0xC1A55ULL + c));
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_train = static_cast<std::size_t>(std::floor(split * static_cast<double>(idx.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.val.insert(out.val.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  return out;
}

std::vector<double> softmax(const std::vector<double>& z) {
  std::vector<double> out(z.size());
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - m);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

double cross_entropy(const std::vector<double>& probs, int target_class) {
  if (target_class < 0 || static_cast<std::size_t>(target_class) >= probs.size())
    throw BadSimplex("target class out of range");
  double sum = 0;
  for (double p : probs) {
    if (p < 0 || p > 1 + 1e-9) throw BadSimplex("probability outside [0, 1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw BadSimplex("probabilities sum to " + std::to_string(sum));
  const double p = std::clamp(probs[static_cast<std::size_t>(target_class)], 1e-12, 1.0);
  return -std::log(p);
}

std::vector<double> conv1d(const std::vector<double>& signal,
                           const std::array<double, 5>& kernel, double bias) {
  if (signal.size() < 5) throw WindowTooShort("conv1d needs at least 5 samples");
  std::vector<double> out(signal.size() - 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = bias;
    for (std::size_t j = 0; j < 5; ++j) acc += kernel[j] * signal[i + j];
    out[i] = acc;
  }
  return out;
}

std::vector<double> maxpool1d(const std::vector<double>& signal, int width) {
  if (width < 1) throw Degenerate("pool width must be >= 1");
  std::vector<double> out;
  for (std::size_t start = 0; start + static_cast<std::size_t>(width) <= signal.size();
       start += static_cast<std::size_t>(width)) {
    double m = signal[start];
    for (std::size_t i = start + 1; i < start + static_cast<std::size_t>(width); ++i)
      m = std::max(m, signal[i]);
    out.push_back(m);
  }
  return out;
}

void rmsprop_step(std::vector<double>& params, const std::vector<double>& grad,
                  std::vector<double>& cache, const RmsProp& opt) {
  if (params.size() != grad.size() || params.size() != cache.size())
    throw Degenerate("rmsprop size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    cache[i] = opt.rho * cache[i] + (1.0 - opt.rho) * grad[i] * grad[i];
    params[i] -= opt.lr * grad[i] / (std::sqrt(cache[i]) + opt.eps);
  }
}

// ---------------------------------------------------------------------------

MlpModel make_mlp(int input_len, int k, std::uint64_t seed) {
  return make_mlp_custom({input_len, 128, 64, k}, 0.1, seed);
}

MlpModel make_mlp_custom(const std::vector<int>& sizes, double alpha, std::uint64_t seed) {
  if (sizes.size() < 2) throw Degenerate("mlp needs at least input and output sizes");
  for (int s : sizes)
    if (s < 1) throw Degenerate("mlp layer sizes must be positive");
  MlpModel model;
  model.sizes = sizes;
  model.alpha = alpha;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    append(model.params,
           glorot_fill(static_cast<std::size_t>(sizes[i]) * sizes[i + 1], sizes[i], sizes[i + 1], rng));
    model.params.insert(model.params.end(), static_cast<std::size_t>(sizes[i + 1]), 0.0);
  }
  return model;
}

std::vector<double> forward_mlp(const MlpModel& model, const std::vector<double>& x) {
  return mlp_forward_trace(model, x).probs;
}

double mlp_batch_loss(const MlpModel& model, const Dataset& data,
                      std::span<const std::size_t> idx) {
  double loss = 0;
  for (auto i : idx)
    loss += cross_entropy(forward_mlp(model, flattened(data.windows[i])), data.labels[i]);
  return loss;
}

std::vector<double> mlp_batch_gradient(const MlpModel& model, const Dataset& data,
                                       std::span<const std::size_t> idx, double* loss_out) {
  const MlpLayout layout = mlp_layout(model.sizes);
  std::vector<double> grad(model.params.size(), 0.0);
  double loss = 0;
  for (auto sample : idx) {
    const auto x = flattened(data.windows[sample]);
    const MlpTrace t = mlp_forward_trace(model, x);
    const int target = data.labels[sample];
    loss += cross_entropy(t.probs, target);
    // softmax + cross-entropy fuse to probs - onehot
    std::vector<double> dz = t.probs;
    dz[static_cast<std::size_t>(target)] -= 1.0;
    for (std::size_t l = layout.layers.size(); l-- > 0;) {
      const auto& layer = layout.layers[l];
      const auto& in = t.post[l];
      double* gw = grad.data() + layer.w_off;
      double* gb = grad.data() + layer.b_off;
      const double* w = model.params.data() + layer.w_off;
      std::vector<double> din(static_cast<std::size_t>(layer.in), 0.0);
      for (int r = 0; r < layer.out; ++r) {
        const double d = dz[static_cast<std::size_t>(r)];
        gb[r] += d;
        double* grow = gw + static_cast<std::size_t>(r) * layer.in;
        const double* wrow = w + static_cast<std::size_t>(r) * layer.in;
        for (int c = 0; c < layer.in; ++c) {
          grow[c] += d * in[static_cast<std::size_t>(c)];
          din[static_cast<std::size_t>(c)] += wrow[c] * d;
        }
      }
      if (l > 0) {
        for (int c = 0; c < layer.in; ++c)
          din[static_cast<std::size_t>(c)] *=
              leaky_grad(t.pre[l - 1][static_cast<std::size_t>(c)], model.alpha);
        dz = std::move(din);
      }
    }
  }
  if (loss_out != nullptr) *loss_out = loss;
  return grad;
}

// ---------------------------------------------------------------------------

CnnShape cnn_shape(int w) {
  CnnShape s;
  s.w = w;
  s.conv1_len = w - 4;
  s.pool1_len = s.conv1_len / 3;
  s.conv2_len = s.pool1_len - 4;
  s.pool2_len = s.conv2_len / 3;
  if (s.conv1_len < 1 || s.pool1_len < 1 || s.conv2_len < 1 || s.pool2_len < 1)
    throw WindowTooShort("window of " + std::to_string(w) +
                         " s cannot pass two conv(5)/pool(3) stages");
  return s;
}

CnnModel make_cnn(int w, int k, std::uint64_t seed) {
  return make_cnn_custom(w, k, 32, 64, 32, 0.1, seed);
}

CnnModel make_cnn_custom(int w, int k, int n1, int n2, int fc, double alpha,
                         std::uint64_t seed) {
  if (k < 2 || n1 < 1 || n2 < 1 || fc < 1) throw Degenerate("bad cnn dimensions");
  CnnModel model;
  model.w = w;
  model.k = k;
  model.n1 = n1;
  model.n2 = n2;
  model.fc = fc;
  model.alpha = alpha;
  const CnnLayout layout = cnn_layout(model);
  std::mt19937_64 rng(seed);
  append(model.params, glorot_fill(static_cast<std::size_t>(n1) * 5, 5, 5 * n1, rng));
  model.params.insert(model.params.end(), static_cast<std::size_t>(n1), 0.0);
  append(model.params,
         glorot_fill(static_cast<std::size_t>(n2) * layout.maps1 * 5, 5 * layout.maps1, 5 * n2, rng));
  model.params.insert(model.params.end(), static_cast<std::size_t>(n2), 0.0);
  append(model.params,
         glorot_fill(static_cast<std::size_t>(fc) * layout.flat, layout.flat, fc, rng));
  model.params.insert(model.params.end(), static_cast<std::size_t>(fc), 0.0);
  append(model.params, glorot_fill(static_cast<std::size_t>(k) * fc, fc, k, rng));
  model.params.insert(model.params.end(), static_cast<std::size_t>(k), 0.0);
  if (model.params.size() != layout.total) throw Error("cnn layout mismatch");
  return model;
}

std::vector<double> forward_cnn(const CnnModel& model, const WindowSample& x) {
  const CnnLayout layout = cnn_layout(model);
  return cnn_forward_trace(model, layout, x).probs;
}

double cnn_batch_loss(const CnnModel& model, const Dataset& data,
                      std::span<const std::size_t> idx) {
  const CnnLayout layout = cnn_layout(model);
  double loss = 0;
  for (auto i : idx)
    loss += cross_entropy(cnn_forward_trace(model, layout, data.windows[i]).probs,
                          data.labels[i]);
  return loss;
}

std::vector<double> cnn_batch_gradient(const CnnModel& model, const Dataset& data,
                                       std::span<const std::size_t> idx, double* loss_out) {
  const CnnLayout layout = cnn_layout(model);
  std::vector<double> grad(model.params.size(), 0.0);
  double loss = 0;
  for (auto i : idx) {
    const CnnTrace t = cnn_forward_trace(model, layout, data.windows[i]);
    loss += cross_entropy(t.probs, data.labels[i]);
    cnn_backward_sample(model, layout, data.windows[i], t, data.labels[i], grad);
  }
  if (loss_out != nullptr) *loss_out = loss;
  return grad;
}

// ---------------------------------------------------------------------------

TrainResult train(MlpModel& model, const Dataset& data, const TrainConfig& cfg) {
  if (data.w * 2 != model.input_len()) throw Degenerate("dataset does not fit mlp input");
  return train_impl(
      model, data, cfg,
      [&](std::span<const std::size_t> idx) { return mlp_batch_loss(model, data, idx); },
      [&](std::span<const std::size_t> idx) { return mlp_batch_gradient(model, data, idx); },
      [&](const WindowSample& w) { return argmax(forward_mlp(model, flattened(w))); });
}

TrainResult train(CnnModel& model, const Dataset& data, const TrainConfig& cfg) {
  if (data.w != model.w) throw Degenerate("dataset does not fit cnn input");
  return train_impl(
      model, data, cfg,
      [&](std::span<const std::size_t> idx) { return cnn_batch_loss(model, data, idx); },
      [&](std::span<const std::size_t> idx) { return cnn_batch_gradient(model, data, idx); },
      [&](const WindowSample& w) { return argmax(forward_cnn(model, w)); });
}

// ---------------------------------------------------------------------------

KnnModel make_knn(const Dataset& data, const std::vector<std::size_t>& train_idx,
                  int k_neighbors) {
  if (k_neighbors < 1) throw Degenerate("k must be >= 1");
  if (train_idx.empty()) throw Degenerate("empty knn training set");
  KnnModel model;
  model.k_neighbors = k_neighbors;
  model.num_classes = data.num_classes;
  model.dim = data.w * 2;
  for (auto i : train_idx) {
    model.points.push_back(flattened(data.windows[i]));
    model.labels.push_back(data.labels[i]);
  }
  return model;
}

namespace {

struct Neighbor {
  double dist2;
  int label;
};

std::vector<Neighbor> nearest(const KnnModel& model, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != model.dim) throw Degenerate("knn query dimension mismatch");
  std::vector<Neighbor> all(model.points.size());
  for (std::size_t i = 0; i < model.points.size(); ++i) {
    double d2 = 0;
    const auto& p = model.points[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double d = p[j] - x[j];
      d2 += d * d;
    }
    all[i] = {d2, model.labels[i]};
  }
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(model.k_neighbors), all.size());
  // canonical order so the vote never depends on training-set ordering
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
    return a.label < b.label;
  });
  all.resize(k);
  return all;
}

}  // namespace

int knn_classify(const KnnModel& model, const std::vector<double>& x) {
  const auto nn = nearest(model, x);
  std::vector<int> votes(static_cast<std::size_t>(model.num_classes), 0);
  std::vector<double> dist_sum(static_cast<std::size_t>(model.num_classes), 0.0);
  for (const auto& n : nn) {
    votes[static_cast<std::size_t>(n.label)] += 1;
    dist_sum[static_cast<std::size_t>(n.label)] += std::sqrt(n.dist2);
  }
  int best = 0;
  for (int c = 1; c < model.num_classes; ++c) {
    if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)] ||
        (votes[static_cast<std::size_t>(c)] == votes[static_cast<std::size_t>(best)] &&
         votes[static_cast<std::size_t>(c)] > 0 &&
         dist_sum[static_cast<std::size_t>(c)] < dist_sum[static_cast<std::size_t>(best)]))
      best = c;
  }
  return best;
}

std::vector<double> knn_proba(const KnnModel& model, const std::vector<double>& x) {
  const auto nn = nearest(model, x);
  std::vector<double> shares(static_cast<std::size_t>(model.num_classes), 0.0);
  for (const auto& n : nn) shares[static_cast<std::size_t>(n.label)] += 1.0;
  for (auto& s : shares) s /= static_cast<double>(nn.size());
  return shares;
}

// ---------------------------------------------------------------------------

double logreg_loss(std::span<const double> params, const std::vector<std::vector<double>>& xs,
                   const std::vector<int>& targets, double lambda) {
  const std::size_t dim = params.size() - 1;
  double loss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double s = params[dim];
    for (std::size_t j = 0; j < dim; ++j) s += params[j] * xs[i][j];
    loss += softplus(s) - static_cast<double>(targets[i]) * s;
  }
  for (std::size_t j = 0; j < dim; ++j) loss += 0.5 * lambda * params[j] * params[j];
  return loss;
}

std::vector<double> logreg_gradient(std::span<const double> params,
                                    const std::vector<std::vector<double>>& xs,
                                    const std::vector<int>& targets, double lambda) {
  const std::size_t dim = params.size() - 1;
  std::vector<double> grad(params.size(), 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double s = params[dim];
    for (std::size_t j = 0; j < dim; ++j) s += params[j] * xs[i][j];
    const double r = sigmoid(s) - static_cast<double>(targets[i]);
    for (std::size_t j = 0; j < dim; ++j) grad[j] += r * xs[i][j];
    grad[dim] += r;
  }
  for (std::size_t j = 0; j < dim; ++j) grad[j] += lambda * params[j];
  return grad;
}

LogRegModel train_logreg(const Dataset& data, const std::vector<std::size_t>& train_idx,
                         const LogRegConfig& cfg) {
  if (train_idx.empty()) throw Degenerate("empty logreg training set");
  LogRegModel model;
  model.num_classes = data.num_classes;
  model.dim = data.w * 2;
  model.lambda = cfg.lambda;
  model.params.assign(static_cast<std::size_t>(model.num_classes) * (model.dim + 1), 0.0);

  std::vector<std::vector<double>> xs;
  xs.reserve(train_idx.size());
  for (auto i : train_idx) xs.push_back(flattened(data.windows[i]));

  const double step = cfg.lr / static_cast<double>(xs.size());
  for (int c = 0; c < model.num_classes; ++c) {
    std::vector<int> targets;
    targets.reserve(train_idx.size());
    for (auto i : train_idx) targets.push_back(data.labels[i] == c ? 1 : 0);
    std::span<double> w(model.params.data() + static_cast<std::size_t>(c) * (model.dim + 1),
                        static_cast<std::size_t>(model.dim) + 1);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      const auto grad = logreg_gradient(w, xs, targets, cfg.lambda);
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= step * grad[j];
    }
  }
  return model;
}

std::vector<double> logreg_scores(const LogRegModel& model, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != model.dim) throw Degenerate("logreg dimension mismatch");
  std::vector<double> scores(static_cast<std::size_t>(model.num_classes));
  for (int c = 0; c < model.num_classes; ++c) {
    const double* w = model.params.data() + static_cast<std::size_t>(c) * (model.dim + 1);
    double s = w[model.dim];
    for (int j = 0; j < model.dim; ++j) s += w[j] * x[static_cast<std::size_t>(j)];
    scores[static_cast<std::size_t>(c)] = sigmoid(s);
  }
  return scores;
}

int logreg_classify(const LogRegModel& model, const std::vector<double>& x) {
  return argmax(logreg_scores(model, x));
}

// ---------------------------------------------------------------------------

EvalReport report_from_predictions(const std::vector<int>& truth,
                                   const std::vector<int>& pred, int k) {
  if (truth.size() != pred.size()) throw Degenerate("prediction count mismatch");
  EvalReport report;
  report.num_classes = k;
  report.counts.assign(static_cast<std::size_t>(k),
                       std::vector<std::int64_t>(static_cast<std::size_t>(k), 0));
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    report.counts[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])] += 1;
    if (truth[i] == pred[i]) ++correct;
  }
  report.accuracy = truth.empty() ? 0.0
                                  : static_cast<double>(correct) / static_cast<double>(truth.size());
  report.confusion.assign(static_cast<std::size_t>(k),
                          std::vector<double>(static_cast<std::size_t>(k), 0.0));
  int present = 0;
  double sum_p = 0, sum_r = 0, sum_f = 0;
  for (int c = 0; c < k; ++c) {
    std::int64_t row_total = 0, col_total = 0;
    for (int j = 0; j < k; ++j) {
      row_total += report.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
      col_total += report.counts[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
    }
    if (row_total > 0)
      for (int j = 0; j < k; ++j)
        report.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] =
            static_cast<double>(report.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)]) /
            static_cast<double>(row_total);
    if (row_total == 0) continue;  // absent classes are excluded from macro averages
    const auto tp = report.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    const double p = col_total > 0 ? static_cast<double>(tp) / static_cast<double>(col_total) : 0.0;
    const double r = static_cast<double>(tp) / static_cast<double>(row_total);
    const double f = p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
    sum_p += p;
    sum_r += r;
    sum_f += f;
    ++present;
  }
  if (present > 0) {
    report.precision = sum_p / present;
    report.recall = sum_r / present;
    report.f_score = sum_f / present;
  }
  return report;
}

// ---------------------------------------------------------------------------

std::vector<double> SavedModel::proba(const WindowSample& x) const {
  return std::visit(
      [&](const auto& m) -> std::vector<double> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MlpModel>) return forward_mlp(m, x.values);
        if constexpr (std::is_same_v<T, CnnModel>) return forward_cnn(m, x);
        if constexpr (std::is_same_v<T, KnnModel>) return knn_proba(m, x.values);
        if constexpr (std::is_same_v<T, LogRegModel>) {
          auto scores = logreg_scores(m, x.values);
          double sum = 0;
          for (double s : scores) sum += s;
          if (sum > 0)
            for (auto& s : scores) s /= sum;
          return scores;
        }
      },
      model);
}

int SavedModel::classify(const WindowSample& x) const {
  if (const auto* knn = std::get_if<KnnModel>(&model)) return knn_classify(*knn, x.values);
  return argmax(proba(x));
}

int SavedModel::parameter_count() const {
  return std::visit(
      [](const auto& m) -> int {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MlpModel> || std::is_same_v<T, CnnModel>)
          return m.parameter_count();
        else if constexpr (std::is_same_v<T, LogRegModel>)
          return static_cast<int>(m.params.size());
        else
          return static_cast<int>(m.points.size()) * (m.dim + 1);
      },
      model);
}

std::vector<std::vector<double>> proba_batch(const SavedModel& model,
                                             const std::vector<WindowSample>& windows,
                                             Exec exec) {
  std::vector<std::vector<double>> out(windows.size());
  for_each_index(windows.size(), exec, [&](std::size_t i) { out[i] = model.proba(windows[i]); });
  return out;
}

EvalReport evaluate(const SavedModel& model, const Dataset& data, Exec exec) {
  std::vector<int> pred(data.size());
  for_each_index(data.size(), exec,
                 [&](std::size_t i) { pred[i] = model.classify(data.windows[i]); });
  return report_from_predictions(data.labels, pred, data.num_classes);
}

// ---------------------------------------------------------------------------

namespace {

std::string arch_descriptor(const SavedModel& m) {
  std::ostringstream os;
  os << m.meta.type << "/k=" << m.meta.k << "/w=" << m.meta.windowing.w_s;
  std::visit(
      [&](const auto& model) {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, MlpModel>) {
          os << "/sizes=";
          for (int s : model.sizes) os << s << ':';
          os << "/alpha=" << model.alpha;
        } else if constexpr (std::is_same_v<T, CnnModel>) {
          os << "/n1=" << model.n1 << "/n2=" << model.n2 << "/fc=" << model.fc
             << "/alpha=" << model.alpha;
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          os << "/kn=" << model.k_neighbors << "/dim=" << model.dim
             << "/count=" << model.points.size();
        } else if constexpr (std::is_same_v<T, LogRegModel>) {
          os << "/dim=" << model.dim << "/lambda=" << model.lambda;
        }
      },
      m.model);
  return os.str();
}

std::vector<double> model_blob(const SavedModel& m) {
  return std::visit(
      [](const auto& model) -> std::vector<double> {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, KnnModel>) {
          std::vector<double> blob;
          for (const auto& p : model.points) blob.insert(blob.end(), p.begin(), p.end());
          for (int l : model.labels) blob.push_back(static_cast<double>(l));
          return blob;
        } else {
          return model.params;
        }
      },
      m.model);
}

const char* mode_string(WindowMode m) {
  return m == WindowMode::Synchronous ? "sync" : "async";
}

WindowMode mode_from_string(const std::string& s) {
  if (s == "sync") return WindowMode::Synchronous;
  if (s == "async") return WindowMode::Asynchronous;
  throw Error("unknown window mode " + s);
}

}  // namespace

void save_model(const SavedModel& model, const std::string& path) {
  nlohmann::ordered_json header;
  header["format"] = "dci-model";
  header["version"] = 1;
  header["type"] = model.meta.type;
  header["task"] = to_string(model.meta.task);
  header["k"] = model.meta.k;
  header["w"] = model.meta.windowing.w_s;
  header["mode"] = mode_string(model.meta.windowing.mode);
  header["stride"] = model.meta.windowing.stride_s;
  header["split"] = model.meta.split;
  header["seed"] = model.meta.seed;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MlpModel>) {
          header["arch"] = {{"sizes", m.sizes}, {"alpha", m.alpha}};
        } else if constexpr (std::is_same_v<T, CnnModel>) {
          header["arch"] = {{"n1", m.n1}, {"n2", m.n2}, {"fc", m.fc}, {"alpha", m.alpha}};
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          header["arch"] = {{"k_neighbors", m.k_neighbors},
                            {"dim", m.dim},
                            {"count", m.points.size()}};
        } else if constexpr (std::is_same_v<T, LogRegModel>) {
          header["arch"] = {{"dim", m.dim}, {"lambda", m.lambda}};
        }
      },
      model.model);
  const auto blob = model_blob(model);
  header["param_count"] = blob.size();
  char hash_hex[24];
  std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                static_cast<unsigned long long>(fnv1a64(arch_descriptor(model))));
  header["arch_hash"] = hash_hex;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size() * sizeof(double)));
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto nl = content.find('\n');
  if (nl == std::string::npos)
    throw CompatibilityError("model file " + path + " has no header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(content.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw CompatibilityError(std::string("bad model header: ") + e.what());
  }
  if (header.value("format", "") != "dci-model" || header.value("version", 0) != 1)
    throw CompatibilityError("unsupported model file format");

  LoadedModel loaded;
  loaded.file_hash = fnv1a64(content);
  auto& meta = loaded.model.meta;
  std::size_t blob_count = 0;
  try {
    meta.type = header.at("type").get<std::string>();
    meta.task = task_from_string(header.at("task").get<std::string>());
    meta.k = header.at("k").get<int>();
    meta.windowing.w_s = header.at("w").get<int>();
    meta.windowing.mode = mode_from_string(header.at("mode").get<std::string>());
    meta.windowing.stride_s = header.at("stride").get<int>();
    meta.split = header.at("split").get<double>();
    meta.seed = header.at("seed").get<std::uint64_t>();
    blob_count = header.at("param_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CompatibilityError(std::string("bad model header: ") + e.what());
  }
  const std::size_t blob_bytes = blob_count * sizeof(double);
  if (content.size() - nl - 1 != blob_bytes)
    throw CompatibilityError("model blob size mismatch in " + path);
  std::vector<double> blob(blob_count);
  std::memcpy(blob.data(), content.data() + nl + 1, blob_bytes);

  try {
    const auto& arch = header.at("arch");
    if (meta.type == "mlp") {
      MlpModel m;
      m.sizes = arch.at("sizes").get<std::vector<int>>();
      m.alpha = arch.at("alpha").get<double>();
      m.params = std::move(blob);
      if (mlp_layout(m.sizes).total != m.params.size())
        throw CompatibilityError("mlp parameter count mismatch");
      loaded.model.model = std::move(m);
    } else if (meta.type == "cnn") {
      CnnModel m;
      m.w = meta.windowing.w_s;
      m.k = meta.k;
      m.n1 = arch.at("n1").get<int>();
      m.n2 = arch.at("n2").get<int>();
      m.fc = arch.at("fc").get<int>();
      m.alpha = arch.at("alpha").get<double>();
      m.params = std::move(blob);
      if (cnn_layout(m).total != m.params.size())
        throw CompatibilityError("cnn parameter count mismatch");
      loaded.model.model = std::move(m);
    } else if (meta.type == "knn") {
      KnnModel m;
      m.k_neighbors = arch.at("k_neighbors").get<int>();
      m.dim = arch.at("dim").get<int>();
      m.num_classes = meta.k;
      const std::size_t count = arch.at("count").get<std::size_t>();
      if (blob.size() != count * static_cast<std::size_t>(m.dim) + count)
        throw CompatibilityError("knn blob size mismatch");
      for (std::size_t i = 0; i < count; ++i)
        m.points.emplace_back(blob.begin() + static_cast<std::ptrdiff_t>(i * m.dim),
                              blob.begin() + static_cast<std::ptrdiff_t>((i + 1) * m.dim));
      for (std::size_t i = 0; i < count; ++i) {
        const double l = blob[count * static_cast<std::size_t>(m.dim) + i];
        m.labels.push_back(static_cast<int>(l));
      }
      loaded.model.model = std::move(m);
    } else if (meta.type == "logreg") {
      LogRegModel m;
      m.dim = arch.at("dim").get<int>();
      m.lambda = arch.at("lambda").get<double>();
      m.num_classes = meta.k;
      if (blob.size() != static_cast<std::size_t>(m.num_classes) * (m.dim + 1))
        throw CompatibilityError("logreg blob size mismatch");
      m.params = std::move(blob);
      loaded.model.model = std::move(m);
    } else {
      throw CompatibilityError("unknown model type " + meta.type);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CompatibilityError(std::string("bad model header: ") + e.what());
  }

  char hash_hex[24];
  std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                static_cast<unsigned long long>(fnv1a64(arch_descriptor(loaded.model))));
  if (header.value("arch_hash", "") != hash_hex)
    throw CompatibilityError("architecture hash mismatch in " + path);
  return loaded;
}

}  // namespace dci::learn
