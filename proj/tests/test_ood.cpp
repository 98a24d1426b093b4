#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "dci/ood.hpp"

using namespace dci;
using namespace dci::ood;

namespace {

Vec random_vec(std::mt19937_64& rng, std::size_t k, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Vec v(k);
  for (auto& x : v) x = dist(rng);
  return v;
}

std::vector<Vec> random_refs(std::mt19937_64& rng, std::size_t count, std::size_t k) {
  std::vector<Vec> refs(count);
  for (auto& r : refs) r = random_vec(rng, k);
  return refs;
}

Vec mean_of(const std::vector<Vec>& refs) {
  Vec m(refs[0].size(), 0.0);
  for (const auto& r : refs)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += r[i];
  for (auto& x : m) x /= static_cast<double>(refs.size());
  return m;
}

learn::Tensor2 identity(int k) {
  auto m = learn::Tensor2::zeros(k, k);
  for (int i = 0; i < k; ++i) m.at(i, i) = 1.0;
  return m;
}

// ProbaFn that reads the first K window values and normalizes them
ProbaFn raw_proba(int k) {
  return [k](const WindowSample& w) {
    Vec v(static_cast<std::size_t>(k));
    double sum = 0;
    for (int c = 0; c < k; ++c) {
      v[static_cast<std::size_t>(c)] = std::max(1e-6, w.values[static_cast<std::size_t>(c)]);
      sum += v[static_cast<std::size_t>(c)];
    }
    for (auto& x : v) x /= sum;
    return v;
  };
}

WindowSample window_of(const Vec& head) {
  WindowSample w;
  w.w = 4;
  w.values.assign(8, 0.0);
  for (std::size_t i = 0; i < head.size() && i < 8; ++i) w.values[i] = head[i];
  return w;
}

}  // namespace

TEST_CASE("spatial sign") {
  CHECK(spatial_sign({0.0, 0.0}) == Vec{0.0, 0.0});
  const Vec s = spatial_sign({3.0, 4.0});
  CHECK(s[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(0.8).epsilon(1e-15));
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec v = random_vec(rng, 5);
    const Vec sv = spatial_sign(v);
    double norm = 0;
    for (double x : sv) norm += x * x;
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("spatial depth basics") {
  CHECK_THROWS_AS(spatial_depth({1.0, 0.0}, {}), EmptyReferenceSet);
  SUBCASE("single identical reference") {
    const Vec y{0.4, 0.6};
    CHECK(spatial_depth(y, {y}) == 1.0);
  }
  SUBCASE("symmetric cancellation") {
    CHECK(spatial_depth({0.0, 0.0}, {{1.0, 0.0}, {-1.0, 0.0}}) == 1.0);
  }
  SUBCASE("both signs aligned") {
    CHECK(spatial_depth({10.0, 0.0}, {{0.0, 0.0}, {1.0, 0.0}}) == 0.0);
  }
}

TEST_CASE("depth laws under fuzz") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> count(2, 30), dim(2, 6), grid(-32, 32), shift(-100, 100);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto k = static_cast<std::size_t>(dim(rng));
    const auto n = static_cast<std::size_t>(count(rng));
    // dyadic grid coordinates keep the translation test exact
    std::vector<Vec> refs(n, Vec(k));
    for (auto& r : refs)
      for (auto& x : r) x = static_cast<double>(grid(rng)) / 4.0;
    const Vec y = [&] {
      Vec v(k);
      for (auto& x : v) x = static_cast<double>(grid(rng)) / 4.0;
      return v;
    }();
    const double d = spatial_depth(y, refs);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    // exact translation equivariance
    Vec c(k);
    for (auto& x : c) x = static_cast<double>(shift(rng));
    Vec y_shift(k);
    for (std::size_t i = 0; i < k; ++i) y_shift[i] = y[i] + c[i];
    std::vector<Vec> refs_shift = refs;
    for (auto& r : refs_shift)
      for (std::size_t i = 0; i < k; ++i) r[i] += c[i];
    CHECK(spatial_depth(y_shift, refs_shift) == d);
    // a far point is always shallower than the centroid
    const Vec centroid = mean_of(refs);
    Vec far = centroid;
    far[0] += 1e6;
    CHECK(spatial_depth(far, refs) < spatial_depth(centroid, refs));
  }
}

TEST_CASE("rotation invariance of spatial depth") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> angle(0.0, 6.28318);
  for (int trial = 0; trial < 200; ++trial) {
    const auto refs = random_refs(rng, 12, 2);
    const Vec y = random_vec(rng, 2);
    const double d = spatial_depth(y, refs);
    const double a = angle(rng);
    const auto rotate = [&](const Vec& v) {
      return Vec{std::cos(a) * v[0] - std::sin(a) * v[1],
                 std::sin(a) * v[0] + std::cos(a) * v[1]};
    };
    std::vector<Vec> rotated;
    for (const auto& r : refs) rotated.push_back(rotate(r));
    CHECK(spatial_depth(rotate(y), rotated) == doctest::Approx(d).epsilon(1e-9));
  }
}

TEST_CASE("gaussian kernel") {
  const Spd eye(identity(3));
  const Vec x{0.2, 0.3, 0.5};
  CHECK(gaussian_kernel(x, x, eye) == 1.0);
  // unit distance under the identity gives e^-1
  const Vec y{0.2 + 1.0, 0.3, 0.5};
  CHECK(gaussian_kernel(x, y, eye) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec a = random_vec(rng, 3), b = random_vec(rng, 3);
    CHECK(std::abs(gaussian_kernel(a, b, eye) - gaussian_kernel(b, a, eye)) < 1e-15);
    CHECK(gaussian_kernel(a, b, eye) > 0.0);
    CHECK(gaussian_kernel(a, b, eye) <= 1.0);
  }
  auto bad = learn::Tensor2::zeros(2, 2);
  bad.at(0, 0) = 1.0;
  bad.at(1, 1) = -1.0;
  CHECK_THROWS_AS(Spd{bad}, SingularCovariance);
  auto asym = identity(2);
  asym.at(0, 1) = 0.5;
  CHECK_THROWS_AS(Spd{asym}, SingularCovariance);
}

TEST_CASE("ksd with the linear kernel reproduces spatial depth") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> count(1, 30);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = trial % 2 == 0 ? 3 : 6;
    const auto refs = random_refs(rng, static_cast<std::size_t>(count(rng)), k);
    const Vec y = trial % 7 == 0 ? refs[0] : random_vec(rng, k);
    const double direct = spatial_depth(y, refs);
    const double kernelized = ksd(y, refs, LinearKernel{});
    CHECK(std::abs(direct - kernelized) < 1e-10);
  }
}

TEST_CASE("ksd with the gaussian kernel") {
  const Spd eye(identity(3));
  SUBCASE("single identical reference") {
    const Vec y{0.1, 0.2, 0.7};
    CHECK(ksd(y, {y}, GaussianKernel{&eye}) == 1.0);
  }
  SUBCASE("far points are shallower than the centroid") {
    std::mt19937_64 rng(6);
    const auto refs = random_refs(rng, 20, 3);
    const Vec centroid = mean_of(refs);
    Vec far = centroid;
    for (auto& x : far) x += 1e6;
    const double d_far = ksd(far, refs, GaussianKernel{&eye});
    const double d_centroid = ksd(centroid, refs, GaussianKernel{&eye});
    CHECK(d_far < d_centroid);
  }
  SUBCASE("depth bounds hold under fuzz") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 300; ++trial) {
      const auto refs = random_refs(rng, 10, 3);
      const double d = ksd(random_vec(rng, 3, 3.0), refs, GaussianKernel{&eye});
      CHECK(d >= 0.0);
      CHECK(d <= 1.0);
    }
  }
}

TEST_CASE("covariance estimation") {
  SUBCASE("identical vectors leave only the ridge") {
    const std::vector<Vec> vs(5, Vec{0.3, 0.7});
    const auto cov = estimate_covariance(vs, 1e-6);
    CHECK(cov.at(0, 0) == doctest::Approx(1e-6).epsilon(1e-9));
    CHECK(cov.at(1, 1) == doctest::Approx(1e-6).epsilon(1e-9));
    CHECK(cov.at(0, 1) == 0.0);
  }
  SUBCASE("hand-computed two-point covariance") {
    const auto cov = estimate_covariance({{1.0, 0.0}, {0.0, 1.0}}, 1e-6);
    CHECK(cov.at(0, 0) == doctest::Approx(0.5 + 1e-6).epsilon(1e-12));
    CHECK(cov.at(1, 1) == doctest::Approx(0.5 + 1e-6).epsilon(1e-12));
    CHECK(cov.at(0, 1) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(cov.at(1, 0) == doctest::Approx(-0.5).epsilon(1e-12));
  }
  SUBCASE("always positive definite") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
      const auto vs = random_refs(rng, 6, 4);
      const auto cov = estimate_covariance(vs, 1e-6);
      CHECK_NOTHROW(Spd{cov});
      // quadratic form stays above the ridge for unit vectors
      const Spd spd(cov);
      Vec e(4, 0.0);
      e[static_cast<std::size_t>(trial % 4)] = 1.0;
      double q = 0;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) q += cov.at(i, j) * e[static_cast<std::size_t>(i)] *
                                         e[static_cast<std::size_t>(j)];
      CHECK(q >= 1e-6 - 1e-15);
    }
    CHECK_THROWS_AS(estimate_covariance({{1.0, 2.0}}, 1e-6), EmptyReferenceSet);
  }
}

TEST_CASE("detector gating") {
  // three softmax clusters near the one-hot corners
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> jitter(0.0, 0.15);
  const int k = 3;
  std::vector<WindowSample> train;
  std::vector<int> labels;
  for (int c = 0; c < k; ++c)
    for (int i = 0; i < 40; ++i) {
      Vec head(static_cast<std::size_t>(k), 0.0);
      for (int j = 0; j < k; ++j) head[static_cast<std::size_t>(j)] = jitter(rng);
      head[static_cast<std::size_t>(c)] = 1.0;
      train.push_back(window_of(head));
      labels.push_back(c);
    }
  const auto proba = raw_proba(k);
  auto detector = build_detector(proba, k, train, labels, 1e-6, 500, 1);
  REQUIRE(detector.classes.size() == 3);
  for (const auto& c : detector.classes) CHECK(c.vectors.size() == 40);

  SUBCASE("threshold zero never rejects and matches the bare argmax") {
    detector.threshold = 0.0;
    for (const auto& w : train) {
      const auto gate = classify_with_ood(detector, proba, w);
      CHECK(!gate.is_ood);
      CHECK(gate.cls == learn::argmax(proba(w)));
    }
  }
  SUBCASE("threshold one rejects every non-median point") {
    detector.threshold = 1.0;
    int rejected = 0;
    for (const auto& w : train) {
      const auto gate = classify_with_ood(detector, proba, w);
      if (gate.depth < 1.0) {
        CHECK(gate.is_ood);
        ++rejected;
      }
    }
    CHECK(rejected > 0);
  }
  SUBCASE("tuning returns the minimum depth and accepts the whole set") {
    std::vector<double> depths;
    const double t_star = tune_threshold(detector, proba, train, &depths);
    REQUIRE(depths.size() == train.size());
    CHECK(t_star == *std::min_element(depths.begin(), depths.end()));
    const auto gates = classify_with_ood_batch(detector, proba, train);
    for (const auto& g : gates) CHECK(!g.is_ood);
    // a single far-off probe lands below the tuned threshold
    Vec odd(static_cast<std::size_t>(k), 1.0 / k);
    const auto gate = classify_with_ood(detector, proba, window_of(odd));
    CHECK(gate.depth < t_star);
    CHECK(gate.is_ood);
  }
  SUBCASE("single test point tunes to its own depth") {
    std::vector<double> depths;
    const double t_star =
        tune_threshold(detector, proba, {train.front()}, &depths);
    REQUIRE(depths.size() == 1);
    CHECK(t_star == depths[0]);
  }
  SUBCASE("accepted sets shrink as the threshold grows") {
    std::vector<double> depths;
    tune_threshold(detector, proba, train, &depths);
    for (double t1 = 0.0; t1 <= 1.0; t1 += 0.25)
      for (double t2 = t1 + 0.25; t2 <= 1.0; t2 += 0.25) {
        std::vector<int> accept1, accept2;
        for (std::size_t i = 0; i < depths.size(); ++i) {
          if (!(depths[i] < t1)) accept1.push_back(static_cast<int>(i));
          if (!(depths[i] < t2)) accept2.push_back(static_cast<int>(i));
        }
        CHECK(std::includes(accept1.begin(), accept1.end(), accept2.begin(), accept2.end()));
      }
  }
  SUBCASE("empty test set") {
    CHECK_THROWS_AS(tune_threshold(detector, proba, {}), EmptyTestSet);
  }
  SUBCASE("missing class") {
    CHECK_THROWS_AS(build_detector(proba, 4, train, labels, 1e-6, 500, 1), EmptyReferenceSet);
  }
  SUBCASE("reference sets are capped by subsampling") {
    const auto capped = build_detector(proba, k, train, labels, 1e-6, 10, 1);
    for (const auto& c : capped.classes) CHECK(c.vectors.size() == 10);
  }
  SUBCASE("batch and single gating agree across execution policies") {
    detector.threshold = 0.5;
    const auto serial = classify_with_ood_batch(detector, proba, train, Exec::Serial);
    const auto parallel = classify_with_ood_batch(detector, proba, train, Exec::Parallel);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
      CHECK(serial[i].cls == parallel[i].cls);
      CHECK(serial[i].depth == parallel[i].depth);
      CHECK(serial[i].is_ood == parallel[i].is_ood);
      const auto single = classify_with_ood(detector, proba, train[i]);
      CHECK(single.cls == serial[i].cls);
      CHECK(single.depth == serial[i].depth);
    }
  }
}

TEST_CASE("detector json round trip") {
  std::mt19937_64 rng(10);
  OodDetector detector;
  detector.threshold = 0.48;
  detector.ridge = 1e-6;
  detector.seed = 99;
  detector.model_hash = 0xDEADBEEF12345678ULL;
  for (int c = 0; c < 2; ++c) {
    ClassReferenceSet refs;
    refs.class_id = c;
    refs.vectors = random_refs(rng, 5, 3);
    refs.covariance = estimate_covariance(refs.vectors, 1e-6);
    detector.classes.push_back(std::move(refs));
  }
  const std::string path = "test_detector.json";
  save_detector(detector, path);
  const auto loaded = load_detector(path);
  CHECK(loaded.threshold == detector.threshold);
  CHECK(loaded.ridge == detector.ridge);
  CHECK(loaded.seed == detector.seed);
  CHECK(loaded.model_hash == detector.model_hash);
  REQUIRE(loaded.classes.size() == 2);
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(loaded.classes[c].vectors == detector.classes[c].vectors);
    CHECK(loaded.classes[c].covariance.data == detector.classes[c].covariance.data);
  }
  std::remove(path.c_str());
}
