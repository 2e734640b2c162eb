#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "persearch/model.hpp"
#include "persearch/netcore.hpp"
#include "persearch/rng.hpp"

using namespace persearch;

namespace {

Vec random_vec(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vec v(n);
  for (double& x : v) x = g(rng);
  return v;
}

constexpr double kFdTol = 1e-4;
constexpr double kFdStep = 1e-6;

}  // namespace

TEST_CASE("vector helpers") {
  Vec a{1, 2, 2};
  CHECK(dot(a, a) == 9.0);
  CHECK(norm(a) == 3.0);
  Vec n = normalized(a);
  CHECK(n[0] == doctest::Approx(1.0 / 3));
  CHECK(norm(n) == doctest::Approx(1.0));
  Vec y{1, 1, 1};
  axpy(2.0, a, y);
  CHECK(y == Vec{3, 5, 5});
  CHECK(cosine(Vec{1, 0}, Vec{0, 1}) == doctest::Approx(0.0));
  CHECK(cosine(Vec{2, 0}, Vec{5, 0}) == doctest::Approx(1.0));
}

TEST_CASE("matvec and transpose") {
  Mat m(2, 3);
  m(0, 0) = 1; m(0, 1) = 2; m(0, 2) = 3;
  m(1, 0) = 4; m(1, 1) = 5; m(1, 2) = 6;
  CHECK(matvec(m, Vec{1, 1, 1}) == Vec{6, 15});
  CHECK(matvec_t(m, Vec{1, 1}) == Vec{5, 7, 9});
}

TEST_CASE("solve_linear recovers a known solution") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5;
    Mat a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = random_vec(rng, 1)[0];
    for (int i = 0; i < n; ++i) a(i, i) += 3.0;  // keep it well conditioned
    const Vec x_true = random_vec(rng, n);
    const Vec b = matvec(a, x_true);
    const Vec x = solve_linear(a, b);
    for (int i = 0; i < n; ++i) CHECK(x[i] == doctest::Approx(x_true[i]).epsilon(1e-9));
  }
}

TEST_CASE("solve_linear rejects singular systems") {
  Mat a(2, 2);
  a(0, 0) = 1; a(0, 1) = 2;
  a(1, 0) = 2; a(1, 1) = 4;
  CHECK_THROWS_AS(solve_linear(a, Vec{1, 1}), NumericalError);
}

TEST_CASE("logistic and binary cross entropy") {
  CHECK(logistic(0.0) == 0.5);
  CHECK(logistic(100.0) == doctest::Approx(1.0));
  CHECK(binary_ce(0.5, 1) == doctest::Approx(std::log(2.0)));
  CHECK(binary_ce(0.5, 0) == doctest::Approx(std::log(2.0)));
  CHECK(binary_ce(1.0, 1) == doctest::Approx(-std::log(1.0 - 1e-7)));
  // dlogit check against finite differences on the logit
  for (double z : {-2.0, -0.3, 0.0, 0.7, 3.0}) {
    for (int d : {0, 1}) {
      const double h = 1e-6;
      const double fd =
          (binary_ce(logistic(z + h), d) - binary_ce(logistic(z - h), d)) / (2 * h);
      CHECK(binary_ce_dlogit(logistic(z), d) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("grad_reverse scales by -mu") {
  CHECK(grad_reverse(Vec{1, -2, 0.5}, 1.0) == Vec{-1, 2, -0.5});
  CHECK(grad_reverse(Vec{4}, 0.25) == Vec{-1});
}

TEST_CASE("affine gradients pass finite differences") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    DenseParams p("t", 4, 6);
    p.init_random(rng, 0.5);
    const Vec x = random_vec(rng, 6);
    const Vec target = random_vec(rng, 4);

    auto loss_fn = [&]() {
      const Vec y = affine_forward(p, x);
      double l = 0;
      for (int i = 0; i < 4; ++i) l += 0.5 * (y[i] - target[i]) * (y[i] - target[i]);
      return l;
    };
    p.zero_grad();
    const Vec y = affine_forward(p, x);
    Vec dy(4);
    for (int i = 0; i < 4; ++i) dy[i] = y[i] - target[i];
    const Vec dx = affine_backward(p, x, dy);
    CHECK(finite_diff_check(loss_fn, p, kFdStep) < kFdTol);

    // input gradient via perturbed copies of x
    Vec x_mut = x;
    auto loss_x = [&]() {
      const Vec yy = affine_forward(p, x_mut);
      double l = 0;
      for (int i = 0; i < 4; ++i) l += 0.5 * (yy[i] - target[i]) * (yy[i] - target[i]);
      return l;
    };
    std::vector<double*> ptrs;
    for (double& v : x_mut) ptrs.push_back(&v);
    CHECK(finite_diff_check(loss_x, ptrs, dx, kFdStep) < kFdTol);
  }
}

TEST_CASE("trunk ReLU gradients pass finite differences") {
  std::mt19937_64 rng(19);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    DenseParams trunk("trunk", 5, 7);
    trunk.init_random(rng, 0.6);
    const Vec x = random_vec(rng, 7);
    const Vec w = random_vec(rng, 5);
    auto loss_fn = [&]() {
      const TrunkCache c = trunk_forward(trunk, x);
      return dot(w, c.f);
    };
    // skip configurations with a pre-activation near the ReLU kink, where
    // central differences are invalid
    const TrunkCache c = trunk_forward(trunk, x);
    bool near_kink = false;
    for (double h : c.h) near_kink |= std::abs(h) < 1e-4;
    if (near_kink) continue;
    trunk.zero_grad();
    trunk_backward(trunk, c, w);
    CHECK(finite_diff_check(loss_fn, trunk, kFdStep) < kFdTol);
    ++checked;
  }
  CHECK(checked >= 25);
}

TEST_CASE("reid path gradients through normalization pass finite differences") {
  std::mt19937_64 rng(29);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    ModelParams m(6, 5, 1000 + trial);
    const Vec raw = random_vec(rng, 6);
    const Vec w = random_vec(rng, 5);
    const ReidCache c = reid_forward(m, raw);
    bool near_kink = false;
    for (double h : c.tc.h) near_kink |= std::abs(h) < 1e-4;
    if (near_kink || c.znorm < 1e-3) continue;
    m.zero_grad();
    reid_backward(m, c, w);
    auto loss_fn = [&]() {
      ModelParams& mm = m;
      const ReidCache cc = reid_forward(mm, raw);
      return dot(w, cc.e);
    };
    // a larger step than kFdStep keeps roundoff noise below the tolerance
    // for the tiny gradient components behind the normalization
    CHECK(finite_diff_check(loss_fn, m.trunk, 1e-5) < kFdTol);
    CHECK(finite_diff_check(loss_fn, m.reid_head, 1e-5) < kFdTol);
    ++checked;
  }
  CHECK(checked >= 25);
}

TEST_CASE("normalized embedding gradient is orthogonal to the embedding") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    ModelParams m(6, 5, 2000 + trial);
    const Vec raw = random_vec(rng, 6);
    const ReidCache c = reid_forward(m, raw);
    // d|e|^2/dz = 0, so the pullback of any de through the normalization is
    // orthogonal to e in z space; verify via the loss dot(e, e) staying flat
    auto loss_fn = [&]() { return dot(reid_forward(m, raw).e, reid_forward(m, raw).e); };
    const double base = loss_fn();
    CHECK(base == doctest::Approx(1.0));
  }
}

TEST_CASE("detection confidence gradients pass finite differences") {
  std::mt19937_64 rng(37);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    ModelParams m(6, 5, 3000 + trial);
    const Vec raw = random_vec(rng, 6);
    const int label = trial % 2;
    const TrunkCache c = trunk_forward(m.trunk, raw);
    bool near_kink = false;
    for (double h : c.h) near_kink |= std::abs(h) < 1e-4;
    if (near_kink) continue;
    auto loss_fn = [&]() {
      const TrunkCache cc = trunk_forward(m.trunk, raw);
      return binary_ce(det_confidence(m, cc), label);
    };
    m.zero_grad();
    det_backward(m, c, binary_ce_dlogit(det_confidence(m, c), label));
    CHECK(finite_diff_check(loss_fn, m.trunk, kFdStep) < kFdTol);
    CHECK(finite_diff_check(loss_fn, m.det_head, kFdStep) < kFdTol);
    ++checked;
  }
  CHECK(checked >= 25);
}

TEST_CASE("sgd step matches a hand-unrolled momentum recurrence") {
  DenseParams p("w", 1, 1);
  p.W(0, 0) = 1.0;
  SgdConfig cfg;
  cfg.lr = 0.1;
  cfg.momentum = 0.9;
  cfg.weight_decay = 0.01;
  double w = 1.0, v = 0.0;
  for (int step = 0; step < 10; ++step) {
    const double g = 2.0 * w;  // loss w^2
    p.dW(0, 0) = g;
    p.db[0] = 0.0;
    sgd_step(p, cfg, cfg.lr);
    v = cfg.momentum * v + g + cfg.weight_decay * w;
    w -= cfg.lr * v;
    CHECK(p.W(0, 0) == doctest::Approx(w).epsilon(1e-12));
    CHECK(p.dW(0, 0) == 0.0);  // grads cleared
  }
}

TEST_CASE("sgd aborts on non-finite gradients and names the block") {
  DenseParams p("det_head", 1, 1);
  p.dW(0, 0) = std::numeric_limits<double>::quiet_NaN();
  SgdConfig cfg;
  try {
    sgd_step(p, cfg, cfg.lr);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("det_head") != std::string::npos);
  }
}

TEST_CASE("learning rate schedule: warmup ramp, plateau, drop") {
  SgdConfig cfg;  // lr 0.0024, drop at 16 by 0.1, warmup on
  CHECK(scheduled_lr(cfg, 0, 0.0) == doctest::Approx(0.1 * cfg.lr));
  CHECK(scheduled_lr(cfg, 0, 0.5) == doctest::Approx(0.55 * cfg.lr));
  CHECK(scheduled_lr(cfg, 0, 1.0) == doctest::Approx(cfg.lr));
  CHECK(scheduled_lr(cfg, 1, 0.0) == doctest::Approx(cfg.lr));
  CHECK(scheduled_lr(cfg, 15, 0.9) == doctest::Approx(cfg.lr));
  CHECK(scheduled_lr(cfg, 16, 0.0) == doctest::Approx(0.1 * cfg.lr));
  CHECK(scheduled_lr(cfg, 19, 0.5) == doctest::Approx(0.1 * cfg.lr));
  SgdConfig no_warm = cfg;
  no_warm.warmup = false;
  CHECK(scheduled_lr(no_warm, 0, 0.0) == doctest::Approx(cfg.lr));
}

TEST_CASE("checkpoint round trip preserves every parameter") {
  ModelParams m(8, 6, 42);
  const std::string path = "test_checkpoint_roundtrip.jsonl";
  save_checkpoint(m, path);
  const ModelParams back = load_checkpoint(path);
  std::remove(path.c_str());
  ModelParams& mm = const_cast<ModelParams&>(m);
  ModelParams& bb = const_cast<ModelParams&>(back);
  auto blocks_a = mm.all_blocks();
  auto blocks_b = bb.all_blocks();
  REQUIRE(blocks_a.size() == blocks_b.size());
  for (size_t i = 0; i < blocks_a.size(); ++i) {
    CHECK(blocks_a[i]->W == blocks_b[i]->W);
    CHECK(blocks_a[i]->b == blocks_b[i]->b);
    CHECK(blocks_a[i]->name == blocks_b[i]->name);
  }
}

TEST_CASE("substreams are stable and distinct") {
  std::mt19937_64 a = substream(7, "datagen");
  std::mt19937_64 b = substream(7, "datagen");
  std::mt19937_64 c = substream(7, "eval");
  std::mt19937_64 d = substream(8, "datagen");
  CHECK(a() == b());
  std::mt19937_64 a2 = substream(7, "datagen");
  CHECK(a2() != c());
  CHECK(substream(7, "datagen")() != d());
  CHECK(substream(7, "datagen", 0)() != substream(7, "datagen", 1)());
}
