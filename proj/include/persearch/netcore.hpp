#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace persearch {

using Vec = std::vector<double>;

struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  bool operator==(const Mat&) const = default;
};

// ---- small vector helpers ----
double dot(const Vec& a, const Vec& b);
double norm(const Vec& a);
Vec normalized(const Vec& a);
void axpy(double alpha, const Vec& x, Vec& y);  // y += alpha * x
Vec scaled(const Vec& a, double s);
double cosine(const Vec& a, const Vec& b);

Vec matvec(const Mat& m, const Vec& x);
Vec matvec_t(const Mat& m, const Vec& y);  // m^T y

// Solves A x = b in place by Gaussian elimination with partial pivoting.
// Used for closed-form least squares probes; throws on singular A.
Vec solve_linear(Mat a, Vec b);

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One affine layer with gradient and momentum buffers.
struct DenseParams {
  std::string name;
  Mat W, dW, vW;
  Vec b, db, vb;

  DenseParams() = default;
  DenseParams(std::string n, int out, int in)
      : name(std::move(n)), W(out, in), dW(out, in), vW(out, in),
        b(out, 0.0), db(out, 0.0), vb(out, 0.0) {}

  void init_random(std::mt19937_64& rng, double scale);
  void init_orthogonal(std::mt19937_64& rng, double gain);
  void zero_grad();
  int out_dim() const { return W.rows; }
  int in_dim() const { return W.cols; }
};

// y = W x + b
Vec affine_forward(const DenseParams& p, const Vec& x);
// Accumulates dW += dy x^T, db += dy; returns dx = W^T dy.
Vec affine_backward(DenseParams& p, const Vec& x, const Vec& dy);

double logistic(double z);
// loss = -[d log p + (1-d) log(1-p)], p clamped to [1e-7, 1-1e-7].
double binary_ce(double p, int d);
// Gradient of binary_ce w.r.t. the logit that produced p.
inline double binary_ce_dlogit(double p, int d) { return p - d; }

// Gradient reversal: forward is identity, backward scales by -mu.
Vec grad_reverse(const Vec& dy, double mu);

struct SgdConfig {
  double lr = 0.0024;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int lr_drop_epoch = 16;     // lr multiplied by lr_drop_factor from here on
  double lr_drop_factor = 0.1;
  bool warmup = true;         // linear ramp 10% -> 100% across epoch 0

  void validate() const;
};

// Learning rate for a given epoch and position within it (progress in [0,1]).
double scheduled_lr(const SgdConfig& cfg, int epoch, double epoch_progress);

// velocity = momentum*velocity + grad + wd*param; param -= lr*velocity.
// Gradients are zeroed afterwards. Non-finite gradients abort, naming the
// parameter block.
void sgd_step(DenseParams& p, const SgdConfig& cfg, double lr);

// Central-difference check of analytic gradients. `values` and `analytic`
// are parallel: values[i] is perturbed, analytic[i] compared against the
// difference quotient of `loss`. Returns the worst relative error.
double finite_diff_check(const std::function<double()>& loss,
                         std::span<double* const> values,
                         std::span<const double> analytic, double h);

// Convenience: checks every parameter of a block against its dW/db buffers.
double finite_diff_check(const std::function<double()>& loss, DenseParams& p,
                         double h);

}  // namespace persearch
