#include "persearch/netcore.hpp"

#include <algorithm>
#include <cmath>

namespace persearch {

double dot(const Vec& a, const Vec& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

Vec normalized(const Vec& a) {
  const double n = norm(a);
  if (n == 0) throw NumericalError("normalized: zero vector");
  Vec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] / n;
  return r;
}

void axpy(double alpha, const Vec& x, Vec& y) {
  for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vec scaled(const Vec& a, double s) {
  Vec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] * s;
  return r;
}

double cosine(const Vec& a, const Vec& b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0 || nb == 0) return 0.0;
  return dot(a, b) / (na * nb);
}

Vec matvec(const Mat& m, const Vec& x) {
  if (static_cast<int>(x.size()) != m.cols)
    throw NumericalError("matvec: shape mismatch");
  Vec y(m.rows, 0.0);
  for (int r = 0; r < m.rows; ++r) {
    double s = 0;
    for (int c = 0; c < m.cols; ++c) s += m(r, c) * x[c];
    y[r] = s;
  }
  return y;
}

Vec matvec_t(const Mat& m, const Vec& y) {
  if (static_cast<int>(y.size()) != m.rows)
    throw NumericalError("matvec_t: shape mismatch");
  Vec x(m.cols, 0.0);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) x[c] += m(r, c) * y[r];
  return x;
}

Vec solve_linear(Mat a, Vec b) {
  const int n = a.rows;
  if (a.cols != n || static_cast<int>(b.size()) != n)
    throw NumericalError("solve_linear: not square");
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (std::abs(a(piv, col)) < 1e-12)
      throw NumericalError("solve_linear: singular matrix");
    if (piv != col) {
      for (int c = 0; c < n; ++c) std::swap(a(piv, c), a(col, c));
      std::swap(b[piv], b[col]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      for (int c = col; c < n; ++c) a(r, c) -= f * a(col, c);
      b[r] -= f * b[col];
    }
  }
  Vec x(n, 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a(r, c) * x[c];
    x[r] = s / a(r, r);
  }
  return x;
}

void DenseParams::init_random(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  for (double& w : W.a) w = g(rng);
  for (double& v : b) v = 0.0;
}

void DenseParams::init_orthogonal(std::mt19937_64& rng, double gain) {
  // Gaussian draw followed by Gram-Schmidt on the rows (columns when the
  // layer widens), so the map preserves angles at initialization.
  std::normal_distribution<double> g(0.0, 1.0);
  const bool by_rows = W.rows <= W.cols;
  const int nvec = by_rows ? W.rows : W.cols;
  const int dim = by_rows ? W.cols : W.rows;
  std::vector<Vec> basis;
  basis.reserve(nvec);
  while (static_cast<int>(basis.size()) < nvec) {
    Vec v(dim);
    for (double& x : v) x = g(rng);
    for (const Vec& u : basis) axpy(-dot(v, u), u, v);
    const double n = norm(v);
    if (n < 1e-8) continue;  // degenerate draw, retry
    basis.push_back(scaled(v, 1.0 / n));
  }
  for (int i = 0; i < nvec; ++i)
    for (int j = 0; j < dim; ++j) {
      if (by_rows) W(i, j) = gain * basis[i][j];
      else W(j, i) = gain * basis[i][j];
    }
  for (double& v : b) v = 0.0;
}

void DenseParams::zero_grad() {
  std::fill(dW.a.begin(), dW.a.end(), 0.0);
  std::fill(db.begin(), db.end(), 0.0);
}

Vec affine_forward(const DenseParams& p, const Vec& x) {
  Vec y = matvec(p.W, x);
  for (int r = 0; r < p.out_dim(); ++r) y[r] += p.b[r];
  return y;
}

Vec affine_backward(DenseParams& p, const Vec& x, const Vec& dy) {
  if (static_cast<int>(dy.size()) != p.out_dim() ||
      static_cast<int>(x.size()) != p.in_dim())
    throw NumericalError("affine_backward: shape mismatch in " + p.name);
  for (int r = 0; r < p.out_dim(); ++r) {
    p.db[r] += dy[r];
    for (int c = 0; c < p.in_dim(); ++c) p.dW(r, c) += dy[r] * x[c];
  }
  return matvec_t(p.W, dy);
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double binary_ce(double p, int d) {
  p = std::clamp(p, 1e-7, 1.0 - 1e-7);
  return -(d * std::log(p) + (1 - d) * std::log(1.0 - p));
}

Vec grad_reverse(const Vec& dy, double mu) { return scaled(dy, -mu); }

void SgdConfig::validate() const {
  if (lr <= 0) throw std::invalid_argument("SgdConfig: lr must be > 0");
  if (momentum < 0 || momentum >= 1)
    throw std::invalid_argument("SgdConfig: momentum must be in [0,1)");
}

double scheduled_lr(const SgdConfig& cfg, int epoch, double epoch_progress) {
  double lr = cfg.lr;
  if (epoch >= cfg.lr_drop_epoch) lr *= cfg.lr_drop_factor;
  if (cfg.warmup && epoch == 0)
    lr *= 0.1 + 0.9 * std::clamp(epoch_progress, 0.0, 1.0);
  return lr;
}

static void step_block(std::span<double> param, std::span<double> grad,
                       std::span<double> vel, const SgdConfig& cfg, double lr,
                       const std::string& name) {
  for (size_t i = 0; i < param.size(); ++i) {
    if (!std::isfinite(grad[i]))
      throw NumericalError("sgd_step: non-finite gradient in block '" + name +
                           "'");
    vel[i] = cfg.momentum * vel[i] + grad[i] + cfg.weight_decay * param[i];
    param[i] -= lr * vel[i];
    grad[i] = 0.0;
  }
}

void sgd_step(DenseParams& p, const SgdConfig& cfg, double lr) {
  step_block(p.W.a, p.dW.a, p.vW.a, cfg, lr, p.name);
  step_block(p.b, p.db, p.vb, cfg, lr, p.name);
}

double finite_diff_check(const std::function<double()>& loss,
                         std::span<double* const> values,
                         std::span<const double> analytic, double h) {
  double worst = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    double* v = values[i];
    const double orig = *v;
    *v = orig + h;
    const double lp = loss();
    *v = orig - h;
    const double lm = loss();
    *v = orig;
    const double fd = (lp - lm) / (2.0 * h);
    const double an = analytic[i];
    const double err =
        std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
    worst = std::max(worst, err);
  }
  return worst;
}

double finite_diff_check(const std::function<double()>& loss, DenseParams& p,
                         double h) {
  std::vector<double*> values;
  std::vector<double> analytic;
  for (size_t i = 0; i < p.W.a.size(); ++i) {
    values.push_back(&p.W.a[i]);
    analytic.push_back(p.dW.a[i]);
  }
  for (size_t i = 0; i < p.b.size(); ++i) {
    values.push_back(&p.b[i]);
    analytic.push_back(p.db[i]);
  }
  return finite_diff_check(loss, values, analytic, h);
}

}  // namespace persearch
