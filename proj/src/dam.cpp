#include "persearch/dam.hpp"

#include <cmath>
#include <stdexcept>

namespace persearch {

double balance_lambda(int n_s, int n_t) {
  if (n_s < 1 || n_t < 1)
    throw std::invalid_argument("balance_lambda: counts must be >= 1");
  const double sign = n_t > n_s ? 1.0 : (n_t < n_s ? -1.0 : 0.0);
  const double ratio =
      static_cast<double>(std::max(n_s, n_t)) / std::min(n_s, n_t);
  return logistic(4.0 * sign * (ratio - 1.0));
}

ImageAlignResult image_align_loss(ModelParams& m,
                                  const std::vector<TrunkCache>& patches,
                                  int domain, double mu, double grad_weight) {
  ImageAlignResult res;
  if (patches.empty()) return res;
  const double n = static_cast<double>(patches.size());
  for (const TrunkCache& c : patches) {
    const double p = logistic(affine_forward(m.dom_img, c.f)[0]);
    res.loss += binary_ce(p, domain);
    res.mean_p += p;
    const double dlogit = binary_ce_dlogit(p, domain) / n * grad_weight;
    const Vec df = affine_backward(m.dom_img, c.f, Vec{dlogit});
    trunk_backward(m.trunk, c, grad_reverse(df, mu));
  }
  res.loss /= n;
  res.mean_p /= n;
  return res;
}

static double head_term(ModelParams& m, DenseParams& head,
                        const std::vector<const TrunkCache*>& set, int domain,
                        double coef, double mu, double grad_weight) {
  if (set.empty()) return 0.0;
  const double n = static_cast<double>(set.size());
  double loss = 0;
  for (const TrunkCache* c : set) {
    const double p = logistic(affine_forward(head, c->f)[0]);
    loss += binary_ce(p, domain);
    const double dlogit =
        coef * binary_ce_dlogit(p, domain) / n * grad_weight;
    const Vec df = affine_backward(head, c->f, Vec{dlogit});
    trunk_backward(m.trunk, *c, grad_reverse(df, mu));
  }
  return loss / n;
}

double instance_align_loss(ModelParams& m,
                           const std::vector<const TrunkCache*>& k1,
                           const std::vector<const TrunkCache*>& k2,
                           int domain, double lambda, double mu,
                           double grad_weight) {
  const double det = head_term(m, m.dom_det, k1, domain, lambda, mu, grad_weight);
  const double reid =
      head_term(m, m.dom_reid, k2, domain, 1.0 - lambda, mu, grad_weight);
  return lambda * det + (1.0 - lambda) * reid;
}

double consistency_reg(ModelParams& m, const std::vector<TrunkCache>& patches,
                       const std::vector<const TrunkCache*>& k1,
                       const std::vector<const TrunkCache*>& k2,
                       double grad_weight) {
  const size_t n_inst = k1.size() + k2.size();
  if (patches.empty() || n_inst == 0) return 0.0;

  const double n_patch = static_cast<double>(patches.size());
  std::vector<double> patch_p;
  double p_img = 0;
  for (const TrunkCache& c : patches) {
    const double p = logistic(affine_forward(m.dom_img, c.f)[0]);
    patch_p.push_back(p);
    p_img += p;
  }
  p_img /= n_patch;

  double loss = 0;
  double d_pimg = 0;
  auto instance_side = [&](DenseParams& head,
                           const std::vector<const TrunkCache*>& set) {
    for (const TrunkCache* c : set) {
      const double p = logistic(affine_forward(head, c->f)[0]);
      const double diff = p - p_img;
      loss += diff * diff;
      const double dl_dp = 2.0 * diff / static_cast<double>(n_inst);
      d_pimg -= dl_dp;
      const double dlogit = dl_dp * p * (1.0 - p) * grad_weight;
      affine_backward(head, c->f, Vec{dlogit});
    }
  };
  instance_side(m.dom_det, k1);
  instance_side(m.dom_reid, k2);
  loss /= static_cast<double>(n_inst);

  for (size_t i = 0; i < patches.size(); ++i) {
    const double p = patch_p[i];
    const double dlogit = d_pimg / n_patch * p * (1.0 - p) * grad_weight;
    affine_backward(m.dom_img, patches[i].f, Vec{dlogit});
  }
  return loss;
}

}  // namespace persearch
