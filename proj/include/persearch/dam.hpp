#pragma once

#include <vector>

#include "persearch/model.hpp"

namespace persearch {

// Balancing factor between the two instance-level alignment heads, from
// the source/target scene counts. Antisymmetric: f(a,b) + f(b,a) == 1.
double balance_lambda(int n_s, int n_t);

struct ImageAlignResult {
  double loss = 0;    // mean binary CE over patches
  double mean_p = 0;  // mean patch-level domain probability
};

// Patch-based image-level adversarial alignment. Classifier gradients are
// standard; trunk gradients pass through gradient reversal with factor mu.
// `grad_weight` scales all accumulated gradients (loss value is unscaled).
ImageAlignResult image_align_loss(ModelParams& m,
                                  const std::vector<TrunkCache>& patches,
                                  int domain, double mu, double grad_weight);

// Task-sensitive instance-level alignment over the detection-head set (K1)
// and the reid-head set (K2), weighted lambda / (1 - lambda). Each head sum
// is normalized by its instance count; empty sets contribute 0.
double instance_align_loss(ModelParams& m,
                           const std::vector<const TrunkCache*>& k1,
                           const std::vector<const TrunkCache*>& k2,
                           int domain, double lambda, double mu,
                           double grad_weight);

// L2 consistency between the image-level prediction (mean patch
// probability) and the instance-level predictions. Gradients go to the
// classifier stacks only, not reversed.
double consistency_reg(ModelParams& m, const std::vector<TrunkCache>& patches,
                       const std::vector<const TrunkCache*>& k1,
                       const std::vector<const TrunkCache*>& k2,
                       double grad_weight);

}  // namespace persearch
