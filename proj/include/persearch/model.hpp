#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "persearch/netcore.hpp"

namespace persearch {

// Shared trunk plus all task heads, each with explicit gradient buffers.
struct ModelParams {
  DenseParams trunk;      // d_app -> d_emb, followed by ReLU
  DenseParams det_head;   // d_emb -> 1 logit
  DenseParams reid_head;  // d_emb -> d_emb, output unit-normalized
  DenseParams dom_img;    // image-level domain classifier, d_emb -> 1
  DenseParams dom_det;    // detection-head instance classifier
  DenseParams dom_reid;   // reid-head instance classifier

  ModelParams() = default;
  ModelParams(int d_app, int d_emb, uint64_t seed);

  std::vector<DenseParams*> all_blocks();
  void zero_grad();
  void step(const SgdConfig& cfg, double lr);

  int d_app() const { return trunk.in_dim(); }
  int d_emb() const { return trunk.out_dim(); }
};

struct TrunkCache {
  Vec x;  // raw input
  Vec h;  // pre-ReLU
  Vec f;  // post-ReLU
};

TrunkCache trunk_forward(const DenseParams& trunk, Vec x);
void trunk_backward(DenseParams& trunk, const TrunkCache& c, const Vec& df);

struct ReidCache {
  TrunkCache tc;
  Vec z;        // reid_head output
  Vec e;        // z / |z|
  double znorm = 0;
};

ReidCache reid_forward(ModelParams& m, Vec raw);
// Backward of the unit-normalized embedding, through reid head and trunk.
void reid_backward(ModelParams& m, const ReidCache& c, const Vec& de);

// Detection confidence = logistic(det_head(trunk(raw))).
double det_confidence(const ModelParams& m, const TrunkCache& c);
// Backprop from d(loss)/d(logit) into det head and trunk.
void det_backward(ModelParams& m, const TrunkCache& c, double dlogit);

void save_checkpoint(const ModelParams& m, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace persearch
