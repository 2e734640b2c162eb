#pragma once

#include <cstdint>
#include <vector>

#include "persearch/detector.hpp"

namespace persearch {

struct Query {
  int identity = 0;
  int probe_scene_id = 0;
  Box gt_box;
  Vec feature;  // unit-norm reid embedding of the GT crop
};

struct GalleryDetection {
  int scene_id = 0;
  Box box;
  double confidence = 0;
  Vec embedding;  // unit-norm
};

struct GalleryCfg {
  ProposalCfg proposals;
  double theta_nms = 0.4;
  double conf_thresh = 0.5;
};

// NMS-filtered detections with unit-norm embeddings over the test scenes.
std::vector<GalleryDetection> build_gallery(ModelParams& m,
                                            const std::vector<Scene>& scenes,
                                            const DomainModel& model,
                                            const GalleryCfg& cfg,
                                            uint64_t seed);

std::vector<Query> build_queries(ModelParams& m, const DatasetSnapshot& snap,
                                 double render_noise, uint64_t seed);

struct SearchMetrics {
  double map = 0;
  double top1 = 0;
  int evaluated = 0;
  int skipped = 0;  // queries whose identity is absent from the gallery GT
};

// Per query: rank all non-probe gallery detections by cosine similarity.
// A detection is correct iff IOU >= iou_thresh with an unclaimed GT box of
// the query identity; repeats on the same GT count as false positives.
SearchMetrics search_eval(const std::vector<Query>& queries,
                          const std::vector<GalleryDetection>& gallery,
                          const std::vector<Scene>& test_scenes,
                          double iou_thresh = 0.5);

}  // namespace persearch
