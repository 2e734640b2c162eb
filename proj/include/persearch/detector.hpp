#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "persearch/geometry.hpp"
#include "persearch/model.hpp"
#include "persearch/synthworld.hpp"

namespace persearch {

struct ProposalCfg {
  double jitter = 2.0;     // Gaussian offset scale on box corners
  int jitter_copies = 3;   // jittered copies per seed box
  int n_random = 8;        // uniform random boxes
  double render_noise = 0.02;
};

enum class Stage { DetectionHead, ReidHead };

struct Proposal {
  Box box;
  Vec raw;          // ROI feature (d_app)
  TrunkCache trunk; // filled by score_proposals
  double confidence = 0;
  Stage stage = Stage::DetectionHead;
};

// RPN stand-in: jittered copies of the seed boxes plus uniform random boxes.
// Raw features come from render_roi_feature. Deterministic per rng state.
std::vector<Proposal> propose(const Scene& scene, const DomainModel& model,
                              const std::vector<Box>& seed_boxes,
                              const ProposalCfg& cfg, std::mt19937_64& rng,
                              uint64_t render_seed);

// Runs the trunk and detection head over each proposal, storing trunk
// cache and confidence.
void score_proposals(ModelParams& m, std::vector<Proposal>& proposals);

double score(ModelParams& m, Proposal& p);

struct DetectionBatch {
  int scene_id = 0;
  int domain = 0;
  std::vector<Proposal> proposals;
  std::optional<std::vector<Box>> supervision;  // GT or pseudo boxes
};

// Mean binary CE against IOU-derived labels (positive iff max IOU with a
// supervision box >= 0.5). Gradients flow to det head and trunk, scaled by
// `weight`. Calling without supervision is a contract violation.
double detection_loss(ModelParams& m, const DetectionBatch& batch,
                      double weight);

// NMS then confidence filter; returns indices into `proposals` of the
// qualified set (the c_1..c_m fed to the box memory).
std::vector<int> select_qualified(const std::vector<Proposal>& proposals,
                                  double eps_p, double theta_nms);

std::vector<ScoredBox> select_qualified_boxes(
    const std::vector<ScoredBox>& proposals, double eps_p, double theta_nms);

struct DetectionMetrics {
  double recall = 0;
  double ap = 0;
};

// Greedy confidence-ranked matching at `iou_thresh`; AP is the area under
// the all-point interpolated precision-recall curve.
DetectionMetrics detection_eval(
    const std::vector<std::vector<Box>>& gt_per_scene,
    const std::vector<std::vector<ScoredBox>>& det_per_scene,
    double iou_thresh);

}  // namespace persearch
