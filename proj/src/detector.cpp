#include "persearch/detector.hpp"

#include <algorithm>
#include <numeric>

namespace persearch {

static Box clamp_to_canvas(Box b, double w, double h) {
  b.x1 = std::clamp(b.x1, 0.0, w - 1e-6);
  b.y1 = std::clamp(b.y1, 0.0, h - 1e-6);
  b.x2 = std::clamp(b.x2, b.x1 + 1e-6, w);
  b.y2 = std::clamp(b.y2, b.y1 + 1e-6, h);
  return b;
}

std::vector<Proposal> propose(const Scene& scene, const DomainModel& model,
                              const std::vector<Box>& seed_boxes,
                              const ProposalCfg& cfg, std::mt19937_64& rng,
                              uint64_t render_seed) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Proposal> out;
  for (const Box& seed : seed_boxes) {
    for (int k = 0; k < cfg.jitter_copies; ++k) {
      Box b = seed;
      if (cfg.jitter > 0) {
        b.x1 += cfg.jitter * g(rng);
        b.y1 += cfg.jitter * g(rng);
        b.x2 += cfg.jitter * g(rng);
        b.y2 += cfg.jitter * g(rng);
      }
      b = clamp_to_canvas(b, scene.w, scene.h);
      Proposal p;
      p.box = b;
      p.raw = render_roi_feature(scene, model, b, cfg.render_noise, render_seed);
      out.push_back(std::move(p));
    }
  }
  for (int k = 0; k < cfg.n_random; ++k) {
    const double w = 5.0 + u(rng) * (scene.w * 0.5 - 5.0);
    const double h = 5.0 + u(rng) * (scene.h * 0.5 - 5.0);
    const double x1 = u(rng) * (scene.w - w);
    const double y1 = u(rng) * (scene.h - h);
    Proposal p;
    p.box = Box{x1, y1, x1 + w, y1 + h};
    p.raw =
        render_roi_feature(scene, model, p.box, cfg.render_noise, render_seed);
    out.push_back(std::move(p));
  }
  return out;
}

double score(ModelParams& m, Proposal& p) {
  p.trunk = trunk_forward(m.trunk, p.raw);
  p.confidence = det_confidence(m, p.trunk);
  return p.confidence;
}

void score_proposals(ModelParams& m, std::vector<Proposal>& proposals) {
  for (Proposal& p : proposals) score(m, p);
}

double detection_loss(ModelParams& m, const DetectionBatch& batch,
                      double weight) {
  if (!batch.supervision)
    throw std::logic_error("detection_loss: batch has no supervision boxes");
  if (batch.proposals.empty()) return 0.0;
  const std::vector<Box>& sup = *batch.supervision;
  double loss = 0;
  const double n = static_cast<double>(batch.proposals.size());
  for (const Proposal& p : batch.proposals) {
    double best = 0;
    for (const Box& s : sup) best = std::max(best, iou(p.box, s));
    const int label = best >= 0.5 ? 1 : 0;
    loss += binary_ce(p.confidence, label);
    const double dlogit = binary_ce_dlogit(p.confidence, label) / n * weight;
    det_backward(m, p.trunk, dlogit);
  }
  return loss / n;
}

std::vector<int> select_qualified(const std::vector<Proposal>& proposals,
                                  double eps_p, double theta_nms) {
  std::vector<size_t> order(proposals.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return proposals[a].confidence > proposals[b].confidence;
  });
  std::vector<int> kept;
  for (size_t idx : order) {
    bool suppressed = false;
    for (int k : kept)
      if (iou(proposals[idx].box, proposals[k].box) > theta_nms) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(static_cast<int>(idx));
  }
  std::vector<int> qualified;
  for (int k : kept)
    if (proposals[k].confidence >= eps_p) qualified.push_back(k);
  return qualified;
}

std::vector<ScoredBox> select_qualified_boxes(
    const std::vector<ScoredBox>& proposals, double eps_p, double theta_nms) {
  std::vector<ScoredBox> out;
  for (const ScoredBox& s : greedy_nms(proposals, theta_nms))
    if (s.confidence >= eps_p) out.push_back(s);
  return out;
}

DetectionMetrics detection_eval(
    const std::vector<std::vector<Box>>& gt_per_scene,
    const std::vector<std::vector<ScoredBox>>& det_per_scene,
    double iou_thresh) {
  struct Det {
    double conf;
    size_t scene;
    const Box* box;
  };
  std::vector<Det> dets;
  size_t total_gt = 0;
  for (size_t s = 0; s < det_per_scene.size(); ++s)
    for (const ScoredBox& d : det_per_scene[s])
      dets.push_back({d.confidence, s, &d.box});
  for (const auto& g : gt_per_scene) total_gt += g.size();

  std::stable_sort(dets.begin(), dets.end(),
                   [](const Det& a, const Det& b) { return a.conf > b.conf; });

  std::vector<std::vector<bool>> used(gt_per_scene.size());
  for (size_t s = 0; s < gt_per_scene.size(); ++s)
    used[s].assign(gt_per_scene[s].size(), false);

  std::vector<double> precision, recall;
  size_t tp = 0, fp = 0;
  for (const Det& d : dets) {
    double best = iou_thresh;
    int best_idx = -1;
    const auto& gts = gt_per_scene[d.scene];
    for (size_t g = 0; g < gts.size(); ++g) {
      if (used[d.scene][g]) continue;
      const double s = iou(*d.box, gts[g]);
      if (s >= best) {
        best = s;
        best_idx = static_cast<int>(g);
      }
    }
    if (best_idx >= 0) {
      used[d.scene][best_idx] = true;
      ++tp;
    } else {
      ++fp;
    }
    precision.push_back(static_cast<double>(tp) / (tp + fp));
    recall.push_back(total_gt == 0 ? 0.0 : static_cast<double>(tp) / total_gt);
  }

  DetectionMetrics out;
  if (dets.empty() || total_gt == 0) return out;
  out.recall = recall.back();
  // all-point interpolation: precision envelope from the right
  std::vector<double> envelope(precision.size());
  double run = 0;
  for (size_t i = precision.size(); i-- > 0;) {
    run = std::max(run, precision[i]);
    envelope[i] = run;
  }
  double ap = 0, prev_r = 0;
  for (size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_r) * envelope[i];
    prev_r = recall[i];
  }
  out.ap = ap;
  return out;
}

}  // namespace persearch
