#include "persearch/searcheval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "persearch/rng.hpp"

namespace persearch {

std::vector<GalleryDetection> build_gallery(ModelParams& m,
                                            const std::vector<Scene>& scenes,
                                            const DomainModel& model,
                                            const GalleryCfg& cfg,
                                            uint64_t seed) {
  std::vector<GalleryDetection> gallery;
  for (const Scene& scene : scenes) {
    auto rng = substream(seed, "gallery", static_cast<uint64_t>(scene.id));
    std::vector<Box> seeds;
    for (const Instance& inst : scene.instances) seeds.push_back(inst.box);
    std::vector<Proposal> props =
        propose(scene, model, seeds, cfg.proposals, rng, seed);
    score_proposals(m, props);
    for (int idx : select_qualified(props, cfg.conf_thresh, cfg.theta_nms)) {
      GalleryDetection det;
      det.scene_id = scene.id;
      det.box = props[idx].box;
      det.confidence = props[idx].confidence;
      det.embedding = reid_forward(m, props[idx].raw).e;
      gallery.push_back(std::move(det));
    }
  }
  return gallery;
}

std::vector<Query> build_queries(ModelParams& m, const DatasetSnapshot& snap,
                                 double render_noise, uint64_t seed) {
  std::vector<Query> queries;
  for (const QueryRef& ref : snap.queries) {
    const Scene* scene = nullptr;
    for (const Scene& s : snap.target_test)
      if (s.id == ref.scene_id) scene = &s;
    if (!scene) continue;
    const Instance& inst = scene->instances.at(ref.instance_idx);
    Query q;
    q.identity = inst.identity;
    q.probe_scene_id = scene->id;
    q.gt_box = inst.box;
    const Vec raw = render_roi_feature(*scene, snap.target_model, inst.box,
                                       render_noise, seed);
    q.feature = reid_forward(m, raw).e;
    queries.push_back(std::move(q));
  }
  return queries;
}

SearchMetrics search_eval(const std::vector<Query>& queries,
                          const std::vector<GalleryDetection>& gallery,
                          const std::vector<Scene>& test_scenes,
                          double iou_thresh) {
  SearchMetrics out;
  double ap_sum = 0;
  int top1_hits = 0;

  for (const Query& q : queries) {
    // relevant GT boxes of this identity outside the probe scene
    std::vector<std::pair<int, Box>> rel_gt;
    for (const Scene& s : test_scenes) {
      if (s.id == q.probe_scene_id) continue;
      for (const Instance& inst : s.instances)
        if (inst.identity == q.identity) rel_gt.emplace_back(s.id, inst.box);
    }
    if (rel_gt.empty()) {
      std::fprintf(stderr,
                   "search_eval: query identity %d absent from gallery GT, "
                   "skipping\n",
                   q.identity);
      ++out.skipped;
      continue;
    }

    std::vector<size_t> order;
    for (size_t i = 0; i < gallery.size(); ++i)
      if (gallery[i].scene_id != q.probe_scene_id) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return dot(q.feature, gallery[a].embedding) >
             dot(q.feature, gallery[b].embedding);
    });

    std::vector<bool> used(rel_gt.size(), false);
    double ap = 0;
    int hits = 0;
    bool first_correct = false;
    for (size_t rank = 0; rank < order.size(); ++rank) {
      const GalleryDetection& det = gallery[order[rank]];
      int match = -1;
      double best = iou_thresh;
      for (size_t g = 0; g < rel_gt.size(); ++g) {
        if (used[g] || rel_gt[g].first != det.scene_id) continue;
        const double s = iou(det.box, rel_gt[g].second);
        if (s >= best) {
          best = s;
          match = static_cast<int>(g);
        }
      }
      if (match >= 0) {
        used[match] = true;
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
        if (rank == 0) first_correct = true;
      }
    }
    ap /= static_cast<double>(rel_gt.size());
    ap_sum += ap;
    top1_hits += first_correct ? 1 : 0;
    ++out.evaluated;
  }

  if (out.evaluated > 0) {
    out.map = ap_sum / out.evaluated;
    out.top1 = static_cast<double>(top1_hits) / out.evaluated;
  }
  return out;
}

}  // namespace persearch
