#include "persearch/geometry.hpp"

#include <algorithm>
#include <numeric>

namespace persearch {

double intersection_area(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  return iw * ih;
}

double iou(const Box& a, const Box& b) {
  const double ix1 = std::max(a.x1, b.x1);
  const double iy1 = std::max(a.y1, b.y1);
  const double ix2 = std::min(a.x2, b.x2);
  const double iy2 = std::min(a.y2, b.y2);
  const double iw = ix2 - ix1;
  const double ih = iy2 - iy1;
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

std::vector<ScoredBox> greedy_nms(std::span<const ScoredBox> candidates,
                                  double theta_nms) {
  std::vector<size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return candidates[a].confidence > candidates[b].confidence;
  });

  std::vector<ScoredBox> kept;
  for (size_t idx : order) {
    bool suppressed = false;
    for (const ScoredBox& k : kept) {
      if (iou(candidates[idx].box, k.box) > theta_nms) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(candidates[idx]);
  }
  return kept;
}

MatchResult match_to_memory(std::span<const ScoredBox> proposals,
                            std::span<const Box> memory, double theta_match) {
  MatchResult res;
  res.assignment.assign(proposals.size(), kMatchNew);
  std::vector<bool> touched(memory.size(), false);

  for (size_t p = 0; p < proposals.size(); ++p) {
    double best = theta_match;
    int best_idx = kMatchNew;
    for (size_t m = 0; m < memory.size(); ++m) {
      const double s = iou(proposals[p].box, memory[m]);
      if (s > best) {  // strict: ties keep the lower memory index
        best = s;
        best_idx = static_cast<int>(m);
      }
    }
    res.assignment[p] = best_idx;
    if (best_idx != kMatchNew) touched[best_idx] = true;
  }
  for (size_t m = 0; m < memory.size(); ++m)
    if (!touched[m]) res.stale.push_back(static_cast<int>(m));
  return res;
}

}  // namespace persearch
