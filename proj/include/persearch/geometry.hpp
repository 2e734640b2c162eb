#pragma once

#include <span>
#include <vector>

namespace persearch {

// Axis-aligned rectangle in scene coordinates, corners (x1,y1)-(x2,y2).
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const { return x1 < x2 && y1 < y2; }

  bool operator==(const Box&) const = default;
};

struct ScoredBox {
  Box box;
  double confidence = 0;  // in [0,1]
};

// Intersection over union; symmetric, in [0,1], 1 iff identical boxes.
double iou(const Box& a, const Box& b);

// Area of the overlap region, 0 if the boxes are disjoint.
double intersection_area(const Box& a, const Box& b);

// Descending-confidence greedy NMS. Ties on confidence are broken by the
// earlier index. Kept boxes come out in selection order.
std::vector<ScoredBox> greedy_nms(std::span<const ScoredBox> candidates,
                                  double theta_nms);

constexpr int kMatchNew = -1;

struct MatchResult {
  // proposal index -> memory index, or kMatchNew if no memory box exceeds
  // theta_match.
  std::vector<int> assignment;
  // memory indices that attracted no proposal.
  std::vector<int> stale;
};

// Assigns each proposal to the memory box with maximal IOU if that IOU
// exceeds theta_match. Equal-IOU ties go to the lower memory index.
MatchResult match_to_memory(std::span<const ScoredBox> proposals,
                            std::span<const Box> memory, double theta_match);

}  // namespace persearch
