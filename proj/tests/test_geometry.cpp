#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "persearch/geometry.hpp"

using namespace persearch;

namespace {

Box random_box(std::mt19937_64& rng, double extent = 50.0) {
  std::uniform_real_distribution<double> u(0.0, extent);
  std::uniform_real_distribution<double> s(1.0, extent / 2);
  const double x1 = u(rng), y1 = u(rng);
  return Box{x1, y1, x1 + s(rng), y1 + s(rng)};
}

// brute-force oracle: best memory box per proposal by exhaustive IOU scan
std::vector<int> match_oracle(const std::vector<ScoredBox>& proposals,
                              const std::vector<Box>& memory, double thresh) {
  std::vector<int> out;
  for (const ScoredBox& p : proposals) {
    int best = kMatchNew;
    double best_iou = thresh;
    for (size_t m = 0; m < memory.size(); ++m) {
      const double s = iou(p.box, memory[m]);
      if (s > best_iou) {
        best_iou = s;
        best = static_cast<int>(m);
      }
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace

TEST_CASE("iou identity and disjoint cases") {
  const Box a{0, 0, 2, 2};
  CHECK(iou(a, a) == doctest::Approx(1.0));
  CHECK(iou(a, Box{5, 5, 7, 7}) == 0.0);
  CHECK(iou(a, Box{2, 0, 4, 2}) == 0.0);  // touching edges, zero area
}

TEST_CASE("iou hand geometry: unit overlap of two 2x2 boxes") {
  // intersection 1, union 7
  CHECK(iou(Box{0, 0, 2, 2}, Box{1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0));
}

TEST_CASE("iou symmetry and bounds over random pairs") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    const Box a = random_box(rng), b = random_box(rng);
    const double s = iou(a, b);
    CHECK(s == iou(b, a));
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(iou(a, a) == doctest::Approx(1.0));
  }
}

TEST_CASE("nms keeps a single box") {
  std::vector<ScoredBox> c{{Box{0, 0, 2, 2}, 0.7}};
  const auto kept = greedy_nms(c, 0.4);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].box == c[0].box);
}

TEST_CASE("nms suppresses the lower-confidence duplicate") {
  std::vector<ScoredBox> c{{Box{0, 0, 2, 2}, 0.9}, {Box{0, 0, 2, 2}, 0.8}};
  const auto kept = greedy_nms(c, 0.4);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].confidence == 0.9);
}

TEST_CASE("nms greedy walk: overlapping pair plus disjoint box") {
  // A,B overlap with IOU 0.8 (approx), C disjoint
  std::vector<ScoredBox> c{{Box{0, 0, 10, 10}, 0.6},
                           {Box{0, 0, 10, 9}, 0.8},
                           {Box{50, 50, 60, 60}, 0.5}};
  REQUIRE(iou(c[0].box, c[1].box) > 0.4);
  const auto kept = greedy_nms(c, 0.4);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].confidence == 0.8);  // higher of A/B
  CHECK(kept[1].confidence == 0.5);  // C survives
}

TEST_CASE("nms confidence ties break toward the earlier index") {
  std::vector<ScoredBox> c{{Box{0, 0, 2, 2}, 0.7}, {Box{0.1, 0, 2, 2}, 0.7}};
  const auto kept = greedy_nms(c, 0.4);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].box == c[0].box);
}

TEST_CASE("nms result is an antichain under the threshold") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ScoredBox> c;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 20; ++i) c.push_back({random_box(rng), u(rng)});
    const auto kept = greedy_nms(c, 0.4);
    for (size_t i = 0; i < kept.size(); ++i)
      for (size_t j = i + 1; j < kept.size(); ++j)
        CHECK(iou(kept[i].box, kept[j].box) <= 0.4);
  }
}

TEST_CASE("empty nms input yields empty output") {
  CHECK(greedy_nms({}, 0.4).empty());
}

TEST_CASE("match_to_memory with empty memory marks everything new") {
  std::vector<ScoredBox> p{{Box{0, 0, 2, 2}, 0.9}, {Box{5, 5, 8, 8}, 0.8}};
  const MatchResult r = match_to_memory(p, {}, 0.5);
  CHECK(r.assignment == std::vector<int>{kMatchNew, kMatchNew});
  CHECK(r.stale.empty());
}

TEST_CASE("exact overlap matches at IOU 1") {
  std::vector<ScoredBox> p{{Box{1, 1, 4, 4}, 0.99}};
  std::vector<Box> mem{Box{1, 1, 4, 4}};
  const MatchResult r = match_to_memory(p, mem, 0.5);
  CHECK(r.assignment == std::vector<int>{0});
  CHECK(r.stale.empty());
}

TEST_CASE("two proposals share one memory box; untouched box goes stale") {
  std::vector<Box> mem{Box{0, 0, 10, 10}, Box{50, 50, 60, 60}};
  std::vector<ScoredBox> p{{Box{0, 0, 10, 8.4}, 0.9},   // IOU 0.84 with box 0
                           {Box{0, 0, 10, 7}, 0.8}};    // IOU 0.7 with box 0
  REQUIRE(iou(p[0].box, mem[0]) > 0.5);
  REQUIRE(iou(p[1].box, mem[0]) > 0.5);
  const MatchResult r = match_to_memory(p, mem, 0.5);
  CHECK(r.assignment == std::vector<int>{0, 0});
  CHECK(r.stale == std::vector<int>{1});
}

TEST_CASE("match_to_memory agrees with brute-force oracle") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> n(0, 10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ScoredBox> p;
    std::vector<Box> mem;
    const int np = n(rng), nm = n(rng);
    for (int i = 0; i < np; ++i) p.push_back({random_box(rng, 20), u(rng)});
    for (int i = 0; i < nm; ++i) mem.push_back(random_box(rng, 20));
    const MatchResult r = match_to_memory(p, mem, 0.5);
    CHECK(r.assignment == match_oracle(p, mem, 0.5));
  }
}
