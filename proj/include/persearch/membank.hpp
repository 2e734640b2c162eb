#pragma once

#include <map>
#include <span>
#include <vector>

#include "persearch/geometry.hpp"
#include "persearch/netcore.hpp"

namespace persearch {

// Per-target-image pseudo-person store. Boxes and their EMA features are
// parallel arrays; update_box_memory / update_feature_memory must be called
// as a pair so |feats| == |boxes| holds after every refresh.
struct ImageMemory {
  std::vector<Box> boxes;
  std::vector<Vec> feats;  // unit-norm EMA embeddings
  std::vector<int> last_matched;

  size_t size() const { return boxes.size(); }
  bool aligned() const {
    return feats.size() == boxes.size() && last_matched.size() == boxes.size();
  }
};

struct BoxUpdateResult {
  // per surviving entry (post-update order): indices of matched proposals
  std::vector<std::vector<int>> matched;
  // per surviving entry: its index before the update
  std::vector<int> previous_index;
  // proposal indices appended as new entries
  std::vector<int> appended;
  // former entry indices that went stale and were removed
  std::vector<int> removed;
  size_t previous_count = 0;
};

// Matches qualified proposals against the memory boxes, EMA-updates the
// matched boxes, drops stale ones, appends unmatched proposals as new
// entries. Features are left untouched; call update_feature_memory with the
// returned bookkeeping to restore alignment.
BoxUpdateResult update_box_memory(ImageMemory& mem,
                                  std::span<const ScoredBox> qualified,
                                  double theta_match, double gamma_box,
                                  int epoch);

// Mirrors the box update on the feature side: EMA with the same gamma, then
// re-normalization. Aborts if the memory was not left by update_box_memory.
void update_feature_memory(ImageMemory& mem, const BoxUpdateResult& update,
                           std::span<const Vec> qualified_feats,
                           double gamma_box);

struct ClusterResult {
  std::vector<int> labels;  // per feature: cluster id or -1 for outliers
  std::vector<Vec> centroids;  // unit-normalized member means
  int n_clusters = 0;
};

// Density clustering with distance 1 - cosine over unit vectors. A point is
// core if it has >= min_pts neighbors within eps (itself included); clusters
// are the components of the core eps-graph. Border points join the cluster
// of their nearest core, which keeps the partition independent of input
// order.
ClusterResult dbscan(const std::vector<Vec>& features, double eps,
                     int min_pts);

struct EpsSchedule {
  double eps_start = 0.6;
  double eps_end = 0.4;
  int horizon = 8;  // epochs to reach eps_end
};

// Coarse-to-fine eps: linear from eps_start to eps_end over `horizon`
// epochs, constant afterwards. `epoch` counts from the first clustering.
double self_paced_eps(int epoch, const EpsSchedule& sched);

enum class Partition { SourceClass, Centroid, Outlier, Hard };

struct Prototype {
  Partition part;
  int key;  // identity id / cluster id / slot index, depending on partition
  Vec z;    // unit-norm
};

struct UnifiedMemory {
  std::vector<Prototype> protos;
  double tau = 0.05;
  double gamma = 0.2;

  int find(Partition part, int key) const;
  int count(Partition part) const;
};

// Assembles M = {V source prototypes, W centroids, F outliers, H hard cases}.
UnifiedMemory build_unified_memory(const std::map<int, Vec>& source_prototypes,
                                   const std::vector<Vec>& target_feats,
                                   const ClusterResult& clusters,
                                   const std::vector<Vec>& hard_cases,
                                   double tau, double gamma);

struct MemoryLoss {
  double loss = 0;
  Vec dx;  // gradient w.r.t. x
};

// Contrastive softmax over every prototype in the memory; hard cases appear
// only in the denominator. `positive` indexes protos and must not be a hard
// case.
MemoryLoss memory_loss(const Vec& x, int positive, const UnifiedMemory& mem);

// z <- gamma*z + (1-gamma)*x, re-normalized.
void momentum_update(UnifiedMemory& mem, int index, const Vec& x,
                     double gamma);

// Proposals with confidence strictly inside (eps_h, eps_p) whose max IOU
// with any qualified proposal is <= theta_dup. Returns indices into
// `proposals`.
std::vector<int> mine_hard_cases(std::span<const ScoredBox> proposals,
                                 std::span<const ScoredBox> qualified,
                                 double eps_h, double eps_p, double theta_dup);

struct HardCase {
  int image_id = 0;
  Box box;
  Vec feat;  // unit-norm
  int epoch = 0;
};

// Hard cases of `image_id` matched by a new qualified proposal (IOU >
// theta_match) move into the image memory, EMA-updated toward the matching
// proposal. Returns the moved entries; they are erased from `hard`.
// Unmatched entries stay for the caller to expire at end of epoch.
std::vector<HardCase> promote_hard_cases(std::vector<HardCase>& hard,
                                         int image_id,
                                         std::span<const ScoredBox> qualified,
                                         std::span<const Vec> qualified_feats,
                                         double theta_match, double gamma,
                                         ImageMemory& mem, int epoch);

}  // namespace persearch
