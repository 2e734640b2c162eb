#include "persearch/membank.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace persearch {

BoxUpdateResult update_box_memory(ImageMemory& mem,
                                  std::span<const ScoredBox> qualified,
                                  double theta_match, double gamma_box,
                                  int epoch) {
  if (!mem.aligned())
    throw NumericalError("update_box_memory: box/feature memory misaligned");
  BoxUpdateResult res;
  res.previous_count = mem.size();

  const MatchResult match = match_to_memory(qualified, mem.boxes, theta_match);
  std::vector<std::vector<int>> per_entry(mem.size());
  for (size_t p = 0; p < qualified.size(); ++p)
    if (match.assignment[p] != kMatchNew)
      per_entry[match.assignment[p]].push_back(static_cast<int>(p));

  std::vector<Box> new_boxes;
  std::vector<int> new_last;
  for (size_t m = 0; m < mem.size(); ++m) {
    if (per_entry[m].empty()) {
      res.removed.push_back(static_cast<int>(m));
      continue;
    }
    Box avg{0, 0, 0, 0};
    for (int p : per_entry[m]) {
      avg.x1 += qualified[p].box.x1;
      avg.y1 += qualified[p].box.y1;
      avg.x2 += qualified[p].box.x2;
      avg.y2 += qualified[p].box.y2;
    }
    const double n = static_cast<double>(per_entry[m].size());
    avg.x1 /= n;
    avg.y1 /= n;
    avg.x2 /= n;
    avg.y2 /= n;
    const Box& old = mem.boxes[m];
    Box upd{gamma_box * old.x1 + (1 - gamma_box) * avg.x1,
            gamma_box * old.y1 + (1 - gamma_box) * avg.y1,
            gamma_box * old.x2 + (1 - gamma_box) * avg.x2,
            gamma_box * old.y2 + (1 - gamma_box) * avg.y2};
    new_boxes.push_back(upd);
    new_last.push_back(epoch);
    res.matched.push_back(per_entry[m]);
    res.previous_index.push_back(static_cast<int>(m));
  }
  for (size_t p = 0; p < qualified.size(); ++p) {
    if (match.assignment[p] != kMatchNew) continue;
    new_boxes.push_back(qualified[p].box);
    new_last.push_back(epoch);
    res.appended.push_back(static_cast<int>(p));
  }
  mem.boxes = std::move(new_boxes);
  mem.last_matched = std::move(new_last);
  return res;
}

void update_feature_memory(ImageMemory& mem, const BoxUpdateResult& update,
                           std::span<const Vec> qualified_feats,
                           double gamma_box) {
  if (mem.feats.size() != update.previous_count)
    throw NumericalError(
        "update_feature_memory: feature memory out of sync with box update");
  std::vector<Vec> new_feats;
  for (size_t k = 0; k < update.previous_index.size(); ++k) {
    const Vec& old = mem.feats[update.previous_index[k]];
    Vec avg(old.size(), 0.0);
    for (int p : update.matched[k]) axpy(1.0, qualified_feats[p], avg);
    for (double& v : avg) v /= static_cast<double>(update.matched[k].size());
    Vec upd = scaled(old, gamma_box);
    axpy(1.0 - gamma_box, avg, upd);
    new_feats.push_back(normalized(upd));
  }
  for (int p : update.appended) new_feats.push_back(qualified_feats[p]);
  mem.feats = std::move(new_feats);
  if (!mem.aligned())
    throw NumericalError("update_feature_memory: alignment violated");
}

ClusterResult dbscan(const std::vector<Vec>& features, double eps,
                     int min_pts) {
  const size_t n = features.size();
  ClusterResult res;
  res.labels.assign(n, -1);
  if (n == 0) return res;

  auto dist = [&](size_t a, size_t b) {
    return 1.0 - dot(features[a], features[b]);
  };

  std::vector<std::vector<size_t>> nbrs(n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      if (dist(i, j) <= eps) nbrs[i].push_back(j);  // includes i itself

  std::vector<bool> core(n, false);
  for (size_t i = 0; i < n; ++i)
    core[i] = static_cast<int>(nbrs[i].size()) >= min_pts;

  // components of the core eps-graph
  int next_label = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!core[i] || res.labels[i] != -1) continue;
    const int label = next_label++;
    std::deque<size_t> queue{i};
    res.labels[i] = label;
    while (!queue.empty()) {
      const size_t cur = queue.front();
      queue.pop_front();
      for (size_t nb : nbrs[cur]) {
        if (!core[nb] || res.labels[nb] != -1) continue;
        res.labels[nb] = label;
        queue.push_back(nb);
      }
    }
  }
  // border points: nearest core within eps
  for (size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    double best = eps;
    int best_label = -1;
    for (size_t nb : nbrs[i]) {
      if (!core[nb]) continue;
      const double d = dist(i, nb);
      if (d <= best && (best_label == -1 || d < best)) {
        best = d;
        best_label = res.labels[nb];
      }
    }
    res.labels[i] = best_label;
  }

  res.n_clusters = next_label;
  res.centroids.resize(next_label);
  std::vector<int> counts(next_label, 0);
  for (size_t i = 0; i < n; ++i) {
    const int l = res.labels[i];
    if (l < 0) continue;
    if (res.centroids[l].empty()) res.centroids[l].assign(features[i].size(), 0.0);
    axpy(1.0, features[i], res.centroids[l]);
    counts[l]++;
  }
  for (int l = 0; l < next_label; ++l)
    res.centroids[l] = normalized(res.centroids[l]);
  return res;
}

double self_paced_eps(int epoch, const EpsSchedule& sched) {
  if (sched.eps_start < sched.eps_end)
    throw std::invalid_argument("self_paced_eps: eps_start must be >= eps_end");
  if (sched.horizon <= 0 || epoch >= sched.horizon) return sched.eps_end;
  if (epoch <= 0) return sched.eps_start;
  const double t = static_cast<double>(epoch) / sched.horizon;
  return sched.eps_start + t * (sched.eps_end - sched.eps_start);
}

int UnifiedMemory::find(Partition part, int key) const {
  for (size_t i = 0; i < protos.size(); ++i)
    if (protos[i].part == part && protos[i].key == key)
      return static_cast<int>(i);
  return -1;
}

int UnifiedMemory::count(Partition part) const {
  int c = 0;
  for (const Prototype& p : protos) c += (p.part == part);
  return c;
}

UnifiedMemory build_unified_memory(const std::map<int, Vec>& source_prototypes,
                                   const std::vector<Vec>& target_feats,
                                   const ClusterResult& clusters,
                                   const std::vector<Vec>& hard_cases,
                                   double tau, double gamma) {
  UnifiedMemory mem;
  mem.tau = tau;
  mem.gamma = gamma;
  for (const auto& [id, v] : source_prototypes)
    mem.protos.push_back({Partition::SourceClass, id, normalized(v)});
  for (int c = 0; c < clusters.n_clusters; ++c)
    mem.protos.push_back({Partition::Centroid, c, clusters.centroids[c]});
  for (size_t i = 0; i < target_feats.size(); ++i)
    if (clusters.labels[i] < 0)
      mem.protos.push_back(
          {Partition::Outlier, static_cast<int>(i), target_feats[i]});
  for (size_t i = 0; i < hard_cases.size(); ++i)
    mem.protos.push_back({Partition::Hard, static_cast<int>(i), hard_cases[i]});
  return mem;
}

MemoryLoss memory_loss(const Vec& x, int positive, const UnifiedMemory& mem) {
  if (positive < 0 || positive >= static_cast<int>(mem.protos.size()))
    throw std::out_of_range("memory_loss: positive key out of range");
  if (mem.protos[positive].part == Partition::Hard)
    throw std::logic_error(
        "memory_loss: hard cases are negatives until promoted");

  const double tau = mem.tau;
  std::vector<double> sims(mem.protos.size());
  double max_s = -1e300;
  for (size_t j = 0; j < mem.protos.size(); ++j) {
    sims[j] = dot(x, mem.protos[j].z) / tau;
    max_s = std::max(max_s, sims[j]);
  }
  double denom = 0;
  for (double s : sims) denom += std::exp(s - max_s);
  const double logsumexp = max_s + std::log(denom);

  MemoryLoss out;
  out.loss = logsumexp - sims[positive];
  out.dx.assign(x.size(), 0.0);
  for (size_t j = 0; j < mem.protos.size(); ++j) {
    const double p = std::exp(sims[j] - logsumexp);
    axpy(p / tau, mem.protos[j].z, out.dx);
  }
  axpy(-1.0 / tau, mem.protos[positive].z, out.dx);
  return out;
}

void momentum_update(UnifiedMemory& mem, int index, const Vec& x,
                     double gamma) {
  if (index < 0 || index >= static_cast<int>(mem.protos.size()))
    throw std::out_of_range("momentum_update: unknown key");
  Vec z = scaled(mem.protos[index].z, gamma);
  axpy(1.0 - gamma, x, z);
  mem.protos[index].z = normalized(z);
}

std::vector<int> mine_hard_cases(std::span<const ScoredBox> proposals,
                                 std::span<const ScoredBox> qualified,
                                 double eps_h, double eps_p, double theta_dup) {
  if (eps_h >= eps_p)
    throw std::invalid_argument("mine_hard_cases: requires eps_h < eps_p");
  std::vector<int> hard;
  for (size_t i = 0; i < proposals.size(); ++i) {
    const double c = proposals[i].confidence;
    if (c <= eps_h || c >= eps_p) continue;
    double dup = 0;
    for (const ScoredBox& q : qualified)
      dup = std::max(dup, iou(proposals[i].box, q.box));
    if (dup <= theta_dup) hard.push_back(static_cast<int>(i));
  }
  return hard;
}

std::vector<HardCase> promote_hard_cases(std::vector<HardCase>& hard,
                                         int image_id,
                                         std::span<const ScoredBox> qualified,
                                         std::span<const Vec> qualified_feats,
                                         double theta_match, double gamma,
                                         ImageMemory& mem, int epoch) {
  std::vector<HardCase> promoted;
  std::vector<HardCase> remaining;
  for (HardCase& hc : hard) {
    if (hc.image_id != image_id) {
      remaining.push_back(std::move(hc));
      continue;
    }
    double best = theta_match;
    int best_idx = -1;
    for (size_t q = 0; q < qualified.size(); ++q) {
      const double s = iou(hc.box, qualified[q].box);
      if (s > best) {
        best = s;
        best_idx = static_cast<int>(q);
      }
    }
    if (best_idx < 0) {
      remaining.push_back(std::move(hc));
      continue;
    }
    const ScoredBox& q = qualified[best_idx];
    Box upd{gamma * hc.box.x1 + (1 - gamma) * q.box.x1,
            gamma * hc.box.y1 + (1 - gamma) * q.box.y1,
            gamma * hc.box.x2 + (1 - gamma) * q.box.x2,
            gamma * hc.box.y2 + (1 - gamma) * q.box.y2};
    Vec feat = scaled(hc.feat, gamma);
    axpy(1.0 - gamma, qualified_feats[best_idx], feat);
    mem.boxes.push_back(upd);
    mem.feats.push_back(normalized(feat));
    mem.last_matched.push_back(epoch);
    promoted.push_back(std::move(hc));
  }
  hard = std::move(remaining);
  return promoted;
}

}  // namespace persearch
