#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "persearch/geometry.hpp"
#include "persearch/netcore.hpp"

namespace persearch {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WorldConfig {
  int n_source_scenes = 64;
  int n_target_scenes = 60;
  int n_test_scenes = 30;
  int n_queries = 30;
  int n_source_ids = 16;
  int n_target_ids = 8;
  int min_instances = 1;
  int max_instances = 3;
  int d_app = 24;  // enough room for all identities to be orthogonal
  double canvas_w = 100.0;
  double canvas_h = 100.0;
  double sigma_source = 0.05;
  double sigma_target = 0.05;
  // Domain gap: target appearances go through (1-mix)*I + mix*Q, and every
  // target crop additionally carries a camera-style tint of magnitude
  // target_shift along the target background texture (identity-neutral).
  double target_mix = 0.0;
  double target_shift = 0.6;
  double box_mean_source = 16.0;
  double box_mean_target = 30.0;
  double box_spread = 0.2;
  double texture_scale = 0.6;
  // How far the target background texture drifts from the source one.
  // 0 = identical backgrounds, 1 = independent random direction.
  double texture_gap = 0.1;
  // Per-scene clutter: how far each scene bends the domain texture.
  double texture_jitter = 0.0;
  // 0 = target identities clone source identities, 1 = unrelated population
  double id_novelty = 0.0;
  int max_distractors = 2;

  void validate() const;
  bool operator==(const WorldConfig&) const = default;
};

struct DomainModel {
  int domain = 0;  // 0 source, 1 target
  Mat appearance_map;   // A_d
  Vec appearance_shift; // b_d
  double sigma = 0.0;
  Vec texture;          // t_d
  double texture_jitter = 0.0;
  double box_mean = 20.0;
  double box_spread = 0.2;

  bool operator==(const DomainModel&) const = default;
};

struct Instance {
  int identity = 0;
  Box box;
  Vec appearance;  // A_d u + b_d + noise, realized once at generation

  bool operator==(const Instance&) const = default;
};

struct Distractor {
  Box box;
  Vec texture;

  bool operator==(const Distractor&) const = default;
};

struct Scene {
  int id = 0;
  int domain = 0;
  double w = 0, h = 0;
  std::vector<Instance> instances;
  std::vector<Distractor> distractors;

  bool operator==(const Scene&) const = default;
};

struct IdentityBank {
  std::map<int, Vec> latents;  // identity id -> unit vector (d_app)

  bool operator==(const IdentityBank&) const = default;
};

// Probe reference for evaluation: instance `instance_idx` of scene
// `scene_id` is the query crop.
struct QueryRef {
  int scene_id = 0;
  int instance_idx = 0;

  bool operator==(const QueryRef&) const = default;
};

struct DatasetSnapshot {
  WorldConfig config;
  IdentityBank bank;
  DomainModel source_model, target_model;
  std::vector<Scene> source_train;
  std::vector<Scene> target_train;
  std::vector<Scene> target_test;
  std::vector<QueryRef> queries;

  const DomainModel& model_for(int domain) const {
    return domain == 0 ? source_model : target_model;
  }

  bool operator==(const DatasetSnapshot&) const = default;
};

// Deterministic for a fixed seed. All generated reals are rounded to
// 9 significant digits so snapshots survive serialization exactly.
DatasetSnapshot generate_dataset(const WorldConfig& config, uint64_t seed);

// IOU-weighted mixture of instance appearances, distractor textures and the
// domain background texture, plus Gaussian noise of scale `noise_scale`.
// Deterministic given (scene, box, render_seed).
Vec render_roi_feature(const Scene& scene, const DomainModel& model,
                       const Box& box, double noise_scale,
                       uint64_t render_seed);

// G x G grid of render_roi_feature over the scene canvas, row-major.
std::vector<Vec> render_patch_features(const Scene& scene,
                                       const DomainModel& model, int grid,
                                       double noise_scale,
                                       uint64_t render_seed);

void save_snapshot(const DatasetSnapshot& snap, const std::string& path);
DatasetSnapshot load_snapshot(const std::string& path);

std::string snapshot_to_string(const DatasetSnapshot& snap);
DatasetSnapshot snapshot_from_string(const std::string& text);

// Least-squares linear probe: fits domain label on the first `train_frac`
// of the samples and reports accuracy on the rest.
double linear_probe_accuracy(const std::vector<Vec>& features,
                             const std::vector<int>& labels,
                             double train_frac = 0.7, double ridge = 1e-3);

double quantize9(double x);

}  // namespace persearch
