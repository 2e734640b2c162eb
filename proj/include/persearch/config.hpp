#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "persearch/detector.hpp"
#include "persearch/membank.hpp"
#include "persearch/synthworld.hpp"

namespace persearch {

// Flat `key = value` config text, `#` comments. Unknown keys are hard
// errors so hyper-parameter typos never pass silently.
struct KvConfig {
  std::map<std::string, std::string> values;

  static KvConfig parse_string(const std::string& text);
  static KvConfig parse_file(const std::string& path);

  // Environment overrides: PERSEARCH_<KEY> replaces or adds `key`.
  void apply_env();

  bool has(const std::string& key) const { return values.count(key) > 0; }
};

struct TrainConfig {
  int alpha = 8;        // source-only warmup epochs
  int epochs = 20;
  int batch_size = 4;   // 2 source + 2 target scenes
  double eps_p = 0.95;
  double eps_h = 0.8;
  double lambda_t = 0.1;
  double lambda_c = 0.1;
  double det_weight = 16.0;  // detection loss gradient scale vs the reid loss
  double gamma = 0.2;      // prototype momentum
  double gamma_box = 0.2;  // box/feature memory EMA
  double tau = 0.05;
  double theta_match = 0.5;
  double theta_dup = 0.4;
  double theta_nms = 0.4;
  double mu_grl = 1.0;
  int d_emb = 24;
  SgdConfig sgd;
  bool dam_during_warmup = true;
  bool enable_dam = true;
  bool enable_dc = true;
  bool enable_hm = true;
  bool enable_dtd = true;
  bool task_sensitive = true;
  bool static_memory = false;
  bool gt_boxes = false;
  EpsSchedule dbscan_sched;
  int dbscan_min_pts = 2;
  ProposalCfg proposals;
  int patch_grid = 4;
  int eval_interval = 5;  // final epoch always evaluated
  double gallery_conf_thresh = 0.3;
  uint64_t seed = 0;
  std::string memory_dump;  // per-epoch memory stats JSONL, empty = off

  void validate() const;
};

struct AppConfig {
  WorldConfig world;
  TrainConfig train;
};

// Parses the union schema; every key must be known.
AppConfig app_config_from_kv(const KvConfig& kv);

std::string train_config_to_json(const TrainConfig& cfg);
std::string world_config_to_json(const WorldConfig& cfg);

}  // namespace persearch
