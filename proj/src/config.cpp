#include "persearch/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

extern char** environ;

namespace persearch {

using nlohmann::json;

static std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

KvConfig KvConfig::parse_string(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(lineno) +
                       ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw ParseError("config line " + std::to_string(lineno) + ": empty key");
    cfg.values[key] = val;
  }
  return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

void KvConfig::apply_env() {
  const std::string prefix = "PERSEARCH_";
  for (char** e = environ; *e; ++e) {
    const std::string entry(*e);
    if (entry.rfind(prefix, 0) != 0) continue;
    const size_t eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string key = entry.substr(prefix.size(), eq - prefix.size());
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    values[key] = entry.substr(eq + 1);
  }
}

namespace {

struct Schema {
  const KvConfig& kv;
  mutable std::map<std::string, bool> seen;

  void take_int(const std::string& key, int& out) const {
    mark(key);
    if (!kv.has(key)) return;
    out = std::stoi(kv.values.at(key));
  }
  void take_u64(const std::string& key, uint64_t& out) const {
    mark(key);
    if (!kv.has(key)) return;
    out = std::stoull(kv.values.at(key));
  }
  void take_double(const std::string& key, double& out) const {
    mark(key);
    if (!kv.has(key)) return;
    out = std::stod(kv.values.at(key));
  }
  void take_bool(const std::string& key, bool& out) const {
    mark(key);
    if (!kv.has(key)) return;
    const std::string& v = kv.values.at(key);
    if (v == "true" || v == "1" || v == "on") out = true;
    else if (v == "false" || v == "0" || v == "off") out = false;
    else throw ConfigError("config key '" + key + "': expected boolean, got '" + v + "'");
  }
  void take_string(const std::string& key, std::string& out) const {
    mark(key);
    if (!kv.has(key)) return;
    out = kv.values.at(key);
  }
  void mark(const std::string& key) const { seen[key] = true; }

  void check_unknown() const {
    for (const auto& [key, _] : kv.values)
      if (!seen.count(key))
        throw ConfigError("config: unknown key '" + key + "'");
  }
};

}  // namespace

void TrainConfig::validate() const {
  if (alpha < 0 || alpha > epochs)
    throw ConfigError("train: alpha must be in [0, epochs]");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 2 || batch_size % 2 != 0)
    throw ConfigError("train: batch_size must be even and >= 2");
  auto in01 = [](double v) { return v > 0 && v < 1; };
  if (!in01(eps_p) || !in01(eps_h) || !in01(theta_match) || !in01(theta_dup) ||
      !in01(theta_nms))
    throw ConfigError("train: thresholds must lie in (0,1)");
  if (eps_h >= eps_p) throw ConfigError("train: requires eps_h < eps_p");
  if (tau <= 0) throw ConfigError("train: tau must be > 0");
  if (det_weight <= 0) throw ConfigError("train: det_weight must be > 0");
  if (gamma < 0 || gamma > 1 || gamma_box < 0 || gamma_box > 1)
    throw ConfigError("train: momentum factors must lie in [0,1]");
  if (mu_grl <= 0) throw ConfigError("train: mu_grl must be > 0");
  if (d_emb < 2) throw ConfigError("train: d_emb must be >= 2");
  if (patch_grid < 1) throw ConfigError("train: patch_grid must be >= 1");
  if (eval_interval < 1) throw ConfigError("train: eval_interval must be >= 1");
  sgd.validate();
}

AppConfig app_config_from_kv(const KvConfig& kv) {
  AppConfig cfg;
  Schema s{kv, {}};

  WorldConfig& w = cfg.world;
  s.take_int("n_source_scenes", w.n_source_scenes);
  s.take_int("n_target_scenes", w.n_target_scenes);
  s.take_int("n_test_scenes", w.n_test_scenes);
  s.take_int("n_queries", w.n_queries);
  s.take_int("n_source_ids", w.n_source_ids);
  s.take_int("n_target_ids", w.n_target_ids);
  s.take_int("min_instances", w.min_instances);
  s.take_int("max_instances", w.max_instances);
  s.take_int("d_app", w.d_app);
  s.take_double("canvas_w", w.canvas_w);
  s.take_double("canvas_h", w.canvas_h);
  s.take_double("sigma_source", w.sigma_source);
  s.take_double("sigma_target", w.sigma_target);
  s.take_double("target_mix", w.target_mix);
  s.take_double("target_shift", w.target_shift);
  s.take_double("box_mean_source", w.box_mean_source);
  s.take_double("box_mean_target", w.box_mean_target);
  s.take_double("box_spread", w.box_spread);
  s.take_double("texture_scale", w.texture_scale);
  s.take_double("texture_gap", w.texture_gap);
  s.take_double("texture_jitter", w.texture_jitter);
  s.take_double("id_novelty", w.id_novelty);
  s.take_int("max_distractors", w.max_distractors);

  TrainConfig& t = cfg.train;
  s.take_int("alpha", t.alpha);
  s.take_int("epochs", t.epochs);
  s.take_int("batch_size", t.batch_size);
  s.take_double("eps_p", t.eps_p);
  s.take_double("eps_h", t.eps_h);
  s.take_double("lambda_t", t.lambda_t);
  s.take_double("lambda_c", t.lambda_c);
  s.take_double("det_weight", t.det_weight);
  s.take_double("gamma", t.gamma);
  s.take_double("gamma_box", t.gamma_box);
  s.take_double("tau", t.tau);
  s.take_double("theta_match", t.theta_match);
  s.take_double("theta_dup", t.theta_dup);
  s.take_double("theta_nms", t.theta_nms);
  s.take_double("mu_grl", t.mu_grl);
  s.take_int("d_emb", t.d_emb);
  s.take_double("lr", t.sgd.lr);
  s.take_double("sgd_momentum", t.sgd.momentum);
  s.take_double("weight_decay", t.sgd.weight_decay);
  s.take_int("lr_drop_epoch", t.sgd.lr_drop_epoch);
  s.take_double("lr_drop_factor", t.sgd.lr_drop_factor);
  s.take_bool("warmup", t.sgd.warmup);
  s.take_bool("dam_during_warmup", t.dam_during_warmup);
  s.take_bool("enable_dam", t.enable_dam);
  s.take_bool("enable_dc", t.enable_dc);
  s.take_bool("enable_hm", t.enable_hm);
  s.take_bool("enable_dtd", t.enable_dtd);
  s.take_bool("task_sensitive", t.task_sensitive);
  s.take_bool("static_memory", t.static_memory);
  s.take_bool("gt_boxes", t.gt_boxes);
  s.take_double("dbscan_eps_start", t.dbscan_sched.eps_start);
  s.take_double("dbscan_eps_end", t.dbscan_sched.eps_end);
  s.take_int("dbscan_horizon", t.dbscan_sched.horizon);
  s.take_int("dbscan_min_pts", t.dbscan_min_pts);
  s.take_double("jitter", t.proposals.jitter);
  s.take_int("jitter_copies", t.proposals.jitter_copies);
  s.take_int("n_random", t.proposals.n_random);
  s.take_double("render_noise", t.proposals.render_noise);
  s.take_int("patch_grid", t.patch_grid);
  s.take_int("eval_interval", t.eval_interval);
  s.take_double("gallery_conf_thresh", t.gallery_conf_thresh);
  s.take_u64("seed", t.seed);
  s.take_string("memory_dump", t.memory_dump);

  s.check_unknown();
  cfg.world.validate();
  cfg.train.validate();
  return cfg;
}

std::string world_config_to_json(const WorldConfig& c) {
  json j{{"n_source_scenes", c.n_source_scenes},
         {"n_target_scenes", c.n_target_scenes},
         {"n_test_scenes", c.n_test_scenes},
         {"n_queries", c.n_queries},
         {"n_source_ids", c.n_source_ids},
         {"n_target_ids", c.n_target_ids},
         {"min_instances", c.min_instances},
         {"max_instances", c.max_instances},
         {"d_app", c.d_app},
         {"canvas_w", c.canvas_w},
         {"canvas_h", c.canvas_h},
         {"sigma_source", c.sigma_source},
         {"sigma_target", c.sigma_target},
         {"target_mix", c.target_mix},
         {"target_shift", c.target_shift},
         {"box_mean_source", c.box_mean_source},
         {"box_mean_target", c.box_mean_target},
         {"box_spread", c.box_spread},
         {"texture_scale", c.texture_scale},
         {"texture_gap", c.texture_gap},
         {"texture_jitter", c.texture_jitter},
         {"id_novelty", c.id_novelty},
         {"max_distractors", c.max_distractors}};
  return j.dump();
}

std::string train_config_to_json(const TrainConfig& t) {
  json j{{"alpha", t.alpha},
         {"epochs", t.epochs},
         {"batch_size", t.batch_size},
         {"eps_p", t.eps_p},
         {"eps_h", t.eps_h},
         {"lambda_t", t.lambda_t},
         {"lambda_c", t.lambda_c},
         {"det_weight", t.det_weight},
         {"gamma", t.gamma},
         {"gamma_box", t.gamma_box},
         {"tau", t.tau},
         {"theta_match", t.theta_match},
         {"theta_dup", t.theta_dup},
         {"theta_nms", t.theta_nms},
         {"mu_grl", t.mu_grl},
         {"d_emb", t.d_emb},
         {"lr", t.sgd.lr},
         {"sgd_momentum", t.sgd.momentum},
         {"weight_decay", t.sgd.weight_decay},
         {"lr_drop_epoch", t.sgd.lr_drop_epoch},
         {"lr_drop_factor", t.sgd.lr_drop_factor},
         {"warmup", t.sgd.warmup},
         {"dam_during_warmup", t.dam_during_warmup},
         {"enable_dam", t.enable_dam},
         {"enable_dc", t.enable_dc},
         {"enable_hm", t.enable_hm},
         {"enable_dtd", t.enable_dtd},
         {"task_sensitive", t.task_sensitive},
         {"static_memory", t.static_memory},
         {"gt_boxes", t.gt_boxes},
         {"dbscan_eps_start", t.dbscan_sched.eps_start},
         {"dbscan_eps_end", t.dbscan_sched.eps_end},
         {"dbscan_horizon", t.dbscan_sched.horizon},
         {"dbscan_min_pts", t.dbscan_min_pts},
         {"jitter", t.proposals.jitter},
         {"jitter_copies", t.proposals.jitter_copies},
         {"n_random", t.proposals.n_random},
         {"render_noise", t.proposals.render_noise},
         {"patch_grid", t.patch_grid},
         {"eval_interval", t.eval_interval},
         {"gallery_conf_thresh", t.gallery_conf_thresh},
         {"seed", t.seed}};
  return j.dump();
}

}  // namespace persearch
