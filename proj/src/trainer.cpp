#include "persearch/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "persearch/dam.hpp"
#include "persearch/membank.hpp"
#include "persearch/rng.hpp"

namespace persearch {

namespace {

struct TargetMemory {
  std::map<int, ImageMemory> per_image;  // scene id -> memory
  std::vector<HardCase> hard;
  bool initialized = false;
};

uint64_t epoch_scene_key(int epoch, int scene_id) {
  return static_cast<uint64_t>(epoch) * 1000003ULL +
         static_cast<uint64_t>(scene_id);
}

void check_finite(double v, const char* component) {
  if (!std::isfinite(v))
    throw NumericalError(std::string("trainer: non-finite loss in component ") +
                         component);
}

struct LossMeter {
  double sum = 0;
  int count = 0;
  void add(double v) {
    sum += v;
    ++count;
  }
  double mean() const { return count == 0 ? 0.0 : sum / count; }
};

}  // namespace

TrainResult run_training(const DatasetSnapshot& snap, const TrainConfig& cfg) {
  cfg.validate();
  if (snap.source_train.empty())
    throw ConfigError("trainer: snapshot has no source training scenes");
  if (snap.target_train.empty())
    throw ConfigError("trainer: snapshot has no target training scenes");

  const int n_src = static_cast<int>(snap.source_train.size());
  const int n_tgt = static_cast<int>(snap.target_train.size());
  const double lam =
      cfg.task_sensitive ? balance_lambda(n_src, n_tgt) : 0.5;

  TrainResult result;
  result.params = ModelParams(snap.config.d_app, cfg.d_emb, cfg.seed);
  ModelParams& model = result.params;

  std::map<int, Vec> source_protos;
  TargetMemory tmem;

  std::ofstream dump;
  if (!cfg.memory_dump.empty()) {
    dump.open(cfg.memory_dump, std::ios::binary);
    if (!dump)
      throw std::runtime_error("trainer: cannot write " + cfg.memory_dump);
  }

  const int half = cfg.batch_size / 2;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const uint64_t render_seed =
        splitmix64(cfg.seed ^ fnv1a("render") ^ static_cast<uint64_t>(epoch));

    // ---- first-epoch source prototypes ----
    if (epoch == 0) {
      std::map<int, Vec> sums;
      std::map<int, int> counts;
      for (const Scene& s : snap.source_train)
        for (const Instance& inst : s.instances) {
          const Vec raw =
              render_roi_feature(s, snap.source_model, inst.box,
                                 cfg.proposals.render_noise, render_seed);
          const Vec e = reid_forward(model, raw).e;
          if (!sums.count(inst.identity)) sums[inst.identity] = Vec(e.size(), 0.0);
          axpy(1.0, e, sums[inst.identity]);
          counts[inst.identity]++;
        }
      for (auto& [id, v] : sums) source_protos[id] = normalized(v);
    }

    // ---- start-of-epoch target memory refresh ----
    const bool engage =
        epoch >= cfg.alpha && (cfg.enable_dc || cfg.enable_dtd || cfg.enable_hm);
    EpochReport rep;
    rep.epoch = epoch;

    std::map<int, std::vector<int>> pos_slot;  // scene -> slot -> proto index
    UnifiedMemory umem;

    if (engage && !(cfg.static_memory && tmem.initialized)) {
      for (const Scene& scene : snap.target_train) {
        auto prng = substream(cfg.seed, "proposals-refresh",
                              epoch_scene_key(epoch, scene.id));
        std::vector<Box> seeds;
        for (const Instance& inst : scene.instances) seeds.push_back(inst.box);
        std::vector<Proposal> props = propose(scene, snap.target_model, seeds,
                                              cfg.proposals, prng, render_seed);
        score_proposals(model, props);

        std::vector<ScoredBox> qualified;
        std::vector<Vec> qfeats;
        if (cfg.gt_boxes) {
          for (const Instance& inst : scene.instances) {
            qualified.push_back(ScoredBox{inst.box, 1.0});
            const Vec raw =
                render_roi_feature(scene, snap.target_model, inst.box,
                                   cfg.proposals.render_noise, render_seed);
            qfeats.push_back(reid_forward(model, raw).e);
          }
        } else {
          for (int idx : select_qualified(props, cfg.eps_p, cfg.theta_nms)) {
            qualified.push_back(
                ScoredBox{props[idx].box, props[idx].confidence});
            qfeats.push_back(reid_forward(model, props[idx].raw).e);
          }
        }
        rep.n_qualified += static_cast<int>(qualified.size());

        ImageMemory& mem = tmem.per_image[scene.id];
        const BoxUpdateResult upd = update_box_memory(
            mem, qualified, cfg.theta_match, cfg.gamma_box, epoch);
        update_feature_memory(mem, upd, qfeats, cfg.gamma_box);

        if (cfg.enable_hm) {
          promote_hard_cases(tmem.hard, scene.id, qualified, qfeats,
                             cfg.theta_match, cfg.gamma, mem, epoch);
        }
        if (cfg.enable_hm && !cfg.gt_boxes) {
          std::vector<ScoredBox> scored;
          for (const Proposal& p : props)
            scored.push_back(ScoredBox{p.box, p.confidence});
          for (int idx : mine_hard_cases(scored, qualified, cfg.eps_h,
                                         cfg.eps_p, cfg.theta_dup)) {
            HardCase hc;
            hc.image_id = scene.id;
            hc.box = props[idx].box;
            hc.feat = reid_forward(model, props[idx].raw).e;
            hc.epoch = epoch;
            tmem.hard.push_back(std::move(hc));
          }
        }
      }
      // unpromoted hard cases expire with their epoch of origin
      std::erase_if(tmem.hard,
                    [epoch](const HardCase& h) { return h.epoch < epoch; });
      tmem.initialized = true;
    }

    // ---- clustering and unified memory ----
    std::vector<Vec> pooled;
    std::vector<std::pair<int, int>> owner;  // (scene id, slot)
    ClusterResult clusters;
    std::vector<Vec> hard_feats;
    if (engage && cfg.enable_dc) {
      // Cluster fresh embeddings of the memory boxes under the current
      // encoder. The averaged features in the memory lag behind the model by
      // several epochs, and that staleness shows up as a shared component
      // that bridges otherwise separable identities at clustering time.
      std::map<int, const Scene*> scene_by_id;
      for (const Scene& s : snap.target_train) scene_by_id[s.id] = &s;
      for (const auto& [sid, mem] : tmem.per_image) {
        const Scene* scene = scene_by_id.at(sid);
        for (size_t k = 0; k < mem.boxes.size(); ++k) {
          const Vec raw =
              render_roi_feature(*scene, snap.target_model, mem.boxes[k],
                                 cfg.proposals.render_noise, render_seed);
          pooled.push_back(reid_forward(model, raw).e);
          owner.emplace_back(sid, static_cast<int>(k));
        }
      }
      const double eps =
          self_paced_eps(epoch - cfg.alpha, cfg.dbscan_sched);
      clusters = dbscan(pooled, eps, cfg.dbscan_min_pts);
      for (const HardCase& h : tmem.hard) hard_feats.push_back(h.feat);
      // TODO: remove before release — refresh-time cluster debugging
      if (std::getenv("PS_DEBUG_CLUSTER") && !pooled.empty()) {
        std::map<int, const Scene*> by_id;
        for (const Scene& s : snap.target_train) by_id[s.id] = &s;
        std::vector<int> pid(pooled.size(), -1);
        for (size_t p = 0; p < pooled.size(); ++p) {
          const Scene* s = by_id[owner[p].first];
          const ImageMemory& mem = tmem.per_image[owner[p].first];
          double best = 0;
          for (const Instance& inst : s->instances) {
            const double v = iou(mem.boxes[owner[p].second], inst.box);
            if (v > best) { best = v; pid[p] = inst.identity; }
          }
        }
        double same = 0, diff = 0, dmax = -1;
        int ns = 0, nd = 0, impure = 0;
        for (size_t i = 0; i < pooled.size(); ++i)
          for (size_t j = i + 1; j < pooled.size(); ++j) {
            const double c = dot(pooled[i], pooled[j]) /
                             (norm(pooled[i]) * norm(pooled[j]));
            if (pid[i] == pid[j] && pid[i] >= 0) { same += c; ++ns; }
            else { diff += c; ++nd; dmax = std::max(dmax, c);
                   if (c > 1.0 - eps) ++impure; }
          }
        std::fprintf(stderr,
                     "[cluster] epoch %d eps %.3f n %zu same %.3f diff %.3f "
                     "dmax %.3f bridges %d clusters %d\n",
                     epoch, eps, pooled.size(), ns ? same / ns : 0,
                     nd ? diff / nd : 0, dmax, impure, clusters.n_clusters);
        // GT-render geometry under the same model, full population vs the
        // subset of identities currently present in the memory
        std::map<int, int> in_mem;
        for (int p : pid) if (p >= 0) in_mem[p]++;
        std::vector<std::pair<int, Vec>> gt;
        for (const Scene& s : snap.target_train)
          for (const Instance& inst : s.instances)
            gt.emplace_back(inst.identity,
                            reid_forward(model,
                                         render_roi_feature(
                                             s, snap.target_model, inst.box,
                                             cfg.proposals.render_noise,
                                             render_seed))
                                .e);
        double gdiff = 0, gdiff_mem = 0;
        int gn = 0, gn_mem = 0;
        for (size_t i = 0; i < gt.size(); ++i)
          for (size_t j = i + 1; j < gt.size(); ++j) {
            if (gt[i].first == gt[j].first) continue;
            const double c = dot(gt[i].second, gt[j].second);
            gdiff += c; ++gn;
            if (in_mem.count(gt[i].first) && in_mem.count(gt[j].first)) {
              gdiff_mem += c; ++gn_mem;
            }
          }
        std::fprintf(stderr,
                     "[cluster]   gt-render diff %.3f  mem-id subset %.3f  "
                     "ids in mem %zu\n",
                     gn ? gdiff / gn : 0, gn_mem ? gdiff_mem / gn_mem : 0,
                     in_mem.size());
      }
    }
    umem = build_unified_memory(source_protos, pooled, clusters, hard_feats,
                                cfg.tau, cfg.gamma);
    for (size_t p = 0; p < pooled.size(); ++p) {
      const int label = clusters.labels[p];
      const int proto =
          label >= 0 ? umem.find(Partition::Centroid, label)
                     : umem.find(Partition::Outlier, static_cast<int>(p));
      auto& slots = pos_slot[owner[p].first];
      if (static_cast<int>(slots.size()) <= owner[p].second)
        slots.resize(owner[p].second + 1, -1);
      slots[owner[p].second] = proto;
    }
    rep.n_clusters = clusters.n_clusters;
    rep.n_outliers = umem.count(Partition::Outlier);
    rep.n_hard = umem.count(Partition::Hard);

    // ---- batches ----
    auto brng = substream(cfg.seed, "batching", epoch);
    std::vector<int> src_order(n_src), tgt_order(n_tgt);
    std::iota(src_order.begin(), src_order.end(), 0);
    std::iota(tgt_order.begin(), tgt_order.end(), 0);
    std::shuffle(src_order.begin(), src_order.end(), brng);
    std::shuffle(tgt_order.begin(), tgt_order.end(), brng);
    const int n_batches =
        std::max((n_src + half - 1) / half, (n_tgt + half - 1) / half);

    LossMeter m_det_src, m_det_tgt, m_reid, m_img, m_ins, m_cons;
    const bool dam_active =
        cfg.enable_dam && (epoch >= cfg.alpha || cfg.dam_during_warmup);
    const double bs = static_cast<double>(cfg.batch_size);

    auto run_dam = [&](const Scene& scene, const std::vector<Proposal>& props,
                       const std::vector<TrunkCache>& patches) {
      std::vector<const TrunkCache*> k1, k2;
      for (const Proposal& p : props) k1.push_back(&p.trunk);
      for (int idx : select_qualified(props, 0.5, cfg.theta_nms))
        k2.push_back(&props[idx].trunk);
      const double w = cfg.lambda_t;
      const ImageAlignResult img =
          image_align_loss(model, patches, scene.domain, cfg.mu_grl, w);
      const double ins = instance_align_loss(model, k1, k2, scene.domain, lam,
                                             cfg.mu_grl, w);
      const double cons =
          consistency_reg(model, patches, k1, k2, cfg.lambda_c * w);
      m_img.add(img.loss);
      m_ins.add(ins);
      m_cons.add(cons);
    };

    for (int b = 0; b < n_batches; ++b) {
      // source half
      for (int j = 0; j < half; ++j) {
        const Scene& scene =
            snap.source_train[src_order[(b * half + j) % n_src]];
        auto prng = substream(cfg.seed, "proposals-train",
                              epoch_scene_key(epoch, scene.id));
        std::vector<Box> gt;
        for (const Instance& inst : scene.instances) gt.push_back(inst.box);
        std::vector<Proposal> props = propose(scene, snap.source_model, gt,
                                              cfg.proposals, prng, render_seed);
        score_proposals(model, props);

        DetectionBatch db{scene.id, 0, std::move(props), gt};
        m_det_src.add(detection_loss(model, db, cfg.det_weight / bs));

        const double n_inst = static_cast<double>(scene.instances.size());
        double reid_loss = 0;
        for (const Instance& inst : scene.instances) {
          const Vec raw =
              render_roi_feature(scene, snap.source_model, inst.box,
                                 cfg.proposals.render_noise, render_seed);
          ReidCache rc = reid_forward(model, raw);
          const int pos = umem.find(Partition::SourceClass, inst.identity);
          const MemoryLoss ml = memory_loss(rc.e, pos, umem);
          reid_backward(model, rc, scaled(ml.dx, 1.0 / (bs * n_inst)));
          momentum_update(umem, pos, rc.e, cfg.gamma);
          reid_loss += ml.loss / n_inst;
        }
        if (n_inst > 0) m_reid.add(reid_loss);

        if (dam_active) {
          std::vector<TrunkCache> patches;
          for (Vec& raw : render_patch_features(scene, snap.source_model,
                                                cfg.patch_grid,
                                                cfg.proposals.render_noise,
                                                render_seed))
            patches.push_back(trunk_forward(model.trunk, std::move(raw)));
          run_dam(scene, db.proposals, patches);
        }
      }

      // target half
      for (int j = 0; j < half; ++j) {
        const Scene& scene =
            snap.target_train[tgt_order[(b * half + j) % n_tgt]];
        const bool need_props =
            dam_active || (engage && cfg.enable_dtd);
        std::vector<Proposal> props;
        if (need_props) {
          auto prng = substream(cfg.seed, "proposals-train",
                                epoch_scene_key(epoch, scene.id));
          // Seed from the pseudo-box memory once it exists. Seeding from
          // annotations here would label every not-yet-qualified person as
          // background and collapse the detector on the target domain.
          std::vector<Box> seeds;
          const auto mit = tmem.per_image.find(scene.id);
          if (engage && mit != tmem.per_image.end() &&
              !mit->second.boxes.empty()) {
            seeds = mit->second.boxes;
          } else {
            for (const Instance& inst : scene.instances)
              seeds.push_back(inst.box);
          }
          props = propose(scene, snap.target_model, seeds, cfg.proposals, prng,
                          render_seed);
          score_proposals(model, props);
        }

        if (engage && cfg.enable_dtd) {
          const auto it = tmem.per_image.find(scene.id);
          if (it != tmem.per_image.end() && !it->second.boxes.empty()) {
            DetectionBatch db{scene.id, 1, props, it->second.boxes};
            m_det_tgt.add(detection_loss(model, db, cfg.det_weight / bs));
          }
        }

        if (epoch >= cfg.alpha && cfg.enable_dc) {
          const auto it = tmem.per_image.find(scene.id);
          if (it != tmem.per_image.end() && !it->second.boxes.empty()) {
            const ImageMemory& mem = it->second;
            const std::vector<int>& slots = pos_slot[scene.id];
            const double n_slots = static_cast<double>(mem.boxes.size());
            double reid_loss = 0;
            int used = 0;
            for (size_t k = 0; k < mem.boxes.size(); ++k) {
              if (k >= slots.size() || slots[k] < 0) continue;
              const Vec raw =
                  render_roi_feature(scene, snap.target_model, mem.boxes[k],
                                     cfg.proposals.render_noise, render_seed);
              ReidCache rc = reid_forward(model, raw);
              const MemoryLoss ml = memory_loss(rc.e, slots[k], umem);
              reid_backward(model, rc, scaled(ml.dx, 1.0 / (bs * n_slots)));
              momentum_update(umem, slots[k], rc.e, cfg.gamma);
              reid_loss += ml.loss / n_slots;
              ++used;
            }
            if (used > 0) m_reid.add(reid_loss);
          }
        }

        if (dam_active) {
          std::vector<TrunkCache> patches;
          for (Vec& raw : render_patch_features(scene, snap.target_model,
                                                cfg.patch_grid,
                                                cfg.proposals.render_noise,
                                                render_seed))
            patches.push_back(trunk_forward(model.trunk, std::move(raw)));
          run_dam(scene, props, patches);
        }
      }

      const double lr = scheduled_lr(cfg.sgd, epoch,
                                     static_cast<double>(b) / n_batches);
      model.step(cfg.sgd, lr);
    }

    // persist momentum-updated source prototypes across epochs
    for (auto& [id, v] : source_protos) {
      const int idx = umem.find(Partition::SourceClass, id);
      if (idx >= 0) v = umem.protos[idx].z;
    }

    rep.l_det_src = m_det_src.mean();
    rep.l_det_tgt = m_det_tgt.mean();
    rep.l_reid = m_reid.mean();
    rep.l_img = m_img.mean();
    rep.l_ins = m_ins.mean();
    rep.l_cons = m_cons.mean();
    check_finite(rep.l_det_src, "l_det_src");
    check_finite(rep.l_det_tgt, "l_det_tgt");
    check_finite(rep.l_reid, "l_reid");
    check_finite(rep.l_img, "l_img");
    check_finite(rep.l_ins, "l_ins");
    check_finite(rep.l_cons, "l_cons");

    // ---- evaluation ----
    const bool eval_now =
        (epoch + 1) % cfg.eval_interval == 0 || epoch == cfg.epochs - 1;
    if (eval_now) {
      const uint64_t eval_seed = splitmix64(cfg.seed ^ fnv1a("eval") ^
                                            static_cast<uint64_t>(epoch));
      GalleryCfg gc;
      gc.proposals = cfg.proposals;
      gc.theta_nms = cfg.theta_nms;
      gc.conf_thresh = cfg.gallery_conf_thresh;
      const std::vector<GalleryDetection> gallery =
          build_gallery(model, snap.target_test, snap.target_model, gc,
                        eval_seed);
      const std::vector<Query> queries =
          build_queries(model, snap, cfg.proposals.render_noise, eval_seed);
      const SearchMetrics sm =
          search_eval(queries, gallery, snap.target_test, 0.5);
      rep.map = sm.map;
      rep.top1 = sm.top1;

      std::vector<std::vector<Box>> gt_per_scene;
      std::vector<std::vector<ScoredBox>> det_per_scene;
      for (const Scene& s : snap.target_test) {
        std::vector<Box> gt;
        for (const Instance& inst : s.instances) gt.push_back(inst.box);
        gt_per_scene.push_back(std::move(gt));
        std::vector<ScoredBox> dets;
        for (const GalleryDetection& d : gallery)
          if (d.scene_id == s.id)
            dets.push_back(ScoredBox{d.box, d.confidence});
        det_per_scene.push_back(std::move(dets));
      }
      const DetectionMetrics dm = detection_eval(gt_per_scene, det_per_scene, 0.5);
      rep.recall = dm.recall;
      rep.ap = dm.ap;
    }

    if (dump.is_open()) {
      nlohmann::json j{{"epoch", epoch},
                       {"n_source_classes", umem.count(Partition::SourceClass)},
                       {"n_clusters", rep.n_clusters},
                       {"n_outliers", rep.n_outliers},
                       {"n_hard", rep.n_hard},
                       {"n_memory_features", pooled.size()}};
      dump << j.dump() << "\n";
    }

    result.reports.push_back(rep);
  }
  return result;
}

std::string metrics_csv_string(const std::vector<EpochReport>& reports) {
  std::ostringstream out;
  out << "epoch,l_det_src,l_det_tgt,l_reid,l_img,l_ins,l_cons,"
         "n_clusters,n_outliers,n_hard,map,top1,recall,ap\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  for (const EpochReport& r : reports) {
    out << r.epoch << ',' << fmt(r.l_det_src) << ',' << fmt(r.l_det_tgt) << ','
        << fmt(r.l_reid) << ',' << fmt(r.l_img) << ',' << fmt(r.l_ins) << ','
        << fmt(r.l_cons) << ',' << r.n_clusters << ',' << r.n_outliers << ','
        << r.n_hard << ',' << fmt(r.map) << ',' << fmt(r.top1) << ','
        << fmt(r.recall) << ',' << fmt(r.ap) << '\n';
  }
  return out.str();
}

void write_metrics_csv(const std::vector<EpochReport>& reports,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("metrics: cannot write " + path);
  out << metrics_csv_string(reports);
}

TrainConfig apply_cell(TrainConfig base, const std::string& cell) {
  base.enable_dam = base.enable_dc = base.enable_hm = base.enable_dtd = false;
  base.static_memory = false;
  base.task_sensitive = true;
  base.gt_boxes = false;

  std::istringstream in(cell);
  std::string tok;
  while (std::getline(in, tok, '+')) {
    if (tok == "baseline" || tok.empty()) continue;
    else if (tok == "dam") base.enable_dam = true;
    else if (tok == "dc") base.enable_dc = true;
    else if (tok == "hm") base.enable_hm = true;
    else if (tok == "dtd") base.enable_dtd = true;
    else if (tok == "full")
      base.enable_dam = base.enable_dc = base.enable_hm = base.enable_dtd = true;
    else if (tok == "static") base.static_memory = true;
    else if (tok == "normal") base.task_sensitive = false;
    else if (tok == "gt") base.gt_boxes = true;
    else if (tok.rfind("alpha=", 0) == 0)
      base.alpha = std::stoi(tok.substr(6));
    else if (tok.rfind("eps_p=", 0) == 0)
      base.eps_p = std::stod(tok.substr(6));
    else
      throw ConfigError("ablate: unknown grid token '" + tok + "'");
  }
  base.validate();
  return base;
}

std::vector<CellMetrics> ablate(const DatasetSnapshot& snap,
                                const TrainConfig& base,
                                const std::vector<std::string>& cells,
                                const std::vector<uint64_t>& seeds) {
  if (cells.empty()) throw ConfigError("ablate: empty grid");
  if (seeds.empty()) throw ConfigError("ablate: empty seed list");
  std::vector<CellMetrics> rows;
  for (const std::string& cell : cells) {
    CellMetrics cm;
    cm.cell = cell;
    for (uint64_t seed : seeds) {
      TrainConfig cfg = apply_cell(base, cell);
      cfg.seed = seed;
      const TrainResult res = run_training(snap, cfg);
      const EpochReport& fin = res.final_report();
      cm.map.push_back(fin.map);
      cm.top1.push_back(fin.top1);
      cm.recall.push_back(fin.recall);
      cm.ap.push_back(fin.ap);
      double qsum = 0;
      int qn = 0;
      for (const EpochReport& r : res.reports)
        if (r.epoch >= cfg.alpha && r.n_qualified > 0) {
          qsum += r.n_qualified;
          ++qn;
        }
      cm.qualified.push_back(qn == 0 ? 0.0 : qsum / qn);
    }
    rows.push_back(std::move(cm));
  }
  return rows;
}

static double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0;
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}
static double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

std::string ablation_csv_string(const std::vector<CellMetrics>& rows) {
  std::ostringstream out;
  out << "cell,n_seeds,map_mean,map_std,top1_mean,top1_std,recall_mean,"
         "ap_mean,qualified_mean\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  for (const CellMetrics& r : rows) {
    out << r.cell << ',' << r.map.size() << ',' << fmt(mean_of(r.map)) << ','
        << fmt(std_of(r.map)) << ',' << fmt(mean_of(r.top1)) << ','
        << fmt(std_of(r.top1)) << ',' << fmt(mean_of(r.recall)) << ','
        << fmt(mean_of(r.ap)) << ',' << fmt(mean_of(r.qualified)) << '\n';
  }
  return out.str();
}

}  // namespace persearch
