#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "persearch/trainer.hpp"

using namespace persearch;

namespace {

WorldConfig tiny_world() {
  WorldConfig w;
  w.n_source_scenes = 10;
  w.n_target_scenes = 8;
  w.n_test_scenes = 8;
  w.n_queries = 4;
  w.n_source_ids = 5;
  w.n_target_ids = 4;
  return w;
}

TrainConfig tiny_train(uint64_t seed) {
  TrainConfig t;
  t.epochs = 6;
  t.alpha = 3;
  t.eval_interval = 3;
  t.eps_p = 0.7;
  t.eps_h = 0.5;
  t.d_emb = 8;
  t.proposals.jitter_copies = 2;
  t.proposals.n_random = 4;
  t.seed = seed;
  return t;
}

const DatasetSnapshot& tiny_snapshot() {
  static const DatasetSnapshot snap = generate_dataset(tiny_world(), 2024);
  return snap;
}

int total_target_instances(const DatasetSnapshot& snap) {
  int n = 0;
  for (const Scene& s : snap.target_train) n += int(s.instances.size());
  return n;
}

}  // namespace

TEST_CASE("warmup epochs touch no target machinery") {
  const TrainConfig cfg = tiny_train(1);
  const TrainResult res = run_training(tiny_snapshot(), cfg);
  REQUIRE(int(res.reports.size()) == cfg.epochs);
  for (const EpochReport& r : res.reports) {
    CHECK(r.epoch >= 0);
    if (r.epoch < cfg.alpha) {
      CHECK(r.l_det_tgt == 0.0);
      CHECK(r.n_clusters == 0);
      CHECK(r.n_outliers == 0);
      CHECK(r.n_hard == 0);
      CHECK(r.n_qualified == 0);
    }
    CHECK(r.l_det_src > 0.0);
    if ((r.epoch + 1) % cfg.eval_interval == 0 || r.epoch == cfg.epochs - 1) {
      CHECK(r.map >= 0.0);
      CHECK(r.map <= 1.0);
      CHECK(r.top1 >= 0.0);
      CHECK(r.recall >= 0.0);
      CHECK(r.ap >= 0.0);
    } else {
      CHECK(r.map == -1.0);
      CHECK(r.top1 == -1.0);
    }
  }
}

TEST_CASE("training is bit-reproducible per seed") {
  const TrainConfig cfg = tiny_train(7);
  const TrainResult a = run_training(tiny_snapshot(), cfg);
  const TrainResult b = run_training(tiny_snapshot(), cfg);
  CHECK(metrics_csv_string(a.reports) == metrics_csv_string(b.reports));
  TrainConfig other = cfg;
  other.seed = 8;
  const TrainResult c = run_training(tiny_snapshot(), other);
  CHECK(metrics_csv_string(a.reports) != metrics_csv_string(c.reports));
}

TEST_CASE("zero alignment weight leaves the task losses untouched") {
  TrainConfig with_dam = tiny_train(3);
  with_dam.lambda_t = 0.0;
  with_dam.enable_dam = true;
  TrainConfig without = with_dam;
  without.enable_dam = false;
  const TrainResult a = run_training(tiny_snapshot(), with_dam);
  const TrainResult b = run_training(tiny_snapshot(), without);
  REQUIRE(a.reports.size() == b.reports.size());
  for (size_t i = 0; i < a.reports.size(); ++i) {
    const EpochReport& ra = a.reports[i];
    const EpochReport& rb = b.reports[i];
    CHECK(ra.l_det_src == rb.l_det_src);
    CHECK(ra.l_det_tgt == rb.l_det_tgt);
    CHECK(ra.l_reid == rb.l_reid);
    CHECK(ra.n_clusters == rb.n_clusters);
    CHECK(ra.n_outliers == rb.n_outliers);
    CHECK(ra.n_hard == rb.n_hard);
    CHECK(ra.map == rb.map);
    CHECK(ra.top1 == rb.top1);
    CHECK(ra.recall == rb.recall);
    CHECK(ra.ap == rb.ap);
    // the alignment losses are still measured on the dam run
    CHECK(rb.l_img == 0.0);
  }
}

TEST_CASE("source-only baseline reports no adaptation losses") {
  TrainConfig cfg = tiny_train(5);
  cfg.enable_dam = cfg.enable_dc = cfg.enable_hm = cfg.enable_dtd = false;
  const TrainResult res = run_training(tiny_snapshot(), cfg);
  for (const EpochReport& r : res.reports) {
    CHECK(r.l_det_tgt == 0.0);
    CHECK(r.l_img == 0.0);
    CHECK(r.l_ins == 0.0);
    CHECK(r.l_cons == 0.0);
    CHECK(r.n_clusters == 0);
    CHECK(r.n_hard == 0);
    CHECK(r.n_qualified == 0);
  }
}

TEST_CASE("oracle boxes qualify every target instance at each refresh") {
  TrainConfig cfg = tiny_train(9);
  cfg.gt_boxes = true;
  const TrainResult res = run_training(tiny_snapshot(), cfg);
  const int expect = total_target_instances(tiny_snapshot());
  for (const EpochReport& r : res.reports)
    if (r.epoch >= cfg.alpha) CHECK(r.n_qualified == expect);
}

TEST_CASE("frozen memory refreshes exactly once") {
  TrainConfig cfg = tiny_train(11);
  cfg.gt_boxes = true;
  cfg.static_memory = true;
  const TrainResult res = run_training(tiny_snapshot(), cfg);
  const int expect = total_target_instances(tiny_snapshot());
  for (const EpochReport& r : res.reports) {
    if (r.epoch == cfg.alpha) CHECK(r.n_qualified == expect);
    if (r.epoch > cfg.alpha) CHECK(r.n_qualified == 0);
  }
}

TEST_CASE("a snapshot without either domain is rejected") {
  DatasetSnapshot broken = tiny_snapshot();
  broken.source_train.clear();
  CHECK_THROWS_AS(run_training(broken, tiny_train(1)), ConfigError);
  broken = tiny_snapshot();
  broken.target_train.clear();
  CHECK_THROWS_AS(run_training(broken, tiny_train(1)), ConfigError);
}

TEST_CASE("invalid schedules are rejected before any work") {
  TrainConfig cfg = tiny_train(1);
  cfg.alpha = cfg.epochs + 1;
  CHECK_THROWS_AS(run_training(tiny_snapshot(), cfg), ConfigError);
  cfg = tiny_train(1);
  cfg.eps_h = 0.97;  // above eps_p
  CHECK_THROWS_AS(run_training(tiny_snapshot(), cfg), ConfigError);
  cfg = tiny_train(1);
  cfg.batch_size = 3;
  CHECK_THROWS_AS(run_training(tiny_snapshot(), cfg), ConfigError);
}

TEST_CASE("metrics CSV has the fixed header and one row per epoch") {
  const TrainConfig cfg = tiny_train(13);
  const TrainResult res = run_training(tiny_snapshot(), cfg);
  const std::string csv = metrics_csv_string(res.reports);
  CHECK(csv.rfind("epoch,l_det_src,l_det_tgt,l_reid,l_img,l_ins,l_cons,"
                  "n_clusters,n_outliers,n_hard,map,top1,recall,ap\n",
                  0) == 0);
  const size_t rows = std::count(csv.begin(), csv.end(), '\n');
  CHECK(rows == size_t(cfg.epochs) + 1);
}

TEST_CASE("grid cells toggle the right switches") {
  const TrainConfig base = tiny_train(1);
  TrainConfig c = apply_cell(base, "baseline");
  CHECK_FALSE(c.enable_dam);
  CHECK_FALSE(c.enable_dc);
  CHECK_FALSE(c.enable_hm);
  CHECK_FALSE(c.enable_dtd);
  c = apply_cell(base, "dam");
  CHECK(c.enable_dam);
  CHECK_FALSE(c.enable_dc);
  c = apply_cell(base, "full");
  CHECK(c.enable_dam);
  CHECK(c.enable_dc);
  CHECK(c.enable_hm);
  CHECK(c.enable_dtd);
  c = apply_cell(base, "full+static");
  CHECK(c.static_memory);
  c = apply_cell(base, "full+normal");
  CHECK_FALSE(c.task_sensitive);
  c = apply_cell(base, "full+gt+alpha=2+eps_p=0.9");
  CHECK(c.gt_boxes);
  CHECK(c.alpha == 2);
  CHECK(c.eps_p == 0.9);
  CHECK_THROWS_AS(apply_cell(base, "dam+bogus"), ConfigError);
}

TEST_CASE("ablation grid runs per cell and seed") {
  TrainConfig base = tiny_train(0);
  base.epochs = 4;
  base.alpha = 2;
  base.eval_interval = 4;
  const auto rows = ablate(tiny_snapshot(), base, {"baseline", "full"}, {1, 2});
  REQUIRE(rows.size() == 2);
  for (const CellMetrics& cm : rows) {
    CHECK(cm.map.size() == 2);
    CHECK(cm.qualified.size() == 2);
    for (double v : cm.map) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK(rows[0].cell == "baseline");
  CHECK(rows[0].qualified == std::vector<double>{0.0, 0.0});
  const std::string csv = ablation_csv_string(rows);
  CHECK(csv.rfind("cell,n_seeds,map_mean,map_std,top1_mean,top1_std,"
                  "recall_mean,ap_mean,qualified_mean\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK_THROWS_AS(ablate(tiny_snapshot(), base, {}, {1}), ConfigError);
  CHECK_THROWS_AS(ablate(tiny_snapshot(), base, {"full"}, {}), ConfigError);
}
