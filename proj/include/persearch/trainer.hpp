#pragma once

#include <string>
#include <vector>

#include "persearch/config.hpp"
#include "persearch/searcheval.hpp"

namespace persearch {

struct EpochReport {
  int epoch = 0;
  double l_det_src = 0, l_det_tgt = 0, l_reid = 0;
  double l_img = 0, l_ins = 0, l_cons = 0;
  int n_clusters = 0, n_outliers = 0, n_hard = 0;
  // -1 marks epochs where evaluation was skipped
  double map = -1, top1 = -1, recall = -1, ap = -1;
  int n_qualified = 0;  // qualified proposals across target images
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochReport> reports;

  const EpochReport& final_report() const { return reports.back(); }
};

// The asynchronized schedule: source-only warmup for `alpha` epochs, then a
// per-epoch memory refresh (qualify -> EMA-match -> promote -> mine ->
// cluster -> rebuild) before batches mixing source and target scenes.
TrainResult run_training(const DatasetSnapshot& snap, const TrainConfig& cfg);

// Fixed 14-column CSV, one row per epoch.
void write_metrics_csv(const std::vector<EpochReport>& reports,
                       const std::string& path);
std::string metrics_csv_string(const std::vector<EpochReport>& reports);

// Named flag combinations for the ablation grid. A cell is tokens joined
// by '+': dam, dc, hm, dtd, full, baseline, static, normal, gt, and
// key=value overrides for alpha / eps_p.
TrainConfig apply_cell(TrainConfig base, const std::string& cell);

struct CellMetrics {
  std::string cell;
  std::vector<double> map, top1, recall, ap;  // one entry per seed
  std::vector<double> qualified;  // mean qualified proposals per refresh epoch
};

// One training run per (cell, seed), shared snapshot.
std::vector<CellMetrics> ablate(const DatasetSnapshot& snap,
                                const TrainConfig& base,
                                const std::vector<std::string>& cells,
                                const std::vector<uint64_t>& seeds);

std::string ablation_csv_string(const std::vector<CellMetrics>& rows);

}  // namespace persearch
