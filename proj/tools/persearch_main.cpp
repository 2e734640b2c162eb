#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "persearch/rng.hpp"
#include "persearch/trainer.hpp"

namespace fs = std::filesystem;
using namespace persearch;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(fnv1a(buf.str())));
  return hex;
}

AppConfig load_config(const std::string& path) {
  KvConfig kv;
  if (!path.empty()) kv = KvConfig::parse_file(path);
  kv.apply_env();
  return app_config_from_kv(kv);
}

uint64_t resolve_seed(bool seed_given, uint64_t seed_flag, uint64_t cfg_seed) {
  if (seed_given) return seed_flag;
  if (cfg_seed != 0) return cfg_seed;
  std::random_device rd;
  return (static_cast<uint64_t>(rd()) << 32) | rd();
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::string& config_path, const AppConfig& cfg,
                    uint64_t seed, const std::string& snapshot_hash,
                    const std::vector<std::string>& artifacts) {
  json j{{"command", command},
         {"config_path", config_path},
         {"world_config", json::parse(world_config_to_json(cfg.world))},
         {"train_config", json::parse(train_config_to_json(cfg.train))},
         {"seed", seed},
         {"snapshot_hash", snapshot_hash},
         {"artifacts", artifacts}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump() << "\n";
}

void append_wallclock(const std::string& path, double seconds) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  out << json{{"wall_clock_seconds", seconds}}.dump() << "\n";
}

std::vector<uint64_t> parse_seed_list(const std::string& text) {
  std::vector<uint64_t> seeds;
  std::istringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) seeds.push_back(std::stoull(tok));
  return seeds;
}

std::vector<std::string> parse_cell_list(const std::string& text) {
  std::vector<std::string> cells;
  std::istringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) cells.push_back(tok);
  return cells;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic cross-domain person search engine"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_path;
  uint64_t seed_flag = 0;
  bool seed_given = false;
  std::string grid_text = "baseline,full";
  std::string seeds_text = "1,2,3";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat key=value config file");
    sub->add_option("--seed", seed_flag, "root seed")
        ->each([&](const std::string&) { seed_given = true; });
  };

  CLI::App* generate = app.add_subcommand("generate", "write a dataset snapshot");
  add_common(generate);
  generate->add_option("--out", out_path, "snapshot output path")->required();

  CLI::App* train = app.add_subcommand("train", "run the training schedule");
  add_common(train);
  train->add_option("--data", data_path, "snapshot path")->required();
  train->add_option("--out", out_path, "run output directory")->required();

  CLI::App* ablate_cmd = app.add_subcommand("ablate", "run an ablation grid");
  add_common(ablate_cmd);
  ablate_cmd->add_option("--data", data_path, "snapshot path")->required();
  ablate_cmd->add_option("--out", out_path, "output directory")->required();
  ablate_cmd->add_option("--grid", grid_text,
                         "comma-separated cells, e.g. baseline,dam,full");
  ablate_cmd->add_option("--seeds", seeds_text, "comma-separated seed list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : kExitUsage;
  }

  try {
    const auto t0 = std::chrono::steady_clock::now();
    AppConfig cfg = load_config(config_path);
    const uint64_t seed = resolve_seed(seed_given, seed_flag, cfg.train.seed);
    cfg.train.seed = seed;

    if (generate->parsed()) {
      const DatasetSnapshot snap = generate_dataset(cfg.world, seed);
      save_snapshot(snap, out_path);
      write_manifest(out_path + ".manifest.jsonl", "generate", config_path,
                     cfg, seed, file_hash_hex(out_path), {out_path});
      std::printf("scenes: %zu source / %zu target / %zu test\n",
                  snap.source_train.size(), snap.target_train.size(),
                  snap.target_test.size());
      std::printf("identities: %d source / %d target, queries: %zu\n",
                  cfg.world.n_source_ids, cfg.world.n_target_ids,
                  snap.queries.size());
      const auto dt = std::chrono::steady_clock::now() - t0;
      append_wallclock(out_path + ".manifest.jsonl",
                       std::chrono::duration<double>(dt).count());
      return 0;
    }

    const DatasetSnapshot snap = load_snapshot(data_path);
    const std::string snap_hash = file_hash_hex(data_path);
    fs::create_directories(out_path);
    const std::string manifest = out_path + "/manifest.jsonl";

    if (train->parsed()) {
      write_manifest(manifest, "train", config_path, cfg, seed, snap_hash,
                     {out_path + "/metrics.csv", out_path + "/checkpoint.jsonl"});
      const TrainResult res = run_training(snap, cfg.train);
      write_metrics_csv(res.reports, out_path + "/metrics.csv");
      save_checkpoint(res.params, out_path + "/checkpoint.jsonl");
      const EpochReport& fin = res.final_report();
      std::printf("final epoch %d: mAP %.4f top1 %.4f recall %.4f AP %.4f\n",
                  fin.epoch, fin.map, fin.top1, fin.recall, fin.ap);
    } else {
      const std::vector<std::string> cells = parse_cell_list(grid_text);
      const std::vector<uint64_t> seeds = parse_seed_list(seeds_text);
      write_manifest(manifest, "ablate", config_path, cfg, seed, snap_hash,
                     {out_path + "/ablation.csv"});
      const auto rows = ablate(snap, cfg.train, cells, seeds);
      const std::string csv = ablation_csv_string(rows);
      std::ofstream out(out_path + "/ablation.csv", std::ios::binary);
      out << csv;
      std::fputs(csv.c_str(), stdout);
    }
    const auto dt = std::chrono::steady_clock::now() - t0;
    append_wallclock(manifest, std::chrono::duration<double>(dt).count());
    return 0;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return kExitNumerical;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
}
