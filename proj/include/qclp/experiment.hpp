#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "qclp/embedding.hpp"
#include "qclp/errors.hpp"
#include "qclp/metrics.hpp"
#include "qclp/predictors.hpp"
#include "qclp/rng.hpp"
#include "qclp/sha256.hpp"
#include "qclp/temporal_graph.hpp"

namespace qclp {

inline constexpr const char* kToolVersion = "qclp 0.1.0";

// One (arch, feature, seed) evaluation. A failed run (e.g. divergence) is
// recorded, not fatal: the grid keeps going and the cell aggregates over the
// seeds that finished.
struct CellMetrics {
  std::string arch;
  std::string feature_source;
  std::uint64_t seed = 0;
  double auroc = 0.0;
  double ap = 0.0;
  std::map<std::string, SliceMetrics> slices;
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};

struct EvalReport {
  std::vector<CellMetrics> per_seed;
  MetricSummary auroc;
  MetricSummary ap;
  std::size_t failed = 0;
};

inline CellMetrics run_cell(const ModelConfig& cfg, const Eigen::MatrixXd& features,
                            const EdgeSplit& split, const GraphContext& ctx,
                            const std::string& feature_source) {
  CellMetrics cell;
  cell.arch = arch_name(cfg.arch);
  cell.feature_source = feature_source;
  cell.seed = cfg.seed;
  try {
    const auto trained = train_model(cfg, features, split, ctx);
    const auto h = encode(trained.params, features, ctx, {}).h;
    const auto test_scored = scored(trained.params, ctx, h, split.test_pos, split.test_neg);
    cell.auroc = auroc(test_scored);
    cell.ap = average_precision(test_scored);

    const auto isolated = isolated_nodes(split.train_pos, ctx.n);
    if (!isolated.empty()) {
      const std::unordered_set<int> node_set(isolated.begin(), isolated.end());
      try {
        cell.slices["isolated"] = slice_eval(test_scored, node_set);
      } catch (const ValidationError&) {
        // Slice empty or single-class on this split; report only global metrics.
      }
    }
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  return cell;
}

inline EvalReport evaluate_model(ModelConfig cfg, const Eigen::MatrixXd& features,
                                 const EdgeSplit& split, const GraphContext& ctx,
                                 std::span<const std::uint64_t> seeds,
                                 const std::string& feature_source) {
  if (seeds.empty()) throw ValidationError("evaluate_model: seed list must be non-empty");
  EvalReport report;
  std::vector<double> aurocs, aps;
  for (std::uint64_t seed : seeds) {
    cfg.seed = seed;
    auto cell = run_cell(cfg, features, split, ctx, feature_source);
    if (cell.ok()) {
      aurocs.push_back(cell.auroc);
      aps.push_back(cell.ap);
    } else {
      ++report.failed;
    }
    report.per_seed.push_back(std::move(cell));
  }
  if (!aurocs.empty()) {
    report.auroc = aggregate(aurocs);
    report.ap = aggregate(aps);
  }
  return report;
}

inline nlohmann::json cell_to_json(const CellMetrics& cell) {
  nlohmann::json j;
  j["arch"] = cell.arch;
  j["feature_source"] = cell.feature_source;
  j["seed"] = cell.seed;
  if (!cell.ok()) {
    j["error"] = cell.error;
    return j;
  }
  j["auroc"] = cell.auroc;
  j["ap"] = cell.ap;
  nlohmann::json slices = nlohmann::json::object();
  for (const auto& [name, m] : cell.slices) {
    slices[name] = {{"auroc", m.auroc},
                    {"ap", m.ap},
                    {"positives", m.positives},
                    {"negatives", m.negatives},
                    {"negatives_slice_restricted", true}};
  }
  j["slices"] = std::move(slices);
  return j;
}

inline CellMetrics cell_from_json(const nlohmann::json& j) {
  CellMetrics cell;
  cell.arch = j.at("arch").get<std::string>();
  cell.feature_source = j.at("feature_source").get<std::string>();
  cell.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("error")) {
    cell.error = j.at("error").get<std::string>();
    return cell;
  }
  cell.auroc = j.at("auroc").get<double>();
  cell.ap = j.at("ap").get<double>();
  for (const auto& [name, m] : j.at("slices").items()) {
    SliceMetrics s;
    s.auroc = m.at("auroc").get<double>();
    s.ap = m.at("ap").get<double>();
    s.positives = m.at("positives").get<std::size_t>();
    s.negatives = m.at("negatives").get<std::size_t>();
    cell.slices[name] = s;
  }
  return cell;
}

// ---------------------------------------------------------------------------
// Experiment grid: archs x feature files x seeds.

struct ExperimentPlan {
  std::vector<std::string> feature_files;  // embedding TSVs; display name = source
  std::string split_dir;
  std::vector<Arch> archs;
  std::vector<std::uint64_t> seeds;
  ModelConfig base;  // arch/seed overwritten per cell
  int threads = 1;
};

inline std::string plan_config_hash(const ExperimentPlan& plan) {
  // Hash the experiment-defining content (file bytes, not paths) so a rerun
  // with identical inputs maps to the same cache entries.
  nlohmann::json j;
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : plan.feature_files) feats.push_back(sha256_file(f));
  j["features"] = std::move(feats);
  nlohmann::json split_files = nlohmann::json::array();
  for (const char* name :
       {"train.tsv", "val.tsv", "test.tsv", "val_neg.tsv", "test_neg.tsv", "split_meta.json"}) {
    split_files.push_back(sha256_file((std::filesystem::path(plan.split_dir) / name).string()));
  }
  j["split"] = std::move(split_files);
  nlohmann::json archs = nlohmann::json::array();
  for (Arch a : plan.archs) archs.push_back(arch_name(a));
  j["archs"] = std::move(archs);
  j["seeds"] = plan.seeds;
  j["model"] = {{"layers", plan.base.layers},     {"hidden", plan.base.hidden},
                {"dropout", plan.base.dropout},   {"lr", plan.base.lr},
                {"epochs", plan.base.epochs},     {"patience", plan.base.patience}};
  return sha256_hex(j.dump());
}

inline std::string cell_file_name(const std::string& arch, const std::string& source,
                                  std::uint64_t seed) {
  return arch + "_" + source + "_seed" + std::to_string(seed) + ".json";
}

struct GridResult {
  // keyed by (feature source, arch)
  std::map<std::string, std::map<std::string, EvalReport>> table;
  std::size_t cells_reused = 0;
  std::size_t cells_computed = 0;
};

inline void write_report_files(const std::string& out_dir, const GridResult& grid,
                               std::vector<std::string> sources, std::vector<Arch> archs,
                               std::size_t seed_count) {
  namespace fs = std::filesystem;
  // Canonical table order — sources alphabetical, models in declaration order
  // — so the same grid renders to the same bytes no matter how the caller
  // ordered its arguments or discovered the cells.
  std::sort(sources.begin(), sources.end());
  std::sort(archs.begin(), archs.end(),
            [](Arch a, Arch b) { return static_cast<int>(a) < static_cast<int>(b); });
  std::ofstream md(fs::path(out_dir) / "report.md");
  std::ofstream csv(fs::path(out_dir) / "report.csv");
  if (!md || !csv) throw std::runtime_error("cannot write report files in " + out_dir);

  md << "# Link prediction report\n\n";
  md << "Test AUROC / AP, percent, mean ± sample std over " << seed_count
     << " seed(s). Slice metrics (isolated nodes) are reported separately in the"
        " per-run metrics files, never mixed into these cells.\n\n";
  md << "| feature source |";
  csv << "feature_source";
  for (Arch a : archs) {
    md << ' ' << arch_name(a) << " AUROC | " << arch_name(a) << " AP |";
    csv << ',' << arch_name(a) << "_auroc," << arch_name(a) << "_ap";
  }
  md << "\n|---|";
  csv << '\n';
  for (std::size_t i = 0; i < archs.size(); ++i) md << "---|---|";
  md << '\n';

  for (const auto& source : sources) {
    md << "| " << source << " |";
    csv << source;
    for (Arch a : archs) {
      const auto& report = grid.table.at(source).at(arch_name(a));
      if (report.per_seed.size() == report.failed) {
        md << " n/a | n/a |";
        csv << ",n/a,n/a";
        continue;
      }
      md << ' ' << format_cell(report.auroc) << " | " << format_cell(report.ap) << " |";
      csv << ",\"" << format_cell(report.auroc) << "\",\"" << format_cell(report.ap) << "\"";
    }
    md << '\n';
    csv << '\n';
  }
}

// Run (or reuse) every cell of the grid, writing one metrics JSON per cell,
// a manifest with checksums, and the aggregated report tables.
inline GridResult run_experiment(const ExperimentPlan& plan, const std::string& out_dir) {
  namespace fs = std::filesystem;
  if (plan.seeds.empty()) throw ValidationError("experiment needs a non-empty seed list");
  if (plan.archs.empty()) throw ValidationError("experiment needs at least one model");
  if (plan.feature_files.empty()) throw ValidationError("experiment needs at least one feature file");
  fs::create_directories(fs::path(out_dir) / "metrics");

  const auto loaded_split = read_split(plan.split_dir);
  const auto ctx = GraphContext::build(loaded_split.split.train_pos, loaded_split.n);

  struct FeatureEntry {
    std::string source;
    EmbeddingMatrix embedding;
  };
  std::vector<FeatureEntry> features;
  for (const auto& file : plan.feature_files) {
    auto emb = read_embedding_tsv(file);
    if (emb.rows() != loaded_split.n) {
      throw ValidationError("feature file " + file + " has " + std::to_string(emb.rows()) +
                            " rows but the split covers " + std::to_string(loaded_split.n) +
                            " nodes");
    }
    features.push_back({emb.source.empty() ? fs::path(file).stem().string() : emb.source,
                        std::move(emb)});
  }
  // Tolerate embedding files whose stored source collides by falling back to
  // the file stem; report rows must be unique.
  {
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (!seen.insert(features[i].source).second) {
        features[i].source = fs::path(plan.feature_files[i]).stem().string();
        if (!seen.insert(features[i].source).second) {
          throw ValidationError("duplicate feature source name: " + features[i].source);
        }
      }
    }
  }

  const std::string config_hash = plan_config_hash(plan);
  std::string previous_hash;
  {
    std::ifstream manifest_in(fs::path(out_dir) / "manifest.json");
    if (manifest_in) {
      const auto m = nlohmann::json::parse(manifest_in, nullptr, false);
      if (!m.is_discarded() && m.contains("config_hash")) {
        previous_hash = m["config_hash"].get<std::string>();
      }
    }
  }
  const bool cache_valid = previous_hash == config_hash;

  struct CellTask {
    std::size_t feature_idx;
    Arch arch;
    std::uint64_t seed;
  };
  std::vector<CellTask> tasks;
  for (std::size_t f = 0; f < features.size(); ++f) {
    for (Arch a : plan.archs) {
      for (std::uint64_t s : plan.seeds) tasks.push_back({f, a, s});
    }
  }

  std::vector<CellMetrics> results(tasks.size());
  std::vector<char> reused(tasks.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const auto& task = tasks[i];
      const auto& entry = features[task.feature_idx];
      const auto cell_path = fs::path(out_dir) / "metrics" /
                             cell_file_name(arch_name(task.arch), entry.source, task.seed);
      if (cache_valid && fs::exists(cell_path)) {
        std::ifstream in(cell_path);
        const auto j = nlohmann::json::parse(in, nullptr, false);
        if (!j.is_discarded()) {
          results[i] = cell_from_json(j);
          reused[i] = 1;
          continue;
        }
      }
      ModelConfig cfg = plan.base;
      cfg.arch = task.arch;
      cfg.seed = task.seed;
      results[i] =
          run_cell(cfg, entry.embedding.values, loaded_split.split, ctx, entry.source);
    }
  };
  const int n_workers = std::max(1, std::min<int>(plan.threads, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  GridResult grid;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& cell = results[i];
    if (!reused[i]) {
      std::ofstream out(fs::path(out_dir) / "metrics" /
                        cell_file_name(cell.arch, cell.feature_source, cell.seed));
      out << cell_to_json(cell).dump(2) << '\n';
      ++grid.cells_computed;
    } else {
      ++grid.cells_reused;
    }
    auto& report = grid.table[cell.feature_source][cell.arch];
    report.per_seed.push_back(cell);
    if (!cell.ok()) ++report.failed;
  }
  for (auto& [source, by_arch] : grid.table) {
    for (auto& [arch, report] : by_arch) {
      std::vector<double> aurocs, aps;
      for (const auto& cell : report.per_seed) {
        if (cell.ok()) {
          aurocs.push_back(cell.auroc);
          aps.push_back(cell.ap);
        }
      }
      if (!aurocs.empty()) {
        report.auroc = aggregate(aurocs);
        report.ap = aggregate(aps);
      }
    }
  }

  std::vector<std::string> sources;
  for (const auto& entry : features) sources.push_back(entry.source);
  write_report_files(out_dir, grid, sources, plan.archs, plan.seeds.size());

  nlohmann::json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["config_hash"] = config_hash;
  manifest["generated_unix_seconds"] = static_cast<std::int64_t>(
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count());
  nlohmann::json artifacts = nlohmann::json::object();
  for (const auto& entry : fs::directory_iterator(fs::path(out_dir) / "metrics")) {
    artifacts["metrics/" + entry.path().filename().string()] =
        sha256_file(entry.path().string());
  }
  artifacts["report.md"] = sha256_file((fs::path(out_dir) / "report.md").string());
  artifacts["report.csv"] = sha256_file((fs::path(out_dir) / "report.csv").string());
  manifest["artifacts"] = std::move(artifacts);
  std::ofstream manifest_out(fs::path(out_dir) / "manifest.json");
  manifest_out << manifest.dump(2) << '\n';
  return grid;
}

// Regenerate the aggregated report from the per-cell metrics files already in
// a run directory.
inline void regenerate_report(const std::string& out_dir) {
  namespace fs = std::filesystem;
  const auto metrics_dir = fs::path(out_dir) / "metrics";
  if (!fs::exists(metrics_dir)) {
    throw ValidationError("no metrics directory under " + out_dir);
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(metrics_dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no metrics files under " + out_dir);

  GridResult grid;
  std::vector<std::string> sources;
  std::vector<Arch> archs;
  std::size_t seed_count = 0;
  for (const auto& file : files) {
    std::ifstream in(file);
    auto cell = cell_from_json(nlohmann::json::parse(in));
    if (std::find(sources.begin(), sources.end(), cell.feature_source) == sources.end()) {
      sources.push_back(cell.feature_source);
    }
    const Arch arch = parse_arch(cell.arch);
    if (std::find(archs.begin(), archs.end(), arch) == archs.end()) archs.push_back(arch);
    auto& report = grid.table[cell.feature_source][cell.arch];
    report.per_seed.push_back(cell);
    if (!cell.ok()) ++report.failed;
    seed_count = std::max(seed_count, grid.table[cell.feature_source][cell.arch].per_seed.size());
  }
  for (auto& [source, by_arch] : grid.table) {
    for (auto& [arch, report] : by_arch) {
      std::vector<double> aurocs, aps;
      for (const auto& cell : report.per_seed) {
        if (cell.ok()) {
          aurocs.push_back(cell.auroc);
          aps.push_back(cell.ap);
        }
      }
      if (!aurocs.empty()) {
        report.auroc = aggregate(aurocs);
        report.ap = aggregate(aps);
      }
    }
  }
  // A report can only be regenerated over a full grid; missing cells would
  // silently skew the table.
  for (const auto& source : sources) {
    for (Arch a : archs) {
      if (!grid.table.count(source) || !grid.table.at(source).count(arch_name(a))) {
        throw ValidationError("metrics files do not cover the full (feature x model) grid");
      }
    }
  }
  write_report_files(out_dir, grid, sources, archs, seed_count);
}

}  // namespace qclp
