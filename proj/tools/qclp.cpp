// qclp — link prediction on temporal concept co-occurrence networks.
//
// Pipeline subcommands:
//   ingest     corpus + vocabulary -> co-occurrence records TSV
//   split      records -> chronological train/val/test split directory
//   featurize  split (+records/vocab) -> node embedding TSV
//   merge      two embedding TSVs -> concatenated embedding TSV
//   train-eval features x models x seeds -> metrics, manifest, report
//   report     regenerate report tables from per-cell metrics files
//
// Conventions: progress and logs go to stderr, data goes to files; exit code
// 0 on success, 1 on runtime failure, 2 on usage or validation errors.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qclp/baselines.hpp"
#include "qclp/corpus.hpp"
#include "qclp/embedding.hpp"
#include "qclp/errors.hpp"
#include "qclp/experiment.hpp"
#include "qclp/http_live.hpp"
#include "qclp/llm_client.hpp"
#include "qclp/llm_features.hpp"
#include "qclp/predictors.hpp"
#include "qclp/temporal_graph.hpp"
#include "qclp/time_decay.hpp"

namespace {

namespace fs = std::filesystem;

// Transport used in fixtures-only mode: the client must answer everything
// from the cache, so any attempt to reach the network is a hard error.
class OfflineTransport : public qclp::HttpTransport {
 public:
  qclp::HttpResponse post(const std::string&, const std::string&,
                          const std::vector<std::pair<std::string, std::string>>&) override {
    throw qclp::TransportError("network access attempted in fixtures-only mode");
  }
};

struct GlobalOptions {
  std::uint64_t master_seed = 0;
};

// Component seeds are derived from the master seed with fixed tags so each
// stage is independently reproducible no matter which subcommands ran before.
constexpr std::uint64_t kSplitSeedTag = 1;
constexpr std::uint64_t kFeaturizeSeedTag = 2;

struct IngestOptions {
  std::string corpus;
  std::string vocab;
  std::string out;
  int min_year = 0;
  int max_year = 9999;
  int threads = 1;
};

int run_ingest(const IngestOptions& opt) {
  const auto docs = qclp::load_corpus(opt.corpus);
  const auto vocab = qclp::ConceptVocab::load(opt.vocab);
  qclp::IngestStats stats;
  const auto records = qclp::extract_cooccurrences(docs, vocab, {opt.min_year, opt.max_year},
                                                   &stats, opt.threads);
  qclp::write_records_tsv(opt.out, records);
  std::cerr << "ingest: " << stats.total_documents << " documents, "
            << stats.contributing_documents << " with >=2 concepts, " << stats.records
            << " co-occurrence records (" << stats.skipped_out_of_window
            << " documents outside [" << opt.min_year << ", " << opt.max_year << "])\n"
            << "ingest: wrote " << opt.out << '\n';
  return 0;
}

struct SplitOptions {
  std::string records;
  std::string vocab;
  int n = 0;
  qclp::SplitSpec spec;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
};

int run_split(const SplitOptions& opt, const GlobalOptions& global) {
  int n = opt.n;
  if (!opt.vocab.empty()) {
    n = qclp::ConceptVocab::load(opt.vocab).size();
  } else if (n <= 0) {
    throw qclp::ValidationError("split: provide --vocab or a positive --n for the node count");
  }
  const auto records = qclp::read_records_tsv(opt.records);
  const auto graph = qclp::TemporalGraph::build(records, n);
  const std::uint64_t seed =
      opt.seed_set ? opt.seed : qclp::derive_seed(global.master_seed, kSplitSeedTag);
  const auto split = qclp::make_split(graph, opt.spec, seed);
  qclp::write_split(opt.out, split, opt.spec, n);
  std::cerr << "split: train " << split.train_pos.size() << ", val " << split.val_pos.size()
            << " (+" << split.val_neg.size() << " neg), test " << split.test_pos.size() << " (+"
            << split.test_neg.size() << " neg); wrote " << opt.out << '\n';
  return 0;
}

struct FeaturizeOptions {
  std::string method;
  std::string split_dir;
  std::string out;
  int dim = 768;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;

  // random-walk / line knobs
  int num_walks = 10;
  int walk_len = 80;
  double p = 1.0;
  double q = 1.0;
  int window = 10;
  int neg_k = 5;
  int epochs = 5;
  double lr = 0.025;

  // llm knobs
  std::string vocab;
  std::string endpoint = "https://api.openai.com";
  std::string model = "gpt-4o";
  std::string embed_model = "text-embedding-3-large";
  int max_tokens = 512;
  std::string cache_dir;
  bool fixtures_only = false;

  // time-decay knobs
  std::string records;
  std::string concat_with;
  double lambda = 0.3;
  int dim_td = 128;
  int ref_year = 0;  // 0: use the split's train_end
  double ppmi_alpha = 1.0;
};

int run_featurize(const FeaturizeOptions& opt, const GlobalOptions& global) {
  const std::uint64_t seed =
      opt.seed_set ? opt.seed : qclp::derive_seed(global.master_seed, kFeaturizeSeedTag);

  if (opt.method == "deepwalk" || opt.method == "node2vec" || opt.method == "line") {
    const auto loaded = qclp::read_split(opt.split_dir);
    const auto adj = qclp::Adjacency::from_edges(loaded.split.train_pos, loaded.n);
    qclp::BaselineConfig cfg;
    cfg.walk = {opt.num_walks, opt.walk_len, opt.p, opt.q, seed};
    cfg.sg.dim = opt.dim;
    cfg.sg.window = opt.window;
    cfg.sg.neg_k = opt.neg_k;
    cfg.sg.epochs = opt.epochs;
    cfg.sg.lr = opt.lr;
    cfg.sg.seed = seed;
    cfg.line.dim = opt.dim;
    cfg.line.neg_k = opt.neg_k;
    cfg.line.epochs = opt.epochs;
    cfg.line.lr = opt.lr;
    cfg.line.seed = seed;
    cfg.threads = opt.threads;
    const auto emb = qclp::run_baseline(opt.method, adj, cfg);
    qclp::write_embedding_tsv(opt.out, emb);
    std::cerr << "featurize: " << opt.method << " " << emb.rows() << "x" << emb.cols()
              << " from train edges; wrote " << opt.out << '\n';
    return 0;
  }

  if (opt.method == "llm") {
    if (opt.vocab.empty()) {
      throw qclp::ValidationError("featurize --method llm requires --vocab");
    }
    const auto vocab = qclp::ConceptVocab::load(opt.vocab);
    const std::string cache_dir =
        opt.cache_dir.empty() ? qclp::default_cache_dir() : opt.cache_dir;

    qclp::LlmClientConfig gen_cfg;
    gen_cfg.endpoint = opt.endpoint;
    gen_cfg.model_id = opt.model;
    gen_cfg.max_tokens = opt.max_tokens;
    gen_cfg.fixtures_only = opt.fixtures_only;
    qclp::LlmClientConfig embed_cfg = gen_cfg;
    embed_cfg.model_id = opt.embed_model;

    std::shared_ptr<qclp::HttpTransport> transport;
    if (opt.fixtures_only) {
      transport = std::make_shared<OfflineTransport>();
    } else {
      transport = qclp::make_live_transport(gen_cfg);
    }
    qclp::LlmClient generator(gen_cfg, transport, qclp::DiskCache(cache_dir));
    qclp::LlmClient embedder(embed_cfg, transport, qclp::DiskCache(cache_dir));
    const auto emb = qclp::featurize_vocab(generator, embedder, vocab, "llm-" + opt.model);
    qclp::write_embedding_tsv(opt.out, emb);
    std::cerr << "featurize: llm (" << opt.model << " -> " << opt.embed_model << ") "
              << emb.rows() << "x" << emb.cols() << (opt.fixtures_only ? " from fixtures" : "")
              << "; wrote " << opt.out << '\n';
    return 0;
  }

  if (opt.method == "timedecay") {
    if (opt.concat_with.empty()) {
      throw qclp::ValidationError(
          "featurize --method timedecay requires --concat-with: time-decay embeddings are "
          "auxiliary-only and cannot function as standalone embeddings");
    }
    if (opt.records.empty()) {
      throw qclp::ValidationError("featurize --method timedecay requires --records");
    }
    const auto loaded = qclp::read_split(opt.split_dir);
    const auto records = qclp::read_records_tsv(opt.records);
    const auto graph = qclp::TemporalGraph::build(records, loaded.n);

    qclp::TimeDecayConfig cfg;
    cfg.lambda = opt.lambda;
    cfg.d_td = opt.dim_td;
    cfg.ref_year = opt.ref_year > 0 ? opt.ref_year : loaded.spec.train_end;
    cfg.year_hi = cfg.ref_year;  // never look past the reference year
    cfg.year_lo = cfg.year_hi;
    for (const auto& [year, counts] : graph.yearly_counts()) {
      (void)counts;
      cfg.year_lo = std::min(cfg.year_lo, year);
    }
    const auto base = qclp::read_embedding_tsv(opt.concat_with);
    const auto td = qclp::time_decay_embedding(graph, cfg, opt.ppmi_alpha);
    const auto merged = qclp::concat_embeddings(base, td);
    qclp::write_embedding_tsv(opt.out, merged);
    std::cerr << "featurize: timedecay lambda=" << cfg.lambda << " years [" << cfg.year_lo
              << ", " << cfg.year_hi << "] d_td=" << cfg.d_td << " concatenated onto "
              << opt.concat_with << " -> " << merged.rows() << "x" << merged.cols()
              << "; wrote " << opt.out << '\n';
    return 0;
  }

  throw qclp::ValidationError("unknown featurize method: " + opt.method +
                              " (expected deepwalk, node2vec, line, llm, or timedecay)");
}

struct MergeOptions {
  std::string base;
  std::string with;
  std::string out;
};

int run_merge(const MergeOptions& opt) {
  // The TSV format carries no source tag; report rows for a merged file are
  // named after the file stem, so pick the output filename accordingly.
  const auto a = qclp::read_embedding_tsv(opt.base);
  const auto b = qclp::read_embedding_tsv(opt.with);
  const auto merged = qclp::concat_embeddings(a, b);
  qclp::write_embedding_tsv(opt.out, merged);
  std::cerr << "merge: " << a.rows() << "x" << a.cols() << " ++ " << b.rows() << "x" << b.cols()
            << " -> " << merged.rows() << "x" << merged.cols() << "; wrote " << opt.out << '\n';
  return 0;
}

struct TrainEvalOptions {
  std::vector<std::string> features;
  std::string split_dir;
  std::vector<std::string> models{"gcn"};
  std::vector<std::uint64_t> seeds{0};
  std::string out;
  int layers = 2;
  int hidden = 256;
  double dropout = 0.5;
  double lr = 1e-3;
  int epochs = 500;
  int patience = 20;
  int threads = 1;
};

int run_train_eval(const TrainEvalOptions& opt) {
  qclp::ExperimentPlan plan;
  plan.feature_files = opt.features;
  plan.split_dir = opt.split_dir;
  for (const auto& m : opt.models) plan.archs.push_back(qclp::parse_arch(m));
  plan.seeds = opt.seeds;
  plan.base.layers = opt.layers;
  plan.base.hidden = opt.hidden;
  plan.base.dropout = opt.dropout;
  plan.base.lr = opt.lr;
  plan.base.epochs = opt.epochs;
  plan.base.patience = opt.patience;
  plan.base.validate();
  plan.threads = opt.threads;

  const auto grid = qclp::run_experiment(plan, opt.out);
  std::size_t failed_cells = 0;
  for (const auto& [source, by_arch] : grid.table) {
    for (const auto& [arch, report] : by_arch) failed_cells += report.failed;
  }
  std::cerr << "train-eval: " << grid.cells_computed << " cells computed, " << grid.cells_reused
            << " reused";
  if (failed_cells > 0) std::cerr << ", " << failed_cells << " runs failed (recorded)";
  std::cerr << "; report at " << (fs::path(opt.out) / "report.md").string() << '\n';
  return 0;
}

int run_report(const std::string& run_dir) {
  qclp::regenerate_report(run_dir);
  std::cerr << "report: regenerated " << (fs::path(run_dir) / "report.md").string() << " and "
            << (fs::path(run_dir) / "report.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"link prediction on temporal concept co-occurrence networks"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file (flat sections named after subcommands)");
  app.get_config_formatter_base()->comment('#');

  GlobalOptions global;
  app.add_option("--seed", global.master_seed,
                 "Master seed; per-stage seeds are derived from it unless overridden");

  IngestOptions ingest;
  auto* cmd_ingest = app.add_subcommand("ingest", "Extract co-occurrence records from a corpus");
  cmd_ingest->add_option("--corpus", ingest.corpus, "JSON-lines corpus file")->required();
  cmd_ingest->add_option("--vocab", ingest.vocab, "Concept vocabulary, one per line")->required();
  cmd_ingest->add_option("--out", ingest.out, "Output records TSV")->required();
  cmd_ingest->add_option("--min-year", ingest.min_year, "Ignore documents before this year");
  cmd_ingest->add_option("--max-year", ingest.max_year, "Ignore documents after this year");
  cmd_ingest->add_option("--threads", ingest.threads, "Worker threads");

  SplitOptions split;
  auto* cmd_split = app.add_subcommand("split", "Chronological split with sampled negatives");
  cmd_split->add_option("--records", split.records, "Records TSV from ingest")->required();
  cmd_split->add_option("--vocab", split.vocab, "Vocabulary file (defines node count)");
  cmd_split->add_option("--n", split.n, "Node count (alternative to --vocab)");
  cmd_split->add_option("--train-end", split.spec.train_end, "Last training year")->required();
  cmd_split->add_option("--val-end", split.spec.val_end, "Last validation year")->required();
  cmd_split->add_option("--test-end", split.spec.test_end, "Last test year")->required();
  auto* split_seed = cmd_split->add_option("--seed", split.seed, "Negative-sampling seed");
  cmd_split->add_option("--out", split.out, "Output split directory")->required();

  FeaturizeOptions feat;
  auto* cmd_feat = app.add_subcommand("featurize", "Compute node embeddings");
  cmd_feat->add_option("--method", feat.method,
                       "deepwalk | node2vec | line | llm | timedecay")->required();
  cmd_feat->add_option("--split", feat.split_dir, "Split directory (train edges / node count)")
      ->required();
  cmd_feat->add_option("--out", feat.out, "Output embedding TSV")->required();
  cmd_feat->add_option("--dim", feat.dim, "Embedding dimension (default 768)");
  auto* feat_seed = cmd_feat->add_option("--seed", feat.seed, "Stage seed override");
  cmd_feat->add_option("--threads", feat.threads, "Worker threads");
  cmd_feat->add_option("--num-walks", feat.num_walks, "Walks per node");
  cmd_feat->add_option("--walk-len", feat.walk_len, "Steps per walk");
  cmd_feat->add_option("--p", feat.p, "node2vec return parameter");
  cmd_feat->add_option("--q", feat.q, "node2vec in-out parameter");
  cmd_feat->add_option("--window", feat.window, "Skip-gram window");
  cmd_feat->add_option("--neg", feat.neg_k, "Negative samples per pair");
  cmd_feat->add_option("--epochs", feat.epochs, "Training epochs (walk/line methods)");
  cmd_feat->add_option("--lr", feat.lr, "Initial learning rate (walk/line methods)");
  cmd_feat->add_option("--vocab", feat.vocab, "Vocabulary file (llm method)");
  cmd_feat->add_option("--endpoint", feat.endpoint, "LLM API endpoint");
  cmd_feat->add_option("--model", feat.model, "Text-generation model id");
  cmd_feat->add_option("--embed-model", feat.embed_model, "Embedding model id");
  cmd_feat->add_option("--max-tokens", feat.max_tokens, "Generation token cap");
  cmd_feat->add_option("--cache", feat.cache_dir, "Cache directory (default QCLP_CACHE_DIR)");
  cmd_feat->add_flag("--fixtures-only", feat.fixtures_only,
                     "Serve everything from cache; any network attempt is an error");
  cmd_feat->add_option("--records", feat.records, "Records TSV (timedecay method)");
  cmd_feat->add_option("--concat-with", feat.concat_with,
                       "Base embedding TSV the time-decay block is appended to");
  cmd_feat->add_option("--lambda", feat.lambda, "Time-decay constant per year (default 0.3)");
  cmd_feat->add_option("--dim-td", feat.dim_td, "Time-decay SVD dimension (default 128)");
  cmd_feat->add_option("--ref-year", feat.ref_year, "Decay reference year (default: train_end)");
  cmd_feat->add_option("--ppmi-alpha", feat.ppmi_alpha, "PPMI context smoothing exponent");

  MergeOptions merge;
  auto* cmd_merge = app.add_subcommand("merge", "Concatenate two embedding files");
  cmd_merge->add_option("--base", merge.base, "First embedding TSV")->required();
  cmd_merge->add_option("--with", merge.with, "Second embedding TSV")->required();
  cmd_merge->add_option("--out", merge.out, "Output embedding TSV")->required();

  TrainEvalOptions tre;
  auto* cmd_tre = app.add_subcommand("train-eval", "Train and evaluate a model grid");
  cmd_tre->add_option("--features", tre.features, "Embedding TSVs (grid rows)")
      ->required()
      ->delimiter(',');
  cmd_tre->add_option("--split", tre.split_dir, "Split directory")->required();
  cmd_tre->add_option("--model", tre.models, "Architectures: mlp,gcn,sage,gae,ncn")
      ->delimiter(',');
  cmd_tre->add_option("--seeds", tre.seeds, "Training seeds")->delimiter(',');
  cmd_tre->add_option("--out", tre.out, "Run directory")->required();
  cmd_tre->add_option("--layers", tre.layers, "Encoder layers");
  cmd_tre->add_option("--hidden", tre.hidden, "Hidden width");
  cmd_tre->add_option("--dropout", tre.dropout, "Dropout probability");
  cmd_tre->add_option("--lr", tre.lr, "Learning rate");
  cmd_tre->add_option("--epochs", tre.epochs, "Max epochs");
  cmd_tre->add_option("--patience", tre.patience, "Early-stopping patience");
  cmd_tre->add_option("--threads", tre.threads, "Grid worker threads");

  std::string report_dir;
  auto* cmd_report = app.add_subcommand("report", "Regenerate report tables from metrics files");
  cmd_report->add_option("--run", report_dir, "Run directory with metrics/")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message
    return 2;
  }

  try {
    if (*cmd_ingest) return run_ingest(ingest);
    if (*cmd_split) {
      split.seed_set = split_seed->count() > 0;
      return run_split(split, global);
    }
    if (*cmd_feat) {
      feat.seed_set = feat_seed->count() > 0;
      return run_featurize(feat, global);
    }
    if (*cmd_merge) return run_merge(merge);
    if (*cmd_tre) return run_train_eval(tre);
    if (*cmd_report) return run_report(report_dir);
  } catch (const qclp::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
