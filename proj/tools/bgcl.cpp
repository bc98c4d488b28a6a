// bgcl: train / embed / classify / pavpu / astd / synth pipeline driver.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bgcl/downstream.hpp"
#include "bgcl/evalmetrics.hpp"
#include "bgcl/graph.hpp"
#include "bgcl/log.hpp"
#include "bgcl/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bgcl;

namespace {

std::string fnv1a_hex(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  require(in.good(), "checksum: cannot open " + file.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char out[32];
  std::snprintf(out, sizeof out, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return out;
}

// The manifest lands on disk before any artifact and is rewritten with
// checksums once everything is emitted.
struct Manifest {
  fs::path out_dir;
  json body;

  Manifest(const fs::path& dir, const std::string& command, std::uint64_t seed,
           const json& config, const json& inputs) : out_dir(dir) {
    fs::create_directories(dir);
    body["command"] = command;
    body["seed"] = seed;
    body["config"] = config;
    body["inputs"] = inputs;
    body["artifacts"] = json::object();
    write();
  }

  void finalize(const std::vector<fs::path>& artifacts) {
    for (const fs::path& a : artifacts)
      body["artifacts"][a.filename().string()] = fnv1a_hex(a);
    write();
  }

  void write() const {
    std::ofstream out(out_dir / "manifest.json");
    require(out.good(), "cannot write manifest in " + out_dir.string());
    out << body.dump(2) << "\n";
  }
};

RunConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  require(in.good(), "cannot open config " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed config " + file.string() + ": " + e.what());
  }
  return RunConfig::from_json(j);
}

struct SeedFlag {
  std::uint64_t value = 0;
  bool set = false;
};

int cmd_synth(int blocks, int nodes_per_block, double p_in, double p_out, int feature_dim,
              double signal, std::uint64_t seed, const fs::path& out_dir) {
  Manifest manifest(out_dir, "synth", seed,
                    json{{"blocks", blocks},
                         {"nodes_per_block", nodes_per_block},
                         {"p_in", p_in},
                         {"p_out", p_out},
                         {"feature_dim", feature_dim},
                         {"signal", signal}},
                    json::object());
  const Graph g = generate_sbm(nodes_per_block, blocks, p_in, p_out, feature_dim, signal, seed);
  save_graph(g, out_dir);
  manifest.finalize({out_dir / "edges.tsv", out_dir / "features.csv", out_dir / "labels.csv",
                     out_dir / "splits.json"});
  logging::info("synth: ", g.n_nodes, " nodes, ", g.edges.size(), " edges -> ", out_dir.string());
  return 0;
}

int cmd_train(const fs::path& config, const fs::path& data, const fs::path& out_dir,
              const SeedFlag& seed, int threads) {
  RunConfig cfg = load_config(config);
  if (seed.set) cfg.seed = seed.value;
  if (threads > 0) cfg.threads = threads;
  const Graph g = load_graph(data);
  Manifest manifest(out_dir, "train", cfg.seed, cfg.to_json(),
                    json{{"data", data.string()}, {"config", config.string()}});

  std::ofstream log_out(out_dir / "train_log.jsonl");
  require(log_out.good(), "cannot open train log");
  const TrainResult result = train(g, cfg, [&](const TrainLogRecord& rec) {
    log_out << rec.to_json().dump() << "\n";
  });
  log_out.close();
  save_checkpoint(out_dir / "model.bgcl", result.checkpoint);
  manifest.finalize({out_dir / "model.bgcl", out_dir / "train_log.jsonl"});
  if (result.aborted) {
    std::cerr << "bgcl train: aborted: " << result.abort_reason
              << " (last-good checkpoint retained)\n";
    return 1;
  }
  logging::info("train: ", result.log.size(), " epochs -> ", (out_dir / "model.bgcl").string());
  return 0;
}

int cmd_embed(const fs::path& checkpoint, const fs::path& data, const fs::path& out_dir,
              int samples, const std::string& mode, std::uint64_t seed, int threads) {
  require(mode == "bayesian" || mode == "deterministic", "embed: mode must be bayesian|deterministic");
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Graph g = load_graph(data);
  Manifest manifest(out_dir, "embed", seed,
                    json{{"samples", samples}, {"mode", mode}},
                    json{{"data", data.string()}, {"checkpoint", checkpoint.string()}});
  EmbeddingSamples s;
  if (mode == "deterministic") {
    const Matrix h = deterministic_embed(ck, g);
    s.S = 1;
    s.N = static_cast<int>(h.rows());
    s.D = static_cast<int>(h.cols());
    s.seed = seed;
    s.data.push_back(h);
  } else {
    s = sample_embeddings(ck, g, samples, seed, threads);
  }
  save_embeddings(out_dir / "embeddings.bgce", s);
  manifest.finalize({out_dir / "embeddings.bgce"});
  logging::info("embed: ", s.S, " sample(s) of ", s.N, "x", s.D);
  return 0;
}

int cmd_classify(const fs::path& checkpoint, const fs::path& data, const fs::path& out_dir,
                 int samples, int k, const std::string& mode, const std::string& mixture,
                 std::uint64_t seed, int threads) {
  require(mode == "bayesian" || mode == "deterministic",
          "classify: mode must be bayesian|deterministic");
  require(mixture == "per-node" || mixture == "dataset",
          "classify: mixture must be per-node|dataset");
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Graph g = load_graph(data);
  require(g.has_labels(), "classify: labels.csv required");
  Manifest manifest(out_dir, "classify", seed,
                    json{{"samples", samples}, {"k", k}, {"mode", mode}, {"mixture", mixture}},
                    json{{"data", data.string()}, {"checkpoint", checkpoint.string()}});

  EmbeddingSamples s;
  if (mode == "deterministic") {
    const Matrix h = deterministic_embed(ck, g);
    s.S = 1;
    s.N = static_cast<int>(h.rows());
    s.D = static_cast<int>(h.cols());
    s.seed = seed;
    s.data.push_back(h);
    k = 1;
  } else {
    require(k >= 1 && k <= samples, "classify: need 1 <= k <= samples");
    s = sample_embeddings(ck, g, samples, derive_seed(seed, 1), threads);
  }

  std::vector<int> train_nodes, test_nodes;
  if (auto it = g.splits.find("train"); it != g.splits.end()) train_nodes = it->second;
  if (auto it = g.splits.find("test"); it != g.splits.end()) test_nodes = it->second;
  require(!train_nodes.empty(), "classify: no train split in splits.json");

  const MixtureGranularity gran =
      mixture == "per-node" ? MixtureGranularity::PerNode : MixtureGranularity::Dataset;
  const ClassifierParams clf = mc_logreg_train(s, train_nodes, g.labels, g.num_classes(), k,
                                               150, 0.1, derive_seed(seed, 2), gran);
  const Matrix probs = mc_predict(s, clf);
  const std::vector<int> pred = argmax_rows(probs);

  {
    std::ofstream out(out_dir / "predictions.csv");
    out << "node,label,predicted,max_prob,normalized_entropy\n";
    char buf[64];
    for (int v = 0; v < g.n_nodes; ++v) {
      std::snprintf(buf, sizeof buf, "%.17g", probs.row(v).maxCoeff());
      out << v << "," << g.labels[v] << "," << pred[v] << "," << buf << ",";
      std::snprintf(buf, sizeof buf, "%.17g", predictive_entropy(probs, v));
      out << buf << "\n";
    }
  }
  json summary{{"train_accuracy", accuracy(pred, g.labels, train_nodes)},
               {"k", k},
               {"samples", s.S},
               {"mode", mode},
               {"mixture", mixture}};
  if (!test_nodes.empty()) summary["test_accuracy"] = accuracy(pred, g.labels, test_nodes);
  {
    std::ofstream out(out_dir / "classify.json");
    out << summary.dump(2) << "\n";
  }
  manifest.finalize({out_dir / "predictions.csv", out_dir / "classify.json"});
  logging::info("classify: ", summary.dump());
  return 0;
}

int cmd_pavpu(const fs::path& checkpoint, const fs::path& data, const fs::path& out_dir,
              int samples, std::uint64_t seed, int threads) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Graph g = load_graph(data);
  Manifest manifest(out_dir, "pavpu", seed, json{{"samples", samples}},
                    json{{"data", data.string()}, {"checkpoint", checkpoint.string()}});
  PavpuOptions opt;
  opt.total_samples = samples;
  opt.threads = threads;
  const UncertaintyReport report = pavpu_protocol(ck, g, seed, opt);
  write_pavpu_csv(out_dir / "pavpu.csv", report);
  {
    std::ofstream out(out_dir / "summary.json");
    out << pavpu_summary(report).dump(2) << "\n";
  }
  manifest.finalize({out_dir / "pavpu.csv", out_dir / "summary.json"});
  logging::info("pavpu: accuracy ", report.accuracy);
  return 0;
}

int cmd_astd(const fs::path& config, const fs::path& data, const fs::path& out_dir,
             double sigma, int noise_nodes, int k_max, int samples, const SeedFlag& seed,
             int threads) {
  RunConfig cfg = load_config(config);
  if (seed.set) cfg.seed = seed.value;
  const Graph clean_g = load_graph(data);
  require(noise_nodes >= 1 && noise_nodes <= clean_g.n_nodes, "astd: bad --noise-nodes");
  Manifest manifest(out_dir, "astd", cfg.seed,
                    json{{"sigma", sigma},
                         {"noise_nodes", noise_nodes},
                         {"k_max", k_max},
                         {"samples", samples},
                         {"train", cfg.to_json()}},
                    json{{"data", data.string()}, {"config", config.string()}});

  // seeded choice of the noised node set
  RngStream pick(derive_seed(cfg.seed, 0xa57d));
  std::vector<int> order(clean_g.n_nodes);
  for (int v = 0; v < clean_g.n_nodes; ++v) order[v] = v;
  for (int i = clean_g.n_nodes - 1; i > 0; --i)
    std::swap(order[i], order[static_cast<int>(pick.below(static_cast<std::uint64_t>(i) + 1))]);
  std::vector<int> noised(order.begin(), order.begin() + noise_nodes);
  std::sort(noised.begin(), noised.end());

  const Graph noisy_g = inject_noise(clean_g, noised, sigma, derive_seed(cfg.seed, 0x015e));

  logging::info("astd: training clean model");
  const TrainResult clean_r = train(clean_g, cfg);
  require(!clean_r.aborted, "astd: clean training aborted: " + clean_r.abort_reason);
  logging::info("astd: training noisy model");
  const TrainResult noisy_r = train(noisy_g, cfg);
  require(!noisy_r.aborted, "astd: noisy training aborted: " + noisy_r.abort_reason);

  const AstdTable table =
      astd_khop_experiment(clean_r.checkpoint, noisy_r.checkpoint, clean_g, noisy_g, noised,
                           k_max, samples, derive_seed(cfg.seed, 0xd1ff), threads);
  write_astd_csv(out_dir / "astd.csv", table);
  json summary = astd_summary(table);
  summary["noised_nodes"] = noised;
  summary["sigma"] = sigma;
  {
    std::ofstream out(out_dir / "summary.json");
    out << summary.dump(2) << "\n";
  }
  manifest.finalize({out_dir / "astd.csv", out_dir / "summary.json"});
  logging::info("astd: done");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian graph contrastive learning pipeline"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a stochastic block model dataset");
  int s_blocks = 3, s_npb = 100, s_fdim = 16;
  double s_pin = 0.1, s_pout = 0.01, s_signal = 2.0;
  std::uint64_t s_seed = 1;
  std::string s_out;
  synth->add_option("--blocks", s_blocks, "Number of blocks");
  synth->add_option("--nodes-per-block", s_npb, "Nodes per block");
  synth->add_option("--p-in", s_pin, "Within-block edge probability");
  synth->add_option("--p-out", s_pout, "Cross-block edge probability");
  synth->add_option("--feature-dim", s_fdim, "Feature dimension");
  synth->add_option("--signal", s_signal, "Block-indicator feature scale");
  synth->add_option("--seed", s_seed, "Master seed");
  synth->add_option("--out", s_out, "Output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a model");
  std::string t_config, t_data, t_out;
  SeedFlag t_seed;
  int t_threads = 0;
  tr->add_option("--config", t_config, "Run configuration JSON")->required();
  tr->add_option("--data", t_data, "Dataset directory")->required();
  tr->add_option("--out", t_out, "Output directory")->required();
  tr->add_option_function<std::uint64_t>(
      "--seed", [&](std::uint64_t v) { t_seed = {v, true}; },
      "Master seed (overrides config)");
  tr->add_option("--threads", t_threads, "Worker cap");

  // embed
  auto* em = app.add_subcommand("embed", "Sample embeddings from a trained model");
  std::string e_ck, e_data, e_out, e_mode = "bayesian";
  int e_samples = 50, e_threads = 1;
  std::uint64_t e_seed = 1;
  em->add_option("--checkpoint", e_ck, "Model checkpoint")->required();
  em->add_option("--data", e_data, "Dataset directory")->required();
  em->add_option("--out", e_out, "Output directory")->required();
  em->add_option("--samples", e_samples, "Monte-Carlo sample count");
  em->add_option("--mode", e_mode, "bayesian|deterministic");
  em->add_option("--seed", e_seed, "Master seed");
  em->add_option("--threads", e_threads, "Worker cap");

  // classify
  auto* cl = app.add_subcommand("classify", "Train and evaluate the downstream classifier");
  std::string c_ck, c_data, c_out, c_mode = "bayesian", c_mixture = "per-node";
  int c_samples = 50, c_k = 10, c_threads = 1;
  std::uint64_t c_seed = 1;
  cl->add_option("--checkpoint", c_ck, "Model checkpoint")->required();
  cl->add_option("--data", c_data, "Dataset directory")->required();
  cl->add_option("--out", c_out, "Output directory")->required();
  cl->add_option("--samples", c_samples, "Monte-Carlo sample count");
  cl->add_option("--k", c_k, "Mixture size for classifier training");
  cl->add_option("--mode", c_mode, "bayesian|deterministic");
  cl->add_option("--mixture", c_mixture, "per-node|dataset");
  cl->add_option("--seed", c_seed, "Master seed");
  cl->add_option("--threads", c_threads, "Worker cap");

  // pavpu
  auto* pv = app.add_subcommand("pavpu", "Uncertainty-quality report");
  std::string p_ck, p_data, p_out;
  int p_samples = 500, p_threads = 1;
  std::uint64_t p_seed = 1;
  pv->add_option("--checkpoint", p_ck, "Model checkpoint")->required();
  pv->add_option("--data", p_data, "Dataset directory")->required();
  pv->add_option("--out", p_out, "Output directory")->required();
  pv->add_option("--samples", p_samples, "Total sample count");
  pv->add_option("--seed", p_seed, "Master seed");
  pv->add_option("--threads", p_threads, "Worker cap");

  // astd
  auto* as = app.add_subcommand("astd", "Noise-injection ASTD experiment");
  std::string a_config, a_data, a_out;
  double a_sigma = 1.0;
  int a_noise_nodes = 10, a_kmax = 5, a_samples = 50, a_threads = 1;
  SeedFlag a_seed;
  as->add_option("--config", a_config, "Run configuration JSON")->required();
  as->add_option("--data", a_data, "Dataset directory")->required();
  as->add_option("--out", a_out, "Output directory")->required();
  as->add_option("--sigma", a_sigma, "Noise standard deviation");
  as->add_option("--noise-nodes", a_noise_nodes, "How many nodes to replace with noise");
  as->add_option("--k-max", a_kmax, "Largest hop to report");
  as->add_option("--samples", a_samples, "Monte-Carlo samples per model");
  as->add_option_function<std::uint64_t>(
      "--seed", [&](std::uint64_t v) { a_seed = {v, true}; },
      "Master seed (overrides config)");
  as->add_option("--threads", a_threads, "Worker cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "bgcl: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*synth)
      return cmd_synth(s_blocks, s_npb, s_pin, s_pout, s_fdim, s_signal, s_seed, s_out);
    if (*tr) return cmd_train(t_config, t_data, t_out, t_seed, t_threads);
    if (*em) return cmd_embed(e_ck, e_data, e_out, e_samples, e_mode, e_seed, e_threads);
    if (*cl)
      return cmd_classify(c_ck, c_data, c_out, c_samples, c_k, c_mode, c_mixture, c_seed,
                          c_threads);
    if (*pv) return cmd_pavpu(p_ck, p_data, p_out, p_samples, p_seed, p_threads);
    if (*as)
      return cmd_astd(a_config, a_data, a_out, a_sigma, a_noise_nodes, a_kmax, a_samples,
                      a_seed, a_threads);
  } catch (const std::exception& e) {
    std::cerr << "bgcl: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
