#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "bgcl/downstream.hpp"
#include "bgcl/graph.hpp"
#include "bgcl/types.hpp"

namespace bgcl {

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth,
                const std::vector<int>& nodes);

// -Σ p ln p / ln C for one probability row.
double predictive_entropy(const Matrix& probs, Eigen::Index row);

// certain ⇔ normalized entropy <= threshold.
double pavpu(const std::vector<bool>& correct, const std::vector<double>& entropies,
             double threshold);

struct UncertaintyReport {
  struct ThresholdRow {
    double threshold;
    int n_ac, n_au, n_ic, n_iu;
    double pavpu;
  };
  struct NodeRow {
    int node;
    int predicted;
    bool correct;
    double entropy;
  };
  std::vector<ThresholdRow> rows;
  std::vector<NodeRow> nodes;
  double accuracy = 0.0;
};

struct PavpuOptions {
  int total_samples = 500;
  int train_samples = 10;   // classifier is fit on the first group
  int group_size = 10;      // 49 disjoint evaluation groups follow
  int classifier_epochs = 150;
  double classifier_lr = 0.1;
  std::vector<double> thresholds = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::string eval_split = "test";
  int threads = 1;
};

// Draw 500 embeddings, fit the MC classifier on the first 10, form one mean
// probability per node from the remaining 49 groups of 10, then sweep PAVPU
// over the entropy thresholds.
UncertaintyReport pavpu_protocol(const Checkpoint& ck, const Graph& g, std::uint64_t seed,
                                 const PavpuOptions& opt = {});

// Per-node mean over latent dimensions of the across-sample population
// standard deviation.
std::vector<double> astd(const EmbeddingSamples& samples, const std::vector<int>& nodes);

struct AstdTable {
  struct HopRow {
    int hop;
    bool present;              // false when the ring is empty
    double mean_diff;
    std::vector<double> diffs; // per node in the ring
  };
  std::vector<HopRow> rows;
};

AstdTable astd_khop_experiment(const Checkpoint& clean_ck, const Checkpoint& noisy_ck,
                               const Graph& clean_g, const Graph& noisy_g,
                               const std::vector<int>& noised_nodes, int k_max, int S,
                               std::uint64_t seed, int threads = 1);

void write_pavpu_csv(const std::filesystem::path& file, const UncertaintyReport& report);
void write_astd_csv(const std::filesystem::path& file, const AstdTable& table);
nlohmann::json pavpu_summary(const UncertaintyReport& report);
nlohmann::json astd_summary(const AstdTable& table);

}  // namespace bgcl
