#include "bgcl/evalmetrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "bgcl/rng.hpp"

namespace bgcl {

using nlohmann::json;

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth,
                const std::vector<int>& nodes) {
  require(!nodes.empty(), "accuracy: empty node set");
  int correct = 0;
  for (int v : nodes) {
    require(v >= 0 && v < static_cast<int>(predicted.size()) &&
                v < static_cast<int>(truth.size()),
            "accuracy: node out of range");
    if (predicted[v] == truth[v]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

double predictive_entropy(const Matrix& probs, Eigen::Index row) {
  const Eigen::Index c = probs.cols();
  require(c >= 2, "predictive_entropy: need at least two classes");
  double h = 0.0;
  for (Eigen::Index j = 0; j < c; ++j) {
    const double p = probs(row, j);
    require(p >= 0.0, "predictive_entropy: negative probability");
    if (p > 0.0) h -= p * std::log(p);
  }
  return h / std::log(static_cast<double>(c));
}

double pavpu(const std::vector<bool>& correct, const std::vector<double>& entropies,
             double threshold) {
  require(correct.size() == entropies.size(), "pavpu: length mismatch");
  require(!correct.empty(), "pavpu: empty input");
  int n_ac = 0, n_au = 0, n_ic = 0, n_iu = 0;
  for (std::size_t i = 0; i < correct.size(); ++i) {
    const bool certain = entropies[i] <= threshold;
    if (correct[i])
      (certain ? n_ac : n_au)++;
    else
      (certain ? n_ic : n_iu)++;
  }
  return static_cast<double>(n_ac + n_iu) / static_cast<double>(n_ac + n_au + n_ic + n_iu);
}

UncertaintyReport pavpu_protocol(const Checkpoint& ck, const Graph& g, std::uint64_t seed,
                                 const PavpuOptions& opt) {
  require(g.has_labels(), "pavpu_protocol: labels required");
  const int groups = (opt.total_samples - opt.train_samples) / opt.group_size;
  require(groups >= 1, "pavpu_protocol: not enough samples for evaluation groups");
  require(opt.train_samples + groups * opt.group_size == opt.total_samples,
          "pavpu_protocol: samples must partition into train + k groups");

  const EmbeddingSamples samples =
      sample_embeddings(ck, g, opt.total_samples, derive_seed(seed, 1), opt.threads);

  std::vector<int> eval_nodes;
  if (auto it = g.splits.find(opt.eval_split); it != g.splits.end())
    eval_nodes = it->second;
  else
    for (int v = 0; v < g.n_nodes; ++v) eval_nodes.push_back(v);

  std::vector<int> train_nodes;
  if (auto it = g.splits.find("train"); it != g.splits.end())
    train_nodes = it->second;
  else
    train_nodes = eval_nodes;

  const ClassifierParams clf = mc_logreg_train(
      samples.subset(0, opt.train_samples), train_nodes, g.labels, g.num_classes(),
      opt.train_samples, opt.classifier_epochs, opt.classifier_lr, derive_seed(seed, 2));

  // mean probability over the disjoint evaluation groups
  Matrix mean_probs = Matrix::Zero(g.n_nodes, g.num_classes());
  for (int gi = 0; gi < groups; ++gi) {
    const EmbeddingSamples group =
        samples.subset(opt.train_samples + gi * opt.group_size, opt.group_size);
    mean_probs += mc_predict(group, clf);
  }
  mean_probs /= static_cast<Scalar>(groups);

  const std::vector<int> pred = argmax_rows(mean_probs);
  UncertaintyReport report;
  std::vector<bool> correct;
  std::vector<double> entropies;
  for (int v : eval_nodes) {
    const bool ok = pred[v] == g.labels[v];
    const double h = predictive_entropy(mean_probs, v);
    report.nodes.push_back({v, pred[v], ok, h});
    correct.push_back(ok);
    entropies.push_back(h);
  }
  report.accuracy = accuracy(pred, g.labels, eval_nodes);

  for (double th : opt.thresholds) {
    UncertaintyReport::ThresholdRow row{th, 0, 0, 0, 0, 0.0};
    for (std::size_t i = 0; i < correct.size(); ++i) {
      const bool certain = entropies[i] <= th;
      if (correct[i])
        (certain ? row.n_ac : row.n_au)++;
      else
        (certain ? row.n_ic : row.n_iu)++;
    }
    row.pavpu = pavpu(correct, entropies, th);
    report.rows.push_back(row);
  }
  return report;
}

std::vector<double> astd(const EmbeddingSamples& samples, const std::vector<int>& nodes) {
  require(samples.S >= 2, "astd: need at least two samples");
  std::vector<double> out;
  out.reserve(nodes.size());
  for (int v : nodes) {
    require(v >= 0 && v < samples.N, "astd: node out of range");
    double acc = 0.0;
    for (int d = 0; d < samples.D; ++d) {
      double mean = 0.0;
      for (int s = 0; s < samples.S; ++s) mean += samples.data[s](v, d);
      mean /= samples.S;
      double var = 0.0;
      for (int s = 0; s < samples.S; ++s) {
        const double dev = samples.data[s](v, d) - mean;
        var += dev * dev;
      }
      acc += std::sqrt(var / samples.S);  // population std
    }
    out.push_back(acc / samples.D);
  }
  return out;
}

AstdTable astd_khop_experiment(const Checkpoint& clean_ck, const Checkpoint& noisy_ck,
                               const Graph& clean_g, const Graph& noisy_g,
                               const std::vector<int>& noised_nodes, int k_max, int S,
                               std::uint64_t seed, int threads) {
  require(clean_g.n_nodes == noisy_g.n_nodes, "astd_khop_experiment: node count mismatch");
  // common random numbers: the same mask draws on both sides cancel the
  // Monte-Carlo noise in the difference (and make identical inputs give 0)
  const EmbeddingSamples clean_s =
      sample_embeddings(clean_ck, clean_g, S, derive_seed(seed, 1), threads);
  const EmbeddingSamples noisy_s =
      sample_embeddings(noisy_ck, noisy_g, S, derive_seed(seed, 1), threads);

  const auto rings = khop_rings(clean_g, noised_nodes, k_max);
  AstdTable table;
  for (int k = 0; k <= k_max; ++k) {
    AstdTable::HopRow row{k, false, 0.0, {}};
    if (!rings[k].empty()) {
      const std::vector<double> a_clean = astd(clean_s, rings[k]);
      const std::vector<double> a_noisy = astd(noisy_s, rings[k]);
      row.present = true;
      for (std::size_t i = 0; i < rings[k].size(); ++i) {
        const double d = a_noisy[i] - a_clean[i];
        row.diffs.push_back(d);
        row.mean_diff += d;
      }
      row.mean_diff /= static_cast<double>(row.diffs.size());
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_pavpu_csv(const std::filesystem::path& file, const UncertaintyReport& report) {
  std::ofstream out(file);
  require(out.good(), "write_pavpu_csv: cannot open " + file.string());
  out << "threshold,n_ac,n_au,n_ic,n_iu,pavpu\n";
  for (const auto& r : report.rows)
    out << fmt(r.threshold) << "," << r.n_ac << "," << r.n_au << "," << r.n_ic << ","
        << r.n_iu << "," << fmt(r.pavpu) << "\n";
}

void write_astd_csv(const std::filesystem::path& file, const AstdTable& table) {
  std::ofstream out(file);
  require(out.good(), "write_astd_csv: cannot open " + file.string());
  out << "hop,count,mean_diff\n";
  for (const auto& r : table.rows) {
    out << r.hop << "," << r.diffs.size() << ",";
    out << (r.present ? fmt(r.mean_diff) : "missing") << "\n";
  }
}

json pavpu_summary(const UncertaintyReport& report) {
  double mean_entropy = 0.0;
  for (const auto& n : report.nodes) mean_entropy += n.entropy;
  if (!report.nodes.empty()) mean_entropy /= static_cast<double>(report.nodes.size());
  json rows = json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"threshold", r.threshold},
                    {"n_ac", r.n_ac},
                    {"n_au", r.n_au},
                    {"n_ic", r.n_ic},
                    {"n_iu", r.n_iu},
                    {"pavpu", r.pavpu}});
  return json{{"accuracy", report.accuracy},
              {"mean_normalized_entropy", mean_entropy},
              {"evaluated_nodes", report.nodes.size()},
              {"thresholds", rows}};
}

json astd_summary(const AstdTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    json row{{"hop", r.hop}, {"count", r.diffs.size()}};
    if (r.present)
      row["mean_diff"] = r.mean_diff;
    else
      row["mean_diff"] = nullptr;  // empty ring reported as missing, not zero
    rows.push_back(row);
  }
  return json{{"hops", rows}};
}

}  // namespace bgcl
