#include "bgcl/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bgcl/rng.hpp"

namespace bgcl {

namespace fs = std::filesystem;
using nlohmann::json;

int Graph::num_classes() const {
  int c = 0;
  for (int y : labels) c = std::max(c, y + 1);
  return c;
}

std::vector<std::vector<int>> Graph::adjacency_lists() const {
  std::vector<std::vector<int>> adj(n_nodes);
  for (auto [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());
  return adj;
}

void Graph::validate() const {
  require(n_nodes >= 0, "Graph: negative node count");
  require(features.rows() == n_nodes, "Graph: feature row count != node count");
  std::set<std::pair<int, int>> seen;
  for (auto [u, v] : edges) {
    require(u >= 0 && u < n_nodes && v >= 0 && v < n_nodes, "Graph: edge endpoint out of range");
    require(u < v, "Graph: edges must be canonical (u < v)");
    require(seen.insert({u, v}).second, "Graph: duplicate edge");
  }
  if (!labels.empty()) {
    require(static_cast<int>(labels.size()) == n_nodes, "Graph: label count != node count");
    for (int y : labels) require(y >= 0, "Graph: negative class id");
  }
  for (const auto& [name, idx] : splits)
    for (int v : idx) require(v >= 0 && v < n_nodes, "Graph: split '" + name + "' index out of range");
}

namespace {

[[noreturn]] void malformed(const fs::path& file, int line_no, const std::string& what) {
  throw std::runtime_error(file.string() + ":" + std::to_string(line_no) + ": " + what);
}

std::vector<std::pair<int, int>> read_edges(const fs::path& file, int n_nodes) {
  std::ifstream in(file);
  require(in.good(), "cannot open " + file.string());
  std::set<std::pair<int, int>> canon;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    long u, v;
    if (!(ls >> u >> v)) malformed(file, line_no, "expected 'u<TAB>v'");
    std::string rest;
    if (ls >> rest) malformed(file, line_no, "trailing tokens");
    if (u < 0 || v < 0 || u >= n_nodes || v >= n_nodes)
      malformed(file, line_no, "node id out of range");
    if (u == v) continue;  // self-loops are implicit, never stored
    canon.insert({static_cast<int>(std::min(u, v)), static_cast<int>(std::max(u, v))});
  }
  return {canon.begin(), canon.end()};
}

Matrix read_features(const fs::path& file) {
  std::ifstream in(file);
  require(in.good(), "cannot open " + file.string());
  std::vector<std::vector<Scalar>> rows;
  std::string line;
  int line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<Scalar> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      const std::string tok = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        malformed(file, line_no, "bad number '" + tok + "'");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (width == 0) width = row.size();
    if (row.size() != width) malformed(file, line_no, "row width mismatch");
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c) m(r, c) = rows[r][c];
  return m;
}

std::vector<int> read_labels(const fs::path& file, int n_nodes) {
  std::ifstream in(file);
  require(in.good(), "cannot open " + file.string());
  std::vector<int> labels(n_nodes, -1);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) malformed(file, line_no, "expected 'node_id,class_id'");
    long node, cls;
    try {
      node = std::stol(line.substr(0, comma));
      cls = std::stol(line.substr(comma + 1));
    } catch (const std::exception&) {
      malformed(file, line_no, "bad integer");
    }
    if (node < 0 || node >= n_nodes) malformed(file, line_no, "node id out of range");
    if (cls < 0) malformed(file, line_no, "negative class id");
    labels[node] = static_cast<int>(cls);
  }
  for (int y : labels)
    require(y >= 0, file.string() + ": labels.csv must cover every node when present");
  return labels;
}

}  // namespace

Graph load_graph(const fs::path& dir) {
  Graph g;
  g.features = read_features(dir / "features.csv");
  g.n_nodes = static_cast<int>(g.features.rows());
  g.edges = read_edges(dir / "edges.tsv", g.n_nodes);
  if (fs::exists(dir / "labels.csv")) g.labels = read_labels(dir / "labels.csv", g.n_nodes);
  if (fs::exists(dir / "splits.json")) {
    std::ifstream in(dir / "splits.json");
    json j = json::parse(in);
    for (auto& [name, arr] : j.items()) g.splits[name] = arr.get<std::vector<int>>();
  }
  g.validate();
  return g;
}

void save_graph(const Graph& g, const fs::path& dir) {
  g.validate();
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "edges.tsv");
    for (auto [u, v] : g.edges) out << u << "\t" << v << "\n";
  }
  {
    std::ofstream out(dir / "features.csv");
    char buf[64];
    for (Eigen::Index r = 0; r < g.features.rows(); ++r) {
      for (Eigen::Index c = 0; c < g.features.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", g.features(r, c));
        out << (c ? "," : "") << buf;
      }
      out << "\n";
    }
  }
  if (g.has_labels()) {
    std::ofstream out(dir / "labels.csv");
    for (int v = 0; v < g.n_nodes; ++v) out << v << "," << g.labels[v] << "\n";
  }
  if (!g.splits.empty()) {
    json j;
    for (const auto& [name, idx] : g.splits) j[name] = idx;
    std::ofstream out(dir / "splits.json");
    out << j.dump(2) << "\n";
  }
}

NormalizedAdjacency normalize_adjacency(const Graph& g) {
  const int n = g.n_nodes;
  std::vector<int> deg(n, 1);  // self-loop
  for (auto [u, v] : g.edges) {
    ++deg[u];
    ++deg[v];
  }
  std::vector<std::vector<int>> cols(n);
  for (int v = 0; v < n; ++v) cols[v].push_back(v);
  for (auto [u, v] : g.edges) {
    cols[u].push_back(v);
    cols[v].push_back(u);
  }
  Csr a;
  a.n = n;
  a.row_ptr.assign(n + 1, 0);
  for (int v = 0; v < n; ++v) {
    std::sort(cols[v].begin(), cols[v].end());
    a.row_ptr[v + 1] = a.row_ptr[v] + static_cast<int>(cols[v].size());
  }
  a.col_idx.reserve(a.row_ptr[n]);
  a.values.resize(a.row_ptr[n]);
  int k = 0;
  for (int v = 0; v < n; ++v) {
    for (int u : cols[v]) {
      a.col_idx.push_back(u);
      a.values[k++] = 1.0 / std::sqrt(static_cast<Scalar>(deg[v]) * static_cast<Scalar>(deg[u]));
    }
  }
  return NormalizedAdjacency{std::move(a)};
}

Graph generate_sbm(int n_per_block, int n_blocks, double p_in, double p_out,
                   int feature_dim, double signal, std::uint64_t seed) {
  require(n_per_block >= 1 && n_blocks >= 1 && feature_dim >= 1, "generate_sbm: bad sizes");
  require(p_in >= 0.0 && p_in <= 1.0 && p_out >= 0.0 && p_out <= 1.0, "generate_sbm: probabilities in [0,1]");
  require(signal >= 0.0, "generate_sbm: signal must be >= 0");

  RngSplitter split(seed);
  const int n = n_per_block * n_blocks;
  Graph g;
  g.n_nodes = n;
  g.labels.resize(n);
  for (int v = 0; v < n; ++v) g.labels[v] = v / n_per_block;

  RngStream edge_rng = split.stream({0});
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      const double p = (g.labels[u] == g.labels[v]) ? p_in : p_out;
      if (edge_rng.bernoulli(p)) g.edges.emplace_back(u, v);
    }
  }

  RngStream feat_rng = split.stream({1});
  g.features.resize(n, feature_dim);
  for (int v = 0; v < n; ++v) {
    const int b = g.labels[v];
    for (int j = 0; j < feature_dim; ++j) {
      const double indicator = (j % n_blocks == b) ? 1.0 : 0.0;
      g.features(v, j) = signal * indicator + feat_rng.normal();
    }
  }

  // 10/90 train/test split over a seeded shuffle
  RngStream split_rng = split.stream({2});
  std::vector<int> order(n);
  for (int v = 0; v < n; ++v) order[v] = v;
  for (int i = n - 1; i > 0; --i)
    std::swap(order[i], order[static_cast<int>(split_rng.below(static_cast<std::uint64_t>(i) + 1))]);
  const int n_train = std::max(1, n / 10);
  g.splits["train"] = {order.begin(), order.begin() + n_train};
  g.splits["test"] = {order.begin() + n_train, order.end()};
  std::sort(g.splits["train"].begin(), g.splits["train"].end());
  std::sort(g.splits["test"].begin(), g.splits["test"].end());
  g.validate();
  return g;
}

Graph inject_noise(const Graph& g, const std::vector<int>& nodes, double sigma,
                   std::uint64_t seed) {
  require(!nodes.empty(), "inject_noise: empty node set");
  for (int v : nodes) require(v >= 0 && v < g.n_nodes, "inject_noise: node index out of range");
  Graph out = g;
  RngSplitter split(seed);
  for (int v : nodes) {
    RngStream rng = split.stream({static_cast<std::uint64_t>(v)});
    for (Eigen::Index j = 0; j < out.features.cols(); ++j)
      out.features(v, j) = sigma * rng.normal();
  }
  return out;
}

std::vector<std::vector<int>> khop_rings(const Graph& g, const std::vector<int>& seeds,
                                         int k_max) {
  require(!seeds.empty(), "khop_rings: empty seed set");
  require(k_max >= 0, "khop_rings: k_max must be >= 0");
  const auto adj = g.adjacency_lists();
  std::vector<int> dist(g.n_nodes, -1);
  std::deque<int> queue;
  for (int s : seeds) {
    require(s >= 0 && s < g.n_nodes, "khop_rings: seed out of range");
    if (dist[s] != 0) {
      dist[s] = 0;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    for (int u : adj[v]) {
      if (dist[u] < 0) {
        dist[u] = dist[v] + 1;
        queue.push_back(u);
      }
    }
  }
  std::vector<std::vector<int>> rings(k_max + 1);
  for (int v = 0; v < g.n_nodes; ++v)
    if (dist[v] >= 0 && dist[v] <= k_max) rings[dist[v]].push_back(v);
  return rings;
}

}  // namespace bgcl
