#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bgcl/sparse.hpp"
#include "bgcl/types.hpp"

namespace bgcl {

// Undirected attributed graph. Edges are stored canonically (u < v, sorted,
// deduplicated, no self-loops); self-loops enter only during normalization.
struct Graph {
  int n_nodes = 0;
  std::vector<std::pair<int, int>> edges;
  Matrix features;                               // N x F0
  std::vector<int> labels;                       // empty when absent, else size N
  std::map<std::string, std::vector<int>> splits;

  bool has_labels() const { return !labels.empty(); }
  int num_classes() const;
  int feature_dim() const { return static_cast<int>(features.cols()); }
  std::vector<std::vector<int>> adjacency_lists() const;
  void validate() const;
};

// Entries 1/sqrt(d~u d~v) over the self-loop-augmented support,
// d~ = degree in A + I. Symmetric by construction.
struct NormalizedAdjacency {
  Csr csr;
  int nnz() const { return csr.nnz(); }
};

Graph load_graph(const std::filesystem::path& dir);
void save_graph(const Graph& g, const std::filesystem::path& dir);

NormalizedAdjacency normalize_adjacency(const Graph& g);

// Stochastic block model fixture. Features are a block-indicator pattern
// scaled by `signal` plus unit Gaussian noise; labels are block ids;
// nodes are split 10/90 into train/test.
Graph generate_sbm(int n_per_block, int n_blocks, double p_in, double p_out,
                   int feature_dim, double signal, std::uint64_t seed);

// Replace the attribute rows of `nodes` with iid N(0, sigma^2) draws.
Graph inject_noise(const Graph& g, const std::vector<int>& nodes, double sigma,
                   std::uint64_t seed);

// ring_k = nodes at shortest-path distance exactly k from the seed set;
// ring_0 = seeds. Unreachable nodes appear in no ring.
std::vector<std::vector<int>> khop_rings(const Graph& g, const std::vector<int>& seeds,
                                         int k_max);

}  // namespace bgcl
