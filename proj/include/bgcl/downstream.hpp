#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bgcl/encoder.hpp"
#include "bgcl/graph.hpp"
#include "bgcl/types.hpp"

namespace bgcl {

// S Monte-Carlo draws of the latent node matrix.
struct EmbeddingSamples {
  int S = 0;
  int N = 0;
  int D = 0;
  std::vector<Matrix> data;
  std::uint64_t seed = 0;

  EmbeddingSamples subset(int from, int count) const;
  void validate() const;
};

// S independent hard-mask forward passes: per pass, pi is drawn from the
// learned view-o posterior per layer, then masks ~ Bernoulli(pi).
EmbeddingSamples sample_embeddings(const Checkpoint& ck, const Graph& g, int S,
                                   std::uint64_t seed, int threads = 1);

// Mask-free pass; equals the all-ones-mask pass exactly.
Matrix deterministic_embed(const Checkpoint& ck, const Graph& g);

struct ClassifierParams {
  Matrix w;  // (D+1) x C, bias row last
};

enum class MixtureGranularity { PerNode, Dataset };

// Mixture log-likelihood of the labels on the given nodes under the first K
// samples, as a tape expression in w (used by training and by tests).
Var mc_mixture_loglik_var(Tape& t, const EmbeddingSamples& samples,
                          const std::vector<int>& nodes, const std::vector<int>& labels,
                          int K, Var w, MixtureGranularity granularity);

double mc_mixture_loglik(const EmbeddingSamples& samples, const std::vector<int>& nodes,
                         const std::vector<int>& labels, int K, const ClassifierParams& clf,
                         MixtureGranularity granularity);

// Adam ascent on the mixture log-likelihood over the train nodes.
ClassifierParams mc_logreg_train(const EmbeddingSamples& samples,
                                 const std::vector<int>& train_nodes,
                                 const std::vector<int>& labels, int n_classes, int K,
                                 int epochs, double lr, std::uint64_t seed,
                                 MixtureGranularity granularity = MixtureGranularity::PerNode);

// Mean over samples of softmax(H_i W); rows sum to one.
Matrix mc_predict(const EmbeddingSamples& samples, const ClassifierParams& clf);

std::vector<int> argmax_rows(const Matrix& probs);

void save_embeddings(const std::filesystem::path& file, const EmbeddingSamples& samples);
EmbeddingSamples load_embeddings(const std::filesystem::path& file);

}  // namespace bgcl
