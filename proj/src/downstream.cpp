#include "bgcl/downstream.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include <atomic>

#include "bgcl/adam.hpp"
#include "bgcl/augment.hpp"
#include "bgcl/init.hpp"
#include "bgcl/rng.hpp"
#include "bgcl/tape.hpp"
#include "bgcl/trainer.hpp"

namespace bgcl {

EmbeddingSamples EmbeddingSamples::subset(int from, int count) const {
  require(from >= 0 && count >= 1 && from + count <= S, "EmbeddingSamples: bad subset range");
  EmbeddingSamples out;
  out.S = count;
  out.N = N;
  out.D = D;
  out.seed = seed;
  out.data.assign(data.begin() + from, data.begin() + from + count);
  return out;
}

void EmbeddingSamples::validate() const {
  require(static_cast<int>(data.size()) == S, "EmbeddingSamples: sample count mismatch");
  for (const Matrix& m : data) {
    require(m.rows() == N && m.cols() == D, "EmbeddingSamples: shape mismatch");
    require(all_finite(m), "EmbeddingSamples: non-finite values");
  }
}

namespace {

MaskSet draw_hard_masks(const Checkpoint& ck, const Csr& support, const RngSplitter& split,
                        int sample_idx) {
  const int L = ck.encoder.layer_count();
  std::vector<double> pi(L);
  for (int l = 0; l < L; ++l) {
    RngStream pirng = split.stream({static_cast<std::uint64_t>(sample_idx), 0,
                                    static_cast<std::uint64_t>(l)});
    pi[l] = sampled_pi(ck.aug, kViewO, l, pirng);
  }
  // one stream per (sample, layer, block)
  MaskSet m;
  m.pi = pi;
  m.layers.resize(L);
  for (int l = 0; l < L; ++l) {
    m.layers[l].block_masks.resize(ck.blocks);
    for (int beta = 0; beta < ck.blocks; ++beta) {
      RngStream mrng = split.stream({static_cast<std::uint64_t>(sample_idx), 1,
                                     static_cast<std::uint64_t>(l),
                                     static_cast<std::uint64_t>(beta)});
      Vector mv(support.nnz());
      for (int k = 0; k < support.nnz(); ++k)
        mv[k] = mrng.bernoulli(pi[l]) ? 1.0 : 0.0;
      m.layers[l].block_masks[beta] = std::move(mv);
    }
  }
  return m;
}

}  // namespace

EmbeddingSamples sample_embeddings(const Checkpoint& ck, const Graph& g, int S,
                                   std::uint64_t seed, int threads) {
  require(S >= 1, "sample_embeddings: S must be >= 1");
  require(g.feature_dim() == ck.encoder.layer_dims().front(),
          "sample_embeddings: graph feature dim does not match checkpoint");
  const NormalizedAdjacency anorm = normalize_adjacency(g);
  RngSplitter split(seed);

  EmbeddingSamples out;
  out.S = S;
  out.N = g.n_nodes;
  out.D = static_cast<int>(ck.encoder.weights.back().cols());
  out.seed = seed;
  out.data.resize(S);

  auto run = [&](int s) {
    const MaskSet masks = draw_hard_masks(ck, anorm.csr, split, s);
    out.data[s] = encode_view(g, anorm, ck.encoder, &masks, ck.blocks);
  };

  if (threads <= 1 || S == 1) {
    for (int s = 0; s < S; ++s) run(s);
  } else {
    const int workers = std::min(threads, S);
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int s = next.fetch_add(1); s < S; s = next.fetch_add(1)) run(s);
      });
    for (auto& th : pool) th.join();
  }
  out.validate();
  return out;
}

Matrix deterministic_embed(const Checkpoint& ck, const Graph& g) {
  const NormalizedAdjacency anorm = normalize_adjacency(g);
  return encode_view(g, anorm, ck.encoder, nullptr, ck.blocks);
}

namespace {

Matrix with_bias(const Matrix& h, const std::vector<int>& rows) {
  Matrix x(static_cast<Eigen::Index>(rows.size()), h.cols() + 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)).head(h.cols()) = h.row(rows[i]);
    x(static_cast<Eigen::Index>(i), h.cols()) = 1.0;
  }
  return x;
}

}  // namespace

Var mc_mixture_loglik_var(Tape& t, const EmbeddingSamples& samples,
                          const std::vector<int>& nodes, const std::vector<int>& labels,
                          int K, Var w, MixtureGranularity granularity) {
  require(K >= 1 && K <= samples.S, "mc_mixture_loglik: K must be in [1, S]");
  require(!nodes.empty(), "mc_mixture_loglik: empty node set");
  std::vector<int> y;
  y.reserve(nodes.size());
  for (int v : nodes) {
    require(v >= 0 && v < samples.N, "mc_mixture_loglik: node out of range");
    y.push_back(labels.at(v));
  }

  std::vector<Var> log_p;  // per sample: |nodes| x 1 of log p(y_v | H_i, w)
  for (int i = 0; i < K; ++i) {
    Var x = t.constant(with_bias(samples.data[i], nodes));
    Var lsm = row_log_softmax(matmul(x, w));
    log_p.push_back(gather_cols(lsm, y));
  }
  const double log_k = std::log(static_cast<double>(K));
  if (granularity == MixtureGranularity::PerNode) {
    // sum_v log( (1/K) sum_i p(y_v | H_i) )
    Var m = K == 1 ? log_p.front() : hconcat(log_p);
    return affine(sum(row_lse(m)), 1.0, -log_k * static_cast<double>(nodes.size()));
  }
  // log( (1/K) sum_i prod_v p(y_v | H_i) ), evaluated in log space
  std::vector<Var> per_sample;
  for (Var lp : log_p) per_sample.push_back(sum(lp));
  Var s = K == 1 ? per_sample.front() : row_lse(hconcat(per_sample));
  return affine(s, 1.0, -log_k);
}

double mc_mixture_loglik(const EmbeddingSamples& samples, const std::vector<int>& nodes,
                         const std::vector<int>& labels, int K, const ClassifierParams& clf,
                         MixtureGranularity granularity) {
  Tape t;
  return mc_mixture_loglik_var(t, samples, nodes, labels, K, t.constant(clf.w), granularity)
      .scalar();
}

ClassifierParams mc_logreg_train(const EmbeddingSamples& samples,
                                 const std::vector<int>& train_nodes,
                                 const std::vector<int>& labels, int n_classes, int K,
                                 int epochs, double lr, std::uint64_t seed,
                                 MixtureGranularity granularity) {
  require(K >= 1 && K <= samples.S, "mc_logreg_train: K must be in [1, S]");
  require(!train_nodes.empty(), "mc_logreg_train: empty train split");
  require(n_classes >= 2, "mc_logreg_train: need at least two classes");

  RngStream rng(derive_seed(seed, 0xc1a55));
  ClassifierParams clf;
  clf.w = 0.01 * xavier_init(samples.D + 1, n_classes, rng);

  AdamState adam;
  adam.lr = lr;
  for (int e = 0; e < epochs; ++e) {
    Tape t;
    Var w = t.parameter(clf.w);
    Var obj = mc_mixture_loglik_var(t, samples, train_nodes, labels, K, w, granularity);
    Var root = neg(obj);  // maximize log-likelihood
    require(std::isfinite(root.scalar()), "mc_logreg_train: non-finite objective");
    GradMap grads = t.backward(root);
    ParamSet pset{{"w", clf.w}}, gset{{"w", grads.at(w.id())}};
    adam_step(pset, gset, adam);
    clf.w = pset["w"];
  }
  return clf;
}

Matrix mc_predict(const EmbeddingSamples& samples, const ClassifierParams& clf) {
  require(clf.w.rows() == samples.D + 1, "mc_predict: dimension mismatch");
  std::vector<int> all(samples.N);
  for (int v = 0; v < samples.N; ++v) all[v] = v;
  Matrix mean = Matrix::Zero(samples.N, clf.w.cols());
  for (int i = 0; i < samples.S; ++i) {
    Matrix logits = with_bias(samples.data[i], all) * clf.w;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const Scalar m = logits.row(r).maxCoeff();
      const Matrix e = (logits.row(r).array() - m).exp().matrix();
      mean.row(r) += e / e.sum();
    }
  }
  return mean / static_cast<Scalar>(samples.S);
}

std::vector<int> argmax_rows(const Matrix& probs) {
  std::vector<int> out(probs.rows());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    probs.row(r).maxCoeff(&best);
    out[r] = static_cast<int>(best);
  }
  return out;
}

namespace {

constexpr std::uint32_t kEmbeddingsVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_embeddings(const std::filesystem::path& file, const EmbeddingSamples& samples) {
  samples.validate();
  std::ofstream out(file, std::ios::binary);
  require(out.good(), "save_embeddings: cannot open " + file.string());
  out.write("BGCE", 4);
  write_u32(out, kEmbeddingsVersion);
  write_u32(out, static_cast<std::uint32_t>(samples.S));
  write_u32(out, static_cast<std::uint32_t>(samples.N));
  write_u32(out, static_cast<std::uint32_t>(samples.D));
  for (const Matrix& m : samples.data)
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(Scalar)));
  require(out.good(), "save_embeddings: write failed");
}

EmbeddingSamples load_embeddings(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  require(in.good(), "load_embeddings: cannot open " + file.string());
  char magic[4];
  in.read(magic, 4);
  require(in.good() && std::memcmp(magic, "BGCE", 4) == 0, "load_embeddings: bad magic");
  require(read_u32(in) == kEmbeddingsVersion, "load_embeddings: unsupported version");
  EmbeddingSamples s;
  s.S = static_cast<int>(read_u32(in));
  s.N = static_cast<int>(read_u32(in));
  s.D = static_cast<int>(read_u32(in));
  s.data.resize(s.S);
  for (Matrix& m : s.data) {
    m.resize(s.N, s.D);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(Scalar)));
  }
  require(in.good(), "load_embeddings: truncated file");
  s.validate();
  return s;
}

}  // namespace bgcl
