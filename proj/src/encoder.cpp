#include "bgcl/encoder.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "bgcl/init.hpp"
#include "bgcl/rng.hpp"

namespace bgcl {

using nlohmann::json;

Activation activation_from_string(const std::string& s) {
  if (s == "relu" || s == "ReLU") return Activation::ReLU;
  if (s == "prelu" || s == "PReLU") return Activation::PReLU;
  throw std::invalid_argument("unknown activation '" + s + "' (expected relu|prelu)");
}

std::string to_string(Activation a) { return a == Activation::ReLU ? "relu" : "prelu"; }

std::vector<int> EncoderParams::layer_dims() const {
  std::vector<int> dims;
  dims.push_back(static_cast<int>(weights.front().rows()));
  for (const Matrix& w : weights) dims.push_back(static_cast<int>(w.cols()));
  return dims;
}

std::vector<std::pair<std::string, Matrix*>> EncoderParams::named_tensors(bool include_head) {
  std::vector<std::pair<std::string, Matrix*>> out;
  for (std::size_t l = 0; l < weights.size(); ++l) out.emplace_back("w" + std::to_string(l), &weights[l]);
  for (std::size_t l = 0; l < prelu_slopes.size(); ++l)
    out.emplace_back("slope" + std::to_string(l), &prelu_slopes[l]);
  if (include_head) {
    out.emplace_back("head_w1", &head_w1);
    out.emplace_back("head_b1", &head_b1);
    out.emplace_back("head_w2", &head_w2);
    out.emplace_back("head_b2", &head_b2);
  }
  return out;
}

void EncoderParams::validate() const {
  require(!weights.empty(), "EncoderParams: no layers");
  for (std::size_t l = 0; l + 1 < weights.size(); ++l)
    require(weights[l].cols() == weights[l + 1].rows(), "EncoderParams: layer dims do not chain");
  if (activation == Activation::PReLU)
    require(prelu_slopes.size() == weights.size(), "EncoderParams: one slope per layer");
  const Eigen::Index d = weights.back().cols();
  require(head_w1.rows() == d && head_w2.cols() == d, "EncoderParams: head dims mismatch");
  for (const Matrix& w : weights) require(all_finite(w), "EncoderParams: non-finite weight");
}

EncoderParams init_encoder(int input_dim, int hidden_dim, int latent_dim, int layers,
                           Activation act, std::uint64_t seed) {
  require(layers >= 1, "init_encoder: layers must be >= 1");
  RngSplitter split(seed);
  EncoderParams p;
  p.activation = act;
  std::vector<int> dims{input_dim};
  for (int l = 0; l < layers - 1; ++l) dims.push_back(hidden_dim);
  dims.push_back(latent_dim);
  for (int l = 0; l < layers; ++l) {
    RngStream rng = split.stream({0, static_cast<std::uint64_t>(l)});
    p.weights.push_back(xavier_init(dims[l], dims[l + 1], rng));
  }
  if (act == Activation::PReLU)
    for (int l = 0; l < layers; ++l) p.prelu_slopes.push_back(Matrix::Constant(1, 1, 0.25));
  RngStream h1 = split.stream({1, 0});
  RngStream h2 = split.stream({1, 1});
  p.head_w1 = xavier_init(latent_dim, latent_dim, h1);
  p.head_b1 = Matrix::Zero(1, latent_dim);
  p.head_w2 = xavier_init(latent_dim, latent_dim, h2);
  p.head_b2 = Matrix::Zero(1, latent_dim);
  return p;
}

std::vector<std::pair<int, int>> block_spans(int f_out, int B) {
  std::vector<std::pair<int, int>> s;
  s.reserve(B);
  for (int beta = 0; beta < B; ++beta) {
    const int lo = static_cast<int>(static_cast<long>(beta) * f_out / B);
    const int hi = static_cast<int>((static_cast<long>(beta) + 1) * f_out / B);
    s.emplace_back(lo, hi);
  }
  return s;
}

int block_of(int j, int f_out, int B) {
  const auto spans = block_spans(f_out, B);
  for (int beta = 0; beta < B; ++beta)
    if (j >= spans[beta].first && j < spans[beta].second) return beta;
  throw std::out_of_range("block_of: column outside [0, f_out)");
}

EncoderVars make_encoder_vars(Tape& t, const EncoderParams& p, bool requires_grad) {
  EncoderVars v;
  v.activation = p.activation;
  for (const Matrix& w : p.weights) v.weights.push_back(t.input(w, requires_grad));
  for (const Matrix& s : p.prelu_slopes) v.slopes.push_back(t.input(s, requires_grad));
  v.head_w1 = t.input(p.head_w1, requires_grad);
  v.head_b1 = t.input(p.head_b1, requires_grad);
  v.head_w2 = t.input(p.head_w2, requires_grad);
  v.head_b2 = t.input(p.head_b2, requires_grad);
  return v;
}

Var masked_spmm(Tape& t, const Csr& a, Var mask, Var dense) {
  require(dense.rows() == a.n, "masked_spmm: dense row count != csr dimension");
  const bool masked = mask.valid();
  if (masked)
    require(mask.rows() == a.nnz() && mask.cols() == 1, "masked_spmm: mask must be nnz x 1");

  const int id = dense.id();
  const int im = masked ? mask.id() : -1;
  const Csr* ap = &a;
  const Matrix& x = t.val(id);
  Matrix out = Matrix::Zero(a.n, x.cols());
  if (masked) {
    const Matrix& m = t.val(im);
    for (int r = 0; r < a.n; ++r)
      for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
        out.row(r) += (a.values[k] * m(k, 0)) * x.row(a.col_idx[k]);
  } else {
    for (int r = 0; r < a.n; ++r)
      for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
        out.row(r) += a.values[k] * x.row(a.col_idx[k]);
  }

  const bool rg = t.requires_grad(id) || (masked && t.requires_grad(im));
  return t.emplace(std::move(out), rg, [ap, id, im](Tape& t, int self) {
    const Csr& a = *ap;
    const Matrix& g = t.adjoint(self);
    const Matrix& x = t.val(id);
    if (t.requires_grad(id)) {
      Matrix gx = Matrix::Zero(x.rows(), x.cols());
      if (im >= 0) {
        const Matrix& m = t.val(im);
        for (int r = 0; r < a.n; ++r)
          for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
            gx.row(a.col_idx[k]) += (a.values[k] * m(k, 0)) * g.row(r);
      } else {
        for (int r = 0; r < a.n; ++r)
          for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
            gx.row(a.col_idx[k]) += a.values[k] * g.row(r);
      }
      t.accumulate(id, gx);
    }
    if (im >= 0 && t.requires_grad(im)) {
      Matrix gm = Matrix::Zero(a.nnz(), 1);
      for (int r = 0; r < a.n; ++r)
        for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
          gm(k, 0) = a.values[k] * g.row(r).dot(x.row(a.col_idx[k]));
      t.accumulate(im, gm);
    }
  });
}

namespace {

Var apply_activation(Var z, Activation act, Var slope) {
  if (act == Activation::ReLU) return relu(z);
  return prelu(z, slope);
}

}  // namespace

Var gcn_aug_layer_tape(Tape& t, const Csr& anorm, Var u, Var w, Var slope, Activation act,
                       const LayerMaskVars* masks, int B) {
  Var input = u;
  if (masks && masks->column_mask.valid()) input = mul_row_bcast(input, masks->column_mask);
  Var uw = matmul(input, w);
  Var z;
  if (masks && !masks->block_masks.empty()) {
    const int f_out = static_cast<int>(w.cols());
    const auto spans = block_spans(f_out, B);
    require(static_cast<int>(masks->block_masks.size()) >= B,
            "gcn_aug_layer: need one mask per block");
    std::vector<Var> parts;
    for (int beta = 0; beta < B; ++beta) {
      const auto [lo, hi] = spans[beta];
      if (lo >= hi) continue;
      parts.push_back(masked_spmm(t, anorm, masks->block_masks[beta], slice_cols(uw, lo, hi)));
    }
    z = parts.size() == 1 ? parts.front() : hconcat(parts);
  } else {
    z = masked_spmm(t, anorm, Var{}, uw);
  }
  return apply_activation(z, act, slope);
}

Var encode_tape(Tape& t, const Csr& anorm, Var x, const EncoderVars& enc,
                const std::vector<LayerMaskVars>* masks, int B) {
  if (masks)
    require(masks->size() == enc.weights.size(), "encode_tape: mask layer count mismatch");
  Var u = x;
  for (std::size_t l = 0; l < enc.weights.size(); ++l) {
    Var slope = enc.slopes.empty() ? Var{} : enc.slopes[l];
    u = gcn_aug_layer_tape(t, anorm, u, enc.weights[l], slope, enc.activation,
                           masks ? &(*masks)[l] : nullptr, B);
  }
  return u;
}

Var project_tape(Tape& t, Var h, const EncoderVars& enc) {
  Var z1 = elu(add_row_bcast(matmul(h, enc.head_w1), enc.head_b1));
  return add_row_bcast(matmul(z1, enc.head_w2), enc.head_b2);
}

namespace {

std::vector<LayerMaskVars> mask_vars_from(Tape& t, const MaskSet& m) {
  std::vector<LayerMaskVars> out(m.layers.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    if (m.layers[l].column_keep.size() > 0)
      out[l].column_mask = t.constant(m.layers[l].column_keep.transpose());
    for (const Vector& bm : m.layers[l].block_masks) out[l].block_masks.push_back(t.constant(bm));
  }
  return out;
}

}  // namespace

Matrix gcn_aug_layer(const Csr& anorm, const Matrix& u, const Matrix& w,
                     const MaskSet::Layer& masks, Activation act, double slope, int B) {
  Tape t;
  MaskSet one;
  one.layers.push_back(masks);
  one.pi.push_back(1.0);
  auto mv = mask_vars_from(t, one);
  Var sv = t.constant(Matrix::Constant(1, 1, slope));
  return gcn_aug_layer_tape(t, anorm, t.constant(u), t.constant(w), sv, act, &mv[0], B).value();
}

Matrix encode_view(const Graph& g, const NormalizedAdjacency& anorm,
                   const EncoderParams& p, const MaskSet* masks, int B) {
  if (masks)
    require(static_cast<int>(masks->layers.size()) == p.layer_count(),
            "encode_view: mask layer count mismatch");
  Tape t;
  EncoderVars enc = make_encoder_vars(t, p, false);
  Var x = t.constant(g.features);
  if (!masks) return encode_tape(t, anorm.csr, x, enc, nullptr, B).value();
  auto mv = mask_vars_from(t, *masks);
  return encode_tape(t, anorm.csr, x, enc, &mv, B).value();
}

Matrix project(const Matrix& h, const EncoderParams& p) {
  Tape t;
  EncoderVars enc = make_encoder_vars(t, p, false);
  return project_tape(t, t.constant(h), enc).value();
}

Matrix connection_weight_view(const Matrix& w, const MaskSet::Layer& masks,
                              const NormalizedAdjacency& anorm, const Matrix& u,
                              Activation act, double slope, int B) {
  const Csr& a = anorm.csr;
  const int n = a.n;
  const int f_in = static_cast<int>(w.rows());
  const int f_out = static_cast<int>(w.cols());
  require(u.cols() == f_in && u.rows() == n, "connection_weight_view: shape mismatch");

  Matrix pre = Matrix::Zero(n, f_out);
  for (int v = 0; v < n; ++v) {
    for (int k = a.row_ptr[v]; k < a.row_ptr[v + 1]; ++k) {
      const int nb = a.col_idx[k];  // u ∈ {N(v), v}
      const double c_vu = a.values[k];
      for (int j = 0; j < f_out; ++j) {
        double z;
        if (masks.column_keep.size() > 0) {
          // FeatureDrop form: W~[i,j] = keep_i * W[i,j], edge mask all-ones
          double acc = 0.0;
          for (int i = 0; i < f_in; ++i) acc += u(nb, i) * (masks.column_keep[i] * w(i, j));
          pre(v, j) += c_vu * acc;
          continue;
        }
        z = masks.block_masks[block_of(j, f_out, B)][k];
        double acc = 0.0;
        for (int i = 0; i < f_in; ++i) acc += u(nb, i) * (z * w(i, j));
        pre(v, j) += c_vu * acc;
      }
    }
  }
  if (act == Activation::ReLU)
    return pre.cwiseMax(0.0);
  return (pre.array().max(0.0) + slope * pre.array().min(0.0)).matrix();
}

// ---- checkpoint ------------------------------------------------------------

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

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

void write_blob(std::ostream& out, const Matrix& m) {
  // row-major storage, little-endian doubles (x86/arm64 LE hosts)
  static_assert(sizeof(Scalar) == 8);
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(Scalar)));
}

Matrix read_blob(std::istream& in, int rows, int cols) {
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(m.size() * sizeof(Scalar)));
  require(in.good(), "checkpoint: truncated blob");
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ck) {
  std::ofstream out(file, std::ios::binary);
  require(out.good(), "save_checkpoint: cannot open " + file.string());

  EncoderParams enc = ck.encoder;  // named_tensors needs mutable access
  json blobs = json::array();
  for (auto& [name, m] : enc.named_tensors())
    blobs.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}});
  json header{{"layer_dims", ck.encoder.layer_dims()},
              {"blocks", ck.blocks},
              {"activation", to_string(ck.encoder.activation)},
              {"prior_c", ck.aug.prior_c},
              {"temperature", ck.aug.temperature},
              {"log_a", {ck.aug.log_a[0], ck.aug.log_a[1]}},
              {"log_b", {ck.aug.log_b[0], ck.aug.log_b[1]}},
              {"blobs", blobs}};
  const std::string hs = header.dump();

  out.write("BGCL", 4);
  write_u32(out, kCheckpointVersion);
  write_u32(out, static_cast<std::uint32_t>(hs.size()));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (auto& [name, m] : enc.named_tensors()) write_blob(out, *m);
  require(out.good(), "save_checkpoint: write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  require(in.good(), "load_checkpoint: cannot open " + file.string());
  char magic[4];
  in.read(magic, 4);
  require(in.good() && std::memcmp(magic, "BGCL", 4) == 0, "load_checkpoint: bad magic");
  const std::uint32_t version = read_u32(in);
  require(version == kCheckpointVersion, "load_checkpoint: unsupported version");
  const std::uint32_t hlen = read_u32(in);
  std::string hs(hlen, '\0');
  in.read(hs.data(), hlen);
  require(in.good(), "load_checkpoint: truncated header");
  const json header = json::parse(hs);

  Checkpoint ck;
  ck.blocks = header.at("blocks").get<int>();
  ck.encoder.activation = activation_from_string(header.at("activation").get<std::string>());
  ck.aug.prior_c = header.at("prior_c").get<double>();
  ck.aug.temperature = header.at("temperature").get<double>();
  ck.aug.log_a[0] = header.at("log_a")[0].get<std::vector<double>>();
  ck.aug.log_a[1] = header.at("log_a")[1].get<std::vector<double>>();
  ck.aug.log_b[0] = header.at("log_b")[0].get<std::vector<double>>();
  ck.aug.log_b[1] = header.at("log_b")[1].get<std::vector<double>>();

  std::map<std::string, Matrix> loaded;
  for (const auto& b : header.at("blobs")) {
    const std::string name = b.at("name").get<std::string>();
    loaded[name] = read_blob(in, b.at("rows").get<int>(), b.at("cols").get<int>());
  }
  const auto dims = header.at("layer_dims").get<std::vector<int>>();
  const int L = static_cast<int>(dims.size()) - 1;
  for (int l = 0; l < L; ++l) ck.encoder.weights.push_back(loaded.at("w" + std::to_string(l)));
  if (ck.encoder.activation == Activation::PReLU)
    for (int l = 0; l < L; ++l)
      ck.encoder.prelu_slopes.push_back(loaded.at("slope" + std::to_string(l)));
  ck.encoder.head_w1 = loaded.at("head_w1");
  ck.encoder.head_b1 = loaded.at("head_b1");
  ck.encoder.head_w2 = loaded.at("head_w2");
  ck.encoder.head_b2 = loaded.at("head_b2");
  ck.encoder.validate();
  return ck;
}

}  // namespace bgcl
