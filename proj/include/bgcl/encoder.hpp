#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "bgcl/augment.hpp"
#include "bgcl/graph.hpp"
#include "bgcl/tape.hpp"
#include "bgcl/types.hpp"

namespace bgcl {

enum class Activation { ReLU, PReLU };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

// Shared two-view encoder weights plus the projection head.
struct EncoderParams {
  Activation activation = Activation::ReLU;
  std::vector<Matrix> weights;       // layer l: F_l x F_{l+1}
  std::vector<Matrix> prelu_slopes;  // 1x1 per layer when PReLU
  Matrix head_w1, head_b1, head_w2, head_b2;

  int layer_count() const { return static_cast<int>(weights.size()); }
  std::vector<int> layer_dims() const;
  // name -> tensor, in a fixed order (drives Adam and checkpoint blobs)
  std::vector<std::pair<std::string, Matrix*>> named_tensors(bool include_head = true);
  void validate() const;
};

EncoderParams init_encoder(int input_dim, int hidden_dim, int latent_dim, int layers,
                           Activation act, std::uint64_t seed);

// Output-feature blocks: contiguous spans [lo, hi) covering [0, f_out),
// possibly empty when B > f_out.
std::vector<std::pair<int, int>> block_spans(int f_out, int B);
int block_of(int j, int f_out, int B);

// ---- tape forward ---------------------------------------------------------

struct EncoderVars {
  Activation activation;
  std::vector<Var> weights;
  std::vector<Var> slopes;
  Var head_w1, head_b1, head_w2, head_b2;
};

EncoderVars make_encoder_vars(Tape& t, const EncoderParams& p, bool requires_grad);

// (A ⊙ mask) · dense over the CSR support. mask is an nnz-vector Var or an
// invalid Var for the unmasked product. The Csr must outlive the tape.
Var masked_spmm(Tape& t, const Csr& a, Var mask, Var dense);

struct LayerMaskVars {
  std::vector<Var> block_masks;  // per output block (may repeat one Var)
  Var column_mask;               // 1 x F_l when the layer is column-masked
};

// One generalized-augmentation layer: per output block β,
// out[:, β] = act((Anorm ⊙ mask_β) · U · W[:, β]).
Var gcn_aug_layer_tape(Tape& t, const Csr& anorm, Var u, Var w, Var slope, Activation act,
                       const LayerMaskVars* masks, int B);

Var encode_tape(Tape& t, const Csr& anorm, Var x, const EncoderVars& enc,
                const std::vector<LayerMaskVars>* masks, int B);

Var project_tape(Tape& t, Var h, const EncoderVars& enc);

// ---- plain (inference) entry points ---------------------------------------

Matrix gcn_aug_layer(const Csr& anorm, const Matrix& u, const Matrix& w,
                     const MaskSet::Layer& masks, Activation act, double slope, int B);

// masks == nullptr is the deterministic mode and equals all-ones masks bitwise.
Matrix encode_view(const Graph& g, const NormalizedAdjacency& anorm,
                   const EncoderParams& p, const MaskSet* masks, int B);

Matrix project(const Matrix& h, const EncoderParams& p);

// Node-wise evaluation through connection-specific weights
// W~(l,u,v) = Z~[v,u] * W; the layer-equivalence oracle route.
Matrix connection_weight_view(const Matrix& w, const MaskSet::Layer& masks,
                              const NormalizedAdjacency& anorm, const Matrix& u,
                              Activation act, double slope, int B);

// ---- checkpoint ------------------------------------------------------------

struct Checkpoint {
  EncoderParams encoder;
  AugmentationParams aug;
  int blocks = 1;
};

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace bgcl
