#include "bgcl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "bgcl/adam.hpp"
#include "bgcl/log.hpp"

namespace bgcl {

using nlohmann::json;

double RunConfig::fixed_pi_at(int view, int layer) const {
  if (fixed_pi.size() == 1) return fixed_pi[0];
  return fixed_pi.at(static_cast<std::size_t>(view) * layers + layer);
}

void RunConfig::validate() const {
  require(lr_w >= 0.0 && lr_a >= 0.0, "config: learning rates must be >= 0");
  require(lambda >= 0.0, "config: lambda must be >= 0");
  require(blocks >= 1, "config: blocks must be >= 1");
  require(epochs >= 1, "config: epochs must be >= 1");
  require(hidden_dim >= 1 && latent_dim >= 1, "config: dims must be >= 1");
  require(layers >= 1, "config: layers must be >= 1");
  require(tau > 0.0, "config: tau must be > 0");
  require(temperature > 0.0, "config: temperature must be > 0");
  require(c >= 0.0, "config: c must be >= 0");
  require(mode == "learned-aug" || mode == "fixed-aug", "config: mode must be learned-aug|fixed-aug");
  require(wd_scope == "all" || wd_scope == "encoder-only", "config: wd_scope must be all|encoder-only");
  require(threads >= 1, "config: threads must be >= 1");
  activation_from_string(activation);
  if (mode == "fixed-aug") {
    require(fixed_pi.size() == 1 || fixed_pi.size() == static_cast<std::size_t>(2 * layers),
            "config: fixed_pi needs 1 value or one per (view, layer)");
    for (double p : fixed_pi) require(p > 0.0 && p <= 1.0, "config: fixed_pi values must be in (0,1]");
  }
}

RunConfig RunConfig::from_json(const json& j) {
  static const std::set<std::string> known{
      "lr_w", "lr_a", "lambda", "blocks", "epochs", "hidden_dim", "latent_dim",
      "layers", "activation", "tau", "c", "temperature", "seed", "mode",
      "fixed_pi", "wd_scope", "threads"};
  for (const auto& [key, _] : j.items())
    require(known.count(key) > 0, "config: unknown key '" + key + "'");

  RunConfig c;
  auto get = [&](const char* k, auto& field) {
    if (j.contains(k)) field = j.at(k).get<std::decay_t<decltype(field)>>();
  };
  get("lr_w", c.lr_w);
  get("lr_a", c.lr_a);
  get("lambda", c.lambda);
  get("blocks", c.blocks);
  get("epochs", c.epochs);
  get("hidden_dim", c.hidden_dim);
  get("latent_dim", c.latent_dim);
  get("layers", c.layers);
  get("activation", c.activation);
  get("tau", c.tau);
  get("c", c.c);
  get("temperature", c.temperature);
  get("seed", c.seed);
  get("mode", c.mode);
  get("fixed_pi", c.fixed_pi);
  get("wd_scope", c.wd_scope);
  get("threads", c.threads);
  c.validate();
  return c;
}

json RunConfig::to_json() const {
  return json{{"lr_w", lr_w},
              {"lr_a", lr_a},
              {"lambda", lambda},
              {"blocks", blocks},
              {"epochs", epochs},
              {"hidden_dim", hidden_dim},
              {"latent_dim", latent_dim},
              {"layers", layers},
              {"activation", activation},
              {"tau", tau},
              {"c", c},
              {"temperature", temperature},
              {"seed", seed},
              {"mode", mode},
              {"fixed_pi", fixed_pi},
              {"wd_scope", wd_scope},
              {"threads", threads}};
}

namespace {

json breakdown_json(const LossBreakdown& b) {
  return json{{"l_cnt", b.l_cnt},
              {"l_wd", b.l_wd},
              {"kl_aug", b.kl_aug},
              {"kl_weights_diag", b.kl_weights_diag},
              {"total_phase1", b.total_phase1},
              {"phase2_objective", b.phase2_objective}};
}

}  // namespace

json TrainLogRecord::to_json() const {
  // wall_ms stays out of the serialized record: logs must be byte-identical
  // across same-seed re-runs.
  return json{{"epoch", epoch},
              {"phase1", breakdown_json(phase1)},
              {"phase2", breakdown_json(phase2)},
              {"mean_pi", {{"o", mean_pi[0]}, {"t", mean_pi[1]}}},
              {"sampled_pi", {{"o", sampled_pi[0]}, {"t", sampled_pi[1]}}}};
}

double sampled_pi(const AugmentationParams& aug, int view, int layer, RngStream& rng) {
  return kumaraswamy_sample(aug.a(view, layer), aug.b(view, layer), rng.uniform());
}

namespace {

constexpr double kLogClamp = 9.210340371976184;  // log(1e4)

struct PhaseDraws {
  std::array<std::vector<Var>, 2> pi_vars;
  std::array<std::vector<double>, 2> pi_values;
  std::array<std::vector<LayerMaskVars>, 2> masks;
};

// Draw pi per (view, layer), then one relaxed mask per (view, layer, block).
// Fixed pi == 1 produces exact all-ones masks so the unaugmented pass is
// reproduced bitwise.
PhaseDraws draw_phase(Tape& t, const Csr& support, const RunConfig& cfg,
                      const std::array<std::vector<Var>, 2>* a_vars,
                      const std::array<std::vector<Var>, 2>* b_vars,
                      const RngSplitter& split, int epoch, int phase) {
  const int L = cfg.layers;
  const int B = cfg.blocks;
  const int nnz = support.nnz();
  const bool learned = cfg.mode == "learned-aug";
  PhaseDraws out;
  for (int view = 0; view < 2; ++view) {
    out.pi_vars[view].resize(L);
    out.pi_values[view].resize(L);
    out.masks[view].resize(L);
    for (int l = 0; l < L; ++l) {
      Var pi;
      bool exact_ones = false;
      if (learned) {
        RngStream pirng = split.stream({1, static_cast<std::uint64_t>(epoch),
                                        static_cast<std::uint64_t>(phase), 0,
                                        static_cast<std::uint64_t>(view),
                                        static_cast<std::uint64_t>(l)});
        pi = kumaraswamy_pi(t, (*a_vars)[view][l], (*b_vars)[view][l], pirng.uniform());
      } else {
        const double p = cfg.fixed_pi_at(view, l);
        exact_ones = (p == 1.0);
        pi = t.constant_scalar(p);
      }
      out.pi_vars[view][l] = pi;
      out.pi_values[view][l] = pi.value()(0, 0);
      auto& lm = out.masks[view][l];
      for (int beta = 0; beta < B; ++beta) {
        if (exact_ones) {
          lm.block_masks.push_back(t.constant(Matrix::Ones(nnz, 1)));
          continue;
        }
        RngStream mrng = split.stream({1, static_cast<std::uint64_t>(epoch),
                                       static_cast<std::uint64_t>(phase), 1,
                                       static_cast<std::uint64_t>(view),
                                       static_cast<std::uint64_t>(l),
                                       static_cast<std::uint64_t>(beta)});
        Vector u(nnz);
        for (int k = 0; k < nnz; ++k) u[k] = mrng.uniform();
        lm.block_masks.push_back(concrete_mask(t, pi, u, cfg.temperature));
      }
    }
  }
  return out;
}

std::vector<Var> decay_scope(const EncoderVars& enc, const std::string& scope) {
  std::vector<Var> ws = enc.weights;
  if (scope == "all") {
    ws.push_back(enc.head_w1);
    ws.push_back(enc.head_b1);
    ws.push_back(enc.head_w2);
    ws.push_back(enc.head_b2);
  }
  return ws;
}

}  // namespace

TrainResult train(const Graph& g, const RunConfig& cfg,
                  const std::function<void(const TrainLogRecord&)>& on_epoch) {
  cfg.validate();
  g.validate();
  require(g.n_nodes >= 1, "train: empty graph");

  const NormalizedAdjacency anorm = normalize_adjacency(g);
  const Csr& support = anorm.csr;
  const int L = cfg.layers;
  const int B = cfg.blocks;
  const double c = cfg.resolved_c();
  const bool learned = cfg.mode == "learned-aug";
  const Activation act = activation_from_string(cfg.activation);

  RngSplitter split(cfg.seed);
  EncoderParams enc = init_encoder(g.feature_dim(), cfg.hidden_dim, cfg.latent_dim, L, act,
                                   derive_seed(cfg.seed, 0xe3c0de));
  AugmentationParams aug = AugmentationParams::neutral(L, c, cfg.temperature);

  AdamState adam_w;
  adam_w.lr = cfg.lr_w;
  AdamState adam_a;
  adam_a.lr = cfg.lr_a;

  TrainResult result;

  auto encoder_finite = [&] {
    for (auto& [name, m] : enc.named_tensors())
      if (!all_finite(*m)) return false;
    for (int v = 0; v < 2; ++v)
      for (int l = 0; l < L; ++l)
        if (!std::isfinite(aug.log_a[v][l]) || !std::isfinite(aug.log_b[v][l])) return false;
    return true;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const EncoderParams enc_snapshot = enc;
    const AugmentationParams aug_snapshot = aug;
    TrainLogRecord rec;
    rec.epoch = epoch;

    // ---- phase 1: step encoder weights on L_CNT + L_WD ----
    {
      Tape tape;
      EncoderVars ev = make_encoder_vars(tape, enc, /*requires_grad=*/true);
      std::array<std::vector<Var>, 2> a_vars, b_vars;
      if (learned) {
        for (int v = 0; v < 2; ++v) {
          for (int l = 0; l < L; ++l) {
            a_vars[v].push_back(tape.constant_scalar(aug.a(v, l)));
            b_vars[v].push_back(tape.constant_scalar(aug.b(v, l)));
          }
        }
      }
      PhaseDraws draws = draw_phase(tape, support, cfg, &a_vars, &b_vars, split, epoch, 1);

      Var x = tape.constant(g.features);
      Var h_o = encode_tape(tape, support, x, ev, &draws.masks[kViewO], B);
      Var h_t = encode_tape(tape, support, x, ev, &draws.masks[kViewT], B);
      Var lcnt = nt_xent_loss(tape, project_tape(tape, h_o, ev), project_tape(tape, h_t, ev),
                              cfg.tau);
      Var lwd = weight_decay_var(tape, decay_scope(ev, cfg.wd_scope), cfg.lambda);
      Var loss = add(lcnt, lwd);

      if (!std::isfinite(loss.scalar())) {
        result.aborted = true;
        result.abort_reason = "non-finite phase-1 loss at epoch " + std::to_string(epoch);
        logging::error(result.abort_reason);
        enc = enc_snapshot;
        aug = aug_snapshot;
        break;
      }

      rec.phase1.l_cnt = lcnt.scalar();
      rec.phase1.l_wd = lwd.scalar();
      rec.phase1.kl_aug = learned ? augmentation_kl(aug, support.nnz(), B) : 0.0;
      rec.phase1.kl_weights_diag = weight_kl_diag(enc.weights, draws.pi_values);
      rec.phase1.total_phase1 = rec.phase1.l_cnt + rec.phase1.l_wd;
      rec.phase1.phase2_objective = rec.phase1.l_cnt - rec.phase1.kl_aug;
      rec.sampled_pi = draws.pi_values;

      GradMap grads = tape.backward(loss);
      ParamSet pset, gset;
      auto tensors = enc.named_tensors();
      // named_tensors order matches make_encoder_vars construction order
      std::vector<Var> vars = ev.weights;
      for (Var s : ev.slopes) vars.push_back(s);
      vars.push_back(ev.head_w1);
      vars.push_back(ev.head_b1);
      vars.push_back(ev.head_w2);
      vars.push_back(ev.head_b2);
      for (std::size_t i = 0; i < tensors.size(); ++i) {
        pset[tensors[i].first] = *tensors[i].second;
        gset[tensors[i].first] = grads.at(vars[i].id());
      }
      adam_step(pset, gset, adam_w);
      for (auto& [name, m] : tensors) *m = pset[name];
    }

    // ---- phase 2: step augmentation parameters on L_CNT - KL ----
    if (learned) {
      Tape tape;
      EncoderVars ev = make_encoder_vars(tape, enc, /*requires_grad=*/false);
      std::array<std::vector<Var>, 2> la_vars, lb_vars, a_vars, b_vars;
      for (int v = 0; v < 2; ++v) {
        for (int l = 0; l < L; ++l) {
          la_vars[v].push_back(tape.parameter(Matrix::Constant(1, 1, aug.log_a[v][l])));
          lb_vars[v].push_back(tape.parameter(Matrix::Constant(1, 1, aug.log_b[v][l])));
          a_vars[v].push_back(exp(la_vars[v][l]));
          b_vars[v].push_back(exp(lb_vars[v][l]));
        }
      }
      PhaseDraws draws = draw_phase(tape, support, cfg, &a_vars, &b_vars, split, epoch, 2);

      Var x = tape.constant(g.features);
      Var h_o = encode_tape(tape, support, x, ev, &draws.masks[kViewO], B);
      Var h_t = encode_tape(tape, support, x, ev, &draws.masks[kViewT], B);
      Var lcnt = nt_xent_loss(tape, project_tape(tape, h_o, ev), project_tape(tape, h_t, ev),
                              cfg.tau);
      Var kl = augmentation_kl_var(tape, a_vars, b_vars, c, support.nnz(), B);
      Var root = sub(kl, lcnt);  // descend = ascend L_CNT - KL

      if (!std::isfinite(root.scalar())) {
        result.aborted = true;
        result.abort_reason = "non-finite phase-2 objective at epoch " + std::to_string(epoch);
        logging::error(result.abort_reason);
        enc = enc_snapshot;
        aug = aug_snapshot;
        break;
      }

      rec.phase2.l_cnt = lcnt.scalar();
      rec.phase2.l_wd = weight_decay(enc, cfg.lambda, cfg.wd_scope == "all");
      rec.phase2.kl_aug = kl.scalar();
      rec.phase2.kl_weights_diag = weight_kl_diag(enc.weights, draws.pi_values);
      rec.phase2.total_phase1 = rec.phase2.l_cnt + rec.phase2.l_wd;
      rec.phase2.phase2_objective = rec.phase2.l_cnt - rec.phase2.kl_aug;

      GradMap grads = tape.backward(root);
      ParamSet pset, gset;
      for (int v = 0; v < 2; ++v) {
        for (int l = 0; l < L; ++l) {
          const std::string sa = "log_a." + std::to_string(v) + "." + std::to_string(l);
          const std::string sb = "log_b." + std::to_string(v) + "." + std::to_string(l);
          pset[sa] = Matrix::Constant(1, 1, aug.log_a[v][l]);
          pset[sb] = Matrix::Constant(1, 1, aug.log_b[v][l]);
          gset[sa] = grads.at(la_vars[v][l].id());
          gset[sb] = grads.at(lb_vars[v][l].id());
        }
      }
      adam_step(pset, gset, adam_a);
      for (int v = 0; v < 2; ++v) {
        for (int l = 0; l < L; ++l) {
          double la = pset.at("log_a." + std::to_string(v) + "." + std::to_string(l))(0, 0);
          double lb = pset.at("log_b." + std::to_string(v) + "." + std::to_string(l))(0, 0);
          if (std::abs(la) > kLogClamp || std::abs(lb) > kLogClamp) {
            logging::info("epoch ", epoch, ": clamping Kumaraswamy parameters for view ", v,
                      " layer ", l);
            la = std::clamp(la, -kLogClamp, kLogClamp);
            lb = std::clamp(lb, -kLogClamp, kLogClamp);
          }
          aug.log_a[v][l] = la;
          aug.log_b[v][l] = lb;
        }
      }
    }

    if (!encoder_finite()) {
      result.aborted = true;
      result.abort_reason = "non-finite parameters after epoch " + std::to_string(epoch);
      logging::error(result.abort_reason);
      enc = enc_snapshot;
      aug = aug_snapshot;
      break;
    }

    for (int v = 0; v < 2; ++v) {
      rec.mean_pi[v].resize(L);
      for (int l = 0; l < L; ++l)
        rec.mean_pi[v][l] = learned ? aug.mean_pi(v, l) : cfg.fixed_pi_at(v, l);
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    logging::debug("epoch ", epoch, " l_cnt=", rec.phase1.l_cnt, " wall_ms=", rec.wall_ms);
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  result.checkpoint = Checkpoint{std::move(enc), std::move(aug), B};
  return result;
}

}  // namespace bgcl
