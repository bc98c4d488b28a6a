#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bgcl/encoder.hpp"
#include "bgcl/graph.hpp"
#include "bgcl/objective.hpp"
#include "bgcl/rng.hpp"

namespace bgcl {

struct RunConfig {
  double lr_w = 5e-4;
  double lr_a = 1e-3;
  double lambda = 5e-9;
  int blocks = 8;
  int epochs = 250;
  int hidden_dim = 256;
  int latent_dim = 128;
  int layers = 2;
  std::string activation = "relu";  // relu | prelu
  double tau = 0.4;
  double c = 0.0;  // prior hyperparameter; 0 resolves to `layers` (Beta(1,1) prior)
  double temperature = 0.3;
  std::uint64_t seed = 1;
  std::string mode = "learned-aug";  // learned-aug | fixed-aug
  std::vector<double> fixed_pi;      // one value, or one per (view, layer) row-major
  std::string wd_scope = "all";      // all | encoder-only
  int threads = 1;

  double resolved_c() const { return c > 0.0 ? c : static_cast<double>(layers); }
  double fixed_pi_at(int view, int layer) const;
  void validate() const;

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct TrainLogRecord {
  int epoch = 0;
  LossBreakdown phase1;
  LossBreakdown phase2;
  std::array<std::vector<double>, 2> mean_pi;     // posterior mean per view per layer
  std::array<std::vector<double>, 2> sampled_pi;  // phase-1 draws per view per layer
  double wall_ms = 0.0;  // telemetry; not serialized so artifacts stay reproducible

  nlohmann::json to_json() const;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainLogRecord> log;
  bool aborted = false;
  std::string abort_reason;
};

// Two-phase alternating optimization: each epoch first Adam-descends the
// shared encoder weights on L_CNT + L_WD with fresh relaxed masks, then
// Adam-ascends the Kumaraswamy parameters on L_CNT - KL with fresh draws.
TrainResult train(const Graph& g, const RunConfig& cfg,
                  const std::function<void(const TrainLogRecord&)>& on_epoch = {});

// One reparameterized draw from the posterior of (view, layer).
double sampled_pi(const AugmentationParams& aug, int view, int layer, RngStream& rng);

}  // namespace bgcl
