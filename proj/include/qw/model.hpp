#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qw/calendar.hpp"
#include "qw/tensor.hpp"

namespace qw {

struct ModelConfig {
  std::size_t channels = 2;        ///< state channels C
  std::size_t precip_channel = 0;  ///< channel supervised by the probabilistic head
  std::size_t num_bins = 5;        ///< K
  std::size_t hidden = 32;
  std::size_t blocks = 2;
  std::size_t encoder_hidden = 16;
  double tau_init = 1.0;
  double tau_min = 0.05;
  double step_scale = 1.0 / 32.0;  ///< conditioning feature = step * step_scale

  void validate() const;
};

/// Step index and periodic day-of-year fed to every scale-shift layer.
struct TemporalConditioning {
  double step = 0.0;
  double doy_sin = 0.0;
  double doy_cos = 1.0;

  static TemporalConditioning make(std::size_t step, const Date& valid_date,
                                   double step_scale);
};

/// Two consecutive normalised states [C,H,W].
struct StateWindow {
  Tensor previous;
  Tensor current;
};

/// Perturbation distribution parameters, each [C,H,W].
struct GaussianFieldParams {
  Var mu;
  Var log_sigma;
};

struct DualHeadOutput {
  Var regression;  ///< [C,H,W]
  Var logits;      ///< [K,H,W], before temperature
  Var probs;       ///< [K,H,W], softmax(logits / tau)
};

enum class RolloutMode { train, infer };

/// Per-channel z-score; the precipitation channel is log1p-transformed first.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::size_t precip_channel = 0;

  /// Fits statistics from raw [C,H,W] states.
  static Normalizer fit(std::span<const Tensor> states, std::size_t precip_channel);
  Tensor apply(const Tensor& raw) const;
  Tensor invert(const Tensor& normalized) const;
  double invert_value(std::size_t channel, double v) const;
};

/// Desk-scale dual-head forecaster with prior/posterior perturbation
/// encoders. Parameters live in one vector; names carry their group prefix
/// (trunk., reg_head., cls_head., prior., posterior., tau).
class Forecaster {
 public:
  Forecaster(const ModelConfig& config, std::size_t n_lat, std::size_t n_lon,
             std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::size_t n_lat() const { return n_lat_; }
  std::size_t n_lon() const { return n_lon_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::vector<Parameter*> parameter_ptrs();
  Parameter& parameter(const std::string& name);
  void zero_grad();

  GaussianFieldParams prior_params(Tape& tape, Var previous, Var current);
  GaussianFieldParams posterior_params(Tape& tape, Var current, Var next);

  /// current + mu + sigma * noise
  Var perturb(Var current, const GaussianFieldParams& theta, const Tensor& noise);

  DualHeadOutput forward(Tape& tape, Var previous, Var current,
                         const TemporalConditioning& cond);

  /// softmax(logits / max(tau, tau_min)) over the bin axis.
  Var probabilities(Tape& tape, Var logits);

  double temperature() const;

  /// Re-randomises every parameter (heads and encoders included). Used by
  /// gradient checks, which need non-zero heads.
  void randomize_all(std::uint64_t seed, double scale = 0.3);

 private:
  struct Encoder {
    std::size_t w1, b1, w2, b2;
  };
  struct Film {
    std::size_t w, b;
  };

  std::size_t add_param(std::string name, Shape shape);
  Var p(Tape& tape, std::size_t index) { return tape.param(params_[index]); }
  GaussianFieldParams encode(Tape& tape, const Encoder& enc, Var a, Var b);
  Var film(Tape& tape, const Film& f, Var cond, Var x);

  ModelConfig config_;
  std::size_t n_lat_, n_lon_;
  std::vector<Parameter> params_;

  std::size_t embed_w_, embed_b_;
  std::vector<std::size_t> block_w_, block_b_;
  std::vector<Film> block_film_;
  Film reg_film_, cls_film_;
  std::size_t reg_w_, reg_b_, cls_w_, cls_b_, tau_;
  Encoder prior_, posterior_;
};

/// Outputs of a rollout. Steps selected for gradients live on the caller's
/// tape; the remaining steps live on an internal no-grad tape.
struct RolloutResult {
  std::unique_ptr<Tape> scratch;
  GaussianFieldParams prior;
  GaussianFieldParams posterior;  ///< only set in train mode
  std::vector<DualHeadOutput> steps;
};

/// Divergence threshold on normalised state magnitude.
inline constexpr double kDivergenceLimit = 1e6;

struct RolloutRequest {
  const StateWindow* window = nullptr;
  const Tensor* next_state = nullptr;  ///< X^{t+1}; required in train mode
  std::size_t n_steps = 1;
  RolloutMode mode = RolloutMode::infer;
  Date init_date;
  const Tensor* noise = nullptr;  ///< [C,H,W] standard normal draw
  /// Steps (1-based) in [grad_from, grad_to] are recorded on the grad tape.
  std::size_t grad_from = 1;
  std::size_t grad_to = 0;
  /// false: steps 1..grad_to stay connected on the grad tape so gradients
  /// reach earlier steps through the fed-back states.
  bool detach_states = true;
};

/// Samples the perturbation once at initialisation (posterior in train mode,
/// prior in infer mode), then feeds regression outputs back autoregressively.
/// States are detached between steps unless detach_states is false.
RolloutResult rollout(Forecaster& model, Tape& grad_tape, const RolloutRequest& req);

}  // namespace qw
