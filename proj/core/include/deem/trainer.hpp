#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "deem/core_types.hpp"
#include "deem/errors.hpp"
#include "deem/multinomial_layer.hpp"
#include "deem/rbm.hpp"
#include "deem/sampler.hpp"

namespace deem {

/// Stack of multinomial layers feeding an identifiable RBM with one hidden
/// unit. `class_map[p]` is the observed label assigned to latent class p.
struct DeemModel {
  std::vector<MultinomialLayer> layers;
  RbmParams irbm;
  std::optional<std::vector<int>> class_map;

  int num_classes() const noexcept { return irbm.num_classes(); }
  std::size_t units() const noexcept { return irbm.visible_units(); }
  /// Throws ShapeMismatch if layer and iRBM sizes disagree or class_map is not a bijection.
  void validate() const;
};

/// iRBM whose hidden logits count votes: w(l, l, i) = 1, every other free
/// entry N(0, sigma^2).
RbmParams init_irbm_majority_vote(int num_classes, std::size_t units, double sigma, std::uint64_t seed);

/// Identity layers plus the majority-vote iRBM; seeds come from named sub-streams of `config.seed`.
DeemModel make_model(int num_classes, std::size_t units, const RunConfig& config);

struct ForwardPass {
  std::vector<LayerCache> caches;
  Eigen::MatrixXd visible;           // iRBM input, (K*d) x B
  FreeEnergyBatch irbm;              // free energy and hidden posterior
};

ForwardPass model_forward(const DeemModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs);

struct ModelGradients {
  std::vector<LayerGradients> layers;
  RbmGradients irbm;

  static ModelGradients zeros_like(const DeemModel& model);
  void add_scaled(const ModelGradients& other, double scale);
};

/// Free energy of the whole model at every input column, the gradient of
/// `scale * sum_s F(x_s)` w.r.t. all parameters (frozen iRBM entries zeroed),
/// and dF(x_s)/dx_s per column.
struct EnergyAndGrads {
  Eigen::VectorXd free_energy;
  ModelGradients params;
  Eigen::MatrixXd input_grad;
  Eigen::MatrixXd hidden_posterior;
};

EnergyAndGrads model_free_energy_and_grads(const DeemModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                           double scale = 1.0);

/// U = -F(x) and dU/dx, as the sampler wants it. The model must outlive the function.
EnergyFunction model_energy_function(const DeemModel& model);

struct EnergyPoint {
  double positive = 0.0;
  double negative = 0.0;
  double difference = 0.0;
};

/// Per-epoch mean free energies of data (positive) and sampler output
/// (negative). `initial` is measured on the untouched model before any update.
struct EnergyTrace {
  EnergyPoint initial;
  std::vector<double> positive;
  std::vector<double> negative;
  std::vector<double> difference;
  std::vector<double> acceptance_rate;

  std::size_t epochs() const noexcept { return positive.size(); }
};

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(const std::string& what, EnergyTrace trace) : Error(what), trace_(std::move(trace)) {}
  const EnergyTrace& trace() const noexcept { return trace_; }

 private:
  EnergyTrace trace_;
};

struct TrainOptions {
  /// Called after every epoch with the current (unmapped) model.
  std::function<void(std::size_t epoch, const DeemModel&)> on_epoch;
};

struct TrainResult {
  DeemModel model;
  EnergyTrace trace;
  /// Latent classes never chosen by argmax on the training set.
  std::vector<int> dead_units;
};

/// Energy-loss SGD: minimise mean F(x_pos) - mean F(x_neg) over mini-batches,
/// negatives drawn by DMALA chains started at the batch (or persistent
/// chains). Fits the class map against majority vote afterwards.
TrainResult train(DeemModel model, const OneHotBatch& data, const RunConfig& config, const TrainOptions& options = {});

/// Latent argmax of the hidden posterior, no class map applied.
LabelVector predict_latent(const DeemModel& model, const OneHotBatch& data);

/// Fits class_map by Hungarian assignment of latent predictions against majority vote.
void fit_class_map(DeemModel& model, const OneHotBatch& data);

/// phi(argmax h). Throws UnfittedModel without a class map.
LabelVector infer(const DeemModel& model, const OneHotBatch& data);

/// Per-sample hidden posterior (K x n), latent class order.
Eigen::MatrixXd posterior(const DeemModel& model, const OneHotBatch& data);

}  // namespace deem
