#include "deem/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "deem/assignment.hpp"
#include "deem/rng.hpp"

namespace deem {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_inputs(const DeemModel& model, const Eigen::Ref<const MatrixXd>& inputs) {
  if (inputs.rows() != model.irbm.visible_bias().size()) throw ShapeMismatch("model input must have K*d rows");
}

void check_data(const DeemModel& model, const OneHotBatch& data) {
  if (data.num_classes() != model.num_classes() || data.units() != model.units())
    throw ShapeMismatch("data (K, d) does not match the model");
}

MatrixXd gather(const MatrixXd& source, std::span<const std::size_t> columns) {
  MatrixXd out(source.rows(), static_cast<Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) out.col(static_cast<Index>(c)) = source.col(static_cast<Index>(columns[c]));
  return out;
}

double mean_in_index_order(const std::vector<double>& values) {
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

bool all_finite(const ModelGradients& g) {
  for (const auto& layer : g.layers)
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
  return g.irbm.weights.allFinite() && g.irbm.visible_bias.allFinite() && g.irbm.hidden_bias.allFinite();
}

void apply_update(DeemModel& model, const ModelGradients& grad, double step) {
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    model.layers[l].weights().noalias() -= step * grad.layers[l].weights;
    model.layers[l].bias().noalias() -= step * grad.layers[l].bias;
  }
  model.irbm.weights().noalias() -= step * grad.irbm.weights;
  model.irbm.visible_bias().noalias() -= step * grad.irbm.visible_bias;
  model.irbm.hidden_bias().noalias() -= step * grad.irbm.hidden_bias;
}

// Hard one-hot starting points for negative chains.
MatrixXd chain_seeds(const OneHotBatch& data) {
  if (data.is_hard()) return data.matrix();
  return encode_one_hot(decode_argmax(data)).matrix();
}

// Mean positive and negative energy over the whole data set for the current model.
EnergyPoint measure_energies(const DeemModel& model, const OneHotBatch& data, const MatrixXd& seeds,
                             const RunConfig& config, Rng& rng) {
  const EnergyFunction target = model_energy_function(model);
  const std::size_t n = data.samples();
  std::vector<double> pos(n), neg(n);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += config.batch_size) {
    const std::size_t stop = std::min(n, start + config.batch_size);
    idx.resize(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    const VectorXd fp = model_forward(model, gather(data.matrix(), idx)).irbm.free_energy;
    ChainState chains = make_chains(target, model.num_classes(), model.units(), gather(seeds, idx));
    run_dmala(target, chains, config.sampler_steps, config.step_size_alpha, rng);
    for (std::size_t c = 0; c < idx.size(); ++c) {
      pos[idx[c]] = fp(static_cast<Index>(c));
      neg[idx[c]] = -chains.log_prob(static_cast<Index>(c));
    }
  }
  EnergyPoint point{mean_in_index_order(pos), mean_in_index_order(neg), 0.0};
  point.difference = point.positive - point.negative;
  return point;
}

}  // namespace

void DeemModel::validate() const {
  const int k = irbm.num_classes();
  const std::size_t d = irbm.visible_units();
  if (irbm.hidden_units() != 1 || !irbm.identifiable()) throw ShapeMismatch("DEEM needs an identifiable iRBM with one hidden unit");
  for (const auto& layer : layers)
    if (layer.num_classes() != k || layer.units() != d) throw ShapeMismatch("layer (K, d) does not match the iRBM");
  if (class_map && !is_permutation(*class_map, k)) throw ShapeMismatch("class map is not a bijection on the classes");
}

RbmParams init_irbm_majority_vote(int num_classes, std::size_t units, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidArgument("sigma must be nonnegative");
  RbmParams params(num_classes, units, 1, true);
  Rng rng(seed, "irbm_init");
  auto noise = [&] { return sigma > 0.0 ? rng.normal(0.0, sigma) : 0.0; };
  for (std::size_t i = 0; i < units; ++i) {
    for (int l = 1; l < num_classes; ++l) {
      params.a(l, i) = noise();
      for (int m = 1; m < num_classes; ++m) params.w(l, m, i, 0) = (l == m) ? 1.0 : noise();
    }
  }
  for (int m = 1; m < num_classes; ++m) params.b(m, 0) = noise();
  return params;
}

DeemModel make_model(int num_classes, std::size_t units, const RunConfig& config) {
  DeemModel model{{}, init_irbm_majority_vote(num_classes, units, config.irbm_noise_sigma, derive_seed(config.seed, "irbm")), std::nullopt};
  for (std::size_t l = 0; l < config.num_layers; ++l)
    model.layers.push_back(init_identity_noisy(num_classes, units, config.layer_noise_sigma,
                                               derive_seed(config.seed, "layer" + std::to_string(l))));
  return model;
}

ForwardPass model_forward(const DeemModel& model, const Eigen::Ref<const MatrixXd>& inputs) {
  check_inputs(model, inputs);
  ForwardPass pass;
  pass.caches.reserve(model.layers.size());
  MatrixXd current = inputs;
  for (const auto& layer : model.layers) {
    pass.caches.push_back(layer_forward(layer, current));
    current = pass.caches.back().output;
  }
  pass.visible = std::move(current);
  pass.irbm = free_energy_batch(model.irbm, pass.visible);
  return pass;
}

ModelGradients ModelGradients::zeros_like(const DeemModel& model) {
  ModelGradients g{{}, RbmGradients::zeros_like(model.irbm)};
  for (const auto& layer : model.layers) g.layers.push_back(LayerGradients::zeros_like(layer));
  return g;
}

void ModelGradients::add_scaled(const ModelGradients& other, double scale) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weights.noalias() += scale * other.layers[l].weights;
    layers[l].bias.noalias() += scale * other.layers[l].bias;
  }
  irbm.weights.noalias() += scale * other.irbm.weights;
  irbm.visible_bias.noalias() += scale * other.irbm.visible_bias;
  irbm.hidden_bias.noalias() += scale * other.irbm.hidden_bias;
}

EnergyAndGrads model_free_energy_and_grads(const DeemModel& model, const Eigen::Ref<const MatrixXd>& inputs,
                                           double scale) {
  ForwardPass pass = model_forward(model, inputs);
  EnergyAndGrads out{pass.irbm.free_energy, ModelGradients::zeros_like(model), {}, pass.irbm.hidden_posterior};
  accumulate_free_energy_param_grads(model.irbm, pass.visible, pass.irbm, scale, out.params.irbm);
  out.params.irbm.mask_frozen(model.irbm);

  // Per-sample gradients flow down unscaled; layer parameter sums are scaled at the end.
  MatrixXd upstream = free_energy_visible_grad(model.irbm, pass.irbm);
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    upstream = layer_backward(pass.caches[l], model.layers[l], upstream, out.params.layers[l]);
    out.params.layers[l].weights *= scale;
    out.params.layers[l].bias *= scale;
  }
  out.input_grad = std::move(upstream);
  return out;
}

EnergyFunction model_energy_function(const DeemModel& model) {
  return [&model](const MatrixXd& configs) {
    ForwardPass pass = model_forward(model, configs);
    MatrixXd upstream = free_energy_visible_grad(model.irbm, pass.irbm);
    for (std::size_t l = model.layers.size(); l-- > 0;)
      upstream = layer_input_grad(pass.caches[l], model.layers[l], upstream);
    return EnergyEvaluation{-pass.irbm.free_energy, -upstream};
  };
}

TrainResult train(DeemModel model, const OneHotBatch& data, const RunConfig& config, const TrainOptions& options) {
  config.validate();
  model.validate();
  check_data(model, data);

  const std::size_t n = data.samples();
  const MatrixXd seeds = chain_seeds(data);
  MatrixXd persistent;
  if (config.persistent_chains) persistent = seeds;

  Rng batch_rng(config.seed, "batches");
  Rng sampler_rng(config.seed, "sampler");
  Rng trace_rng(config.seed, "trace_sampler");

  TrainResult result{std::move(model), {}, {}};
  DeemModel& m = result.model;
  EnergyTrace& trace = result.trace;
  const EnergyFunction target = model_energy_function(m);

  trace.initial = measure_energies(m, data, seeds, config, trace_rng);
  if (!std::isfinite(trace.initial.difference))
    throw NonFiniteLoss("initial energies are not finite", trace);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> pos(n), neg(n);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), batch_rng.engine());
    SamplerStats stats;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(n, start + config.batch_size) - start);
      const double scale = 1.0 / static_cast<double>(idx.size());

      ChainState chains =
          make_chains(target, m.num_classes(), m.units(), gather(config.persistent_chains ? persistent : seeds, idx));
      const SamplerStats step_stats = run_dmala(target, chains, config.sampler_steps, config.step_size_alpha, sampler_rng);
      stats.accepted += step_stats.accepted;
      stats.proposals += step_stats.proposals;
      if (config.persistent_chains)
        for (std::size_t c = 0; c < idx.size(); ++c) persistent.col(static_cast<Index>(idx[c])) = chains.configs.col(static_cast<Index>(c));

      EnergyAndGrads positive = model_free_energy_and_grads(m, gather(data.matrix(), idx), scale);
      const EnergyAndGrads negative = model_free_energy_and_grads(m, chains.configs, scale);
      for (std::size_t c = 0; c < idx.size(); ++c) {
        pos[idx[c]] = positive.free_energy(static_cast<Index>(c));
        neg[idx[c]] = negative.free_energy(static_cast<Index>(c));
      }
      // d/dlambda [mean F(pos) - mean F(neg)]
      positive.params.add_scaled(negative.params, -1.0);
      if (!positive.free_energy.allFinite() || !negative.free_energy.allFinite() || !all_finite(positive.params))
        throw NonFiniteLoss("non-finite energy or gradient in epoch " + std::to_string(epoch + 1), trace);
      apply_update(m, positive.params, config.learning_rate);
    }
    trace.positive.push_back(mean_in_index_order(pos));
    trace.negative.push_back(mean_in_index_order(neg));
    trace.difference.push_back(trace.positive.back() - trace.negative.back());
    trace.acceptance_rate.push_back(stats.acceptance_rate());
    if (!std::isfinite(trace.difference.back()))
      throw NonFiniteLoss("non-finite mean energy in epoch " + std::to_string(epoch + 1), trace);
    if (options.on_epoch) options.on_epoch(epoch + 1, m);
  }

  fit_class_map(m, data);
  const LabelVector latent = predict_latent(m, data);
  std::vector<bool> used(static_cast<std::size_t>(m.num_classes()), false);
  for (int p : latent.data()) used[static_cast<std::size_t>(p)] = true;
  for (int c = 0; c < m.num_classes(); ++c)
    if (!used[static_cast<std::size_t>(c)]) result.dead_units.push_back(c);
  return result;
}

Eigen::MatrixXd posterior(const DeemModel& model, const OneHotBatch& data) {
  check_data(model, data);
  return model_forward(model, data.matrix()).irbm.hidden_posterior;
}

LabelVector predict_latent(const DeemModel& model, const OneHotBatch& data) {
  const MatrixXd post = posterior(model, data);
  std::vector<int> out(data.samples());
  for (Index c = 0; c < post.cols(); ++c) out[static_cast<std::size_t>(c)] = argmax_first(post.col(c));
  return {model.num_classes(), std::move(out)};
}

void fit_class_map(DeemModel& model, const OneHotBatch& data) {
  const LabelVector mv = majority_vote(decode_argmax(data));
  model.class_map = hungarian_class_map(predict_latent(model, data), mv);
}

LabelVector infer(const DeemModel& model, const OneHotBatch& data) {
  if (!model.class_map) throw UnfittedModel("model has no class map; train or fit it first");
  LabelVector latent = predict_latent(model, data);
  std::vector<int> out(latent.size());
  for (std::size_t s = 0; s < latent.size(); ++s) out[s] = (*model.class_map)[static_cast<std::size_t>(latent[s])];
  return {model.num_classes(), std::move(out)};
}

}  // namespace deem
