#pragma once

#include "surfnet/nn/network.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

namespace surfnet::nn {

struct LossResult {
  double value = 0.0;
  Tensor grad;
};

/// L = sum over pixels of (|C| (u - g))^2, gradient 2 C^2 (u - g).
LossResult curvature_weighted_loss(const Tensor& pred, const Tensor& target, const Tensor& curvature);
/// L = sum over pixels of (u - g)^2.
LossResult squared_loss(const Tensor& pred, const Tensor& target);

/// |C| rescaled so that mean(C^2) = 1; all ones when C vanishes.
Tensor normalized_weights(const Tensor& curvature);

/// How a sample's per-pixel terms combine: summed as written in the loss, or
/// averaged over pixels.
enum class Reduction { Sum, Mean };

struct TrainConfig {
  double learning_rate = 0.01;
  int decay_every = 5;
  double decay_factor = 10.0;
  double momentum = 0.9;
  int epochs = 15;
  int batch_size = 16;
  std::uint64_t seed = 0;
  bool curvature_weighted = true;
  Reduction reduction = Reduction::Mean;

  void validate() const;
};

/// Learning rate of a 1-based epoch.
double scheduled_lr(const TrainConfig& config, int epoch);

struct Sample {
  Tensor input;
  Tensor target;
  /// Per-pixel loss weights (already normalized); empty means uniform.
  Tensor weight;
};

struct EpochStat {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
};

/// Per-sample loss, weighted or not, reduced over pixels.
LossResult sample_loss(const Tensor& pred, const Sample& sample, bool weighted, Reduction reduction = Reduction::Mean);

/// Minibatch SGD with momentum: v = mu v + g, w -= lr v, where g is the
/// batch-mean gradient. The sample order is reshuffled every epoch from
/// config.seed. Throws Error(Numeric) as soon as a loss is not finite.
std::vector<EpochStat> train(Network& net, const std::vector<Sample>& data, const TrainConfig& config,
                             const std::function<void(const EpochStat&)>& on_epoch = {});

/// Mean per-sample loss without touching the parameters.
double evaluate(Network& net, const std::vector<Sample>& data, bool weighted, Reduction reduction = Reduction::Mean);

/// Multiplies every target by rms / rms(targets) and returns that factor (1
/// when the targets vanish). A network trained on the result predicts
/// target * factor.
double standardize_targets(std::vector<Sample>& data, double rms = 0.35);

void save_loss_csv(const std::vector<EpochStat>& curve, const std::filesystem::path& path);

}  // namespace surfnet::nn
