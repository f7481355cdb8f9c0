#include "surfnet/nn/train.hpp"

#include "surfnet/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace surfnet::nn {

namespace {

void check_same(const Tensor& a, const Tensor& b, const char* what) {
  require(a.shape == b.shape, ErrorCode::InvalidArgument,
          std::string(what) + ": shape " + shape_string(a.shape) + " vs " + shape_string(b.shape));
}

}  // namespace

LossResult curvature_weighted_loss(const Tensor& pred, const Tensor& target, const Tensor& curvature) {
  check_same(pred, target, "loss target");
  check_same(pred, curvature, "loss curvature");
  LossResult r{0.0, Tensor(pred.shape)};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double c = std::abs(curvature[i]);
    const double d = pred[i] - target[i];
    const double e = c * d;
    r.value += e * e;
    r.grad[i] = 2.0 * c * c * d;
  }
  return r;
}

LossResult squared_loss(const Tensor& pred, const Tensor& target) {
  check_same(pred, target, "loss target");
  LossResult r{0.0, Tensor(pred.shape)};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    r.value += d * d;
    r.grad[i] = 2.0 * d;
  }
  return r;
}

Tensor normalized_weights(const Tensor& curvature) {
  Tensor w(curvature.shape, 1.0);
  if (curvature.size() == 0) return w;
  double ms = 0.0;
  for (double c : curvature.data) ms += c * c;
  ms /= static_cast<double>(curvature.size());
  if (!(ms > 0.0) || !std::isfinite(ms)) return w;
  const double s = 1.0 / std::sqrt(ms);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::abs(curvature[i]) * s;
  return w;
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0 && decay_every > 0 && decay_factor > 0.0 && momentum >= 0.0 && momentum < 1.0 &&
              epochs >= 1 && batch_size >= 1,
          ErrorCode::InvalidArgument, "train config: rates, epochs and batch size must be positive, momentum in [0, 1)");
}

double scheduled_lr(const TrainConfig& config, int epoch) {
  return config.learning_rate / std::pow(config.decay_factor, (epoch - 1) / config.decay_every);
}

LossResult sample_loss(const Tensor& pred, const Sample& sample, bool weighted, Reduction reduction) {
  LossResult r = weighted && sample.weight.size() ? curvature_weighted_loss(pred, sample.target, sample.weight)
                                                  : squared_loss(pred, sample.target);
  if (reduction == Reduction::Sum) return r;
  const double inv = 1.0 / static_cast<double>(pred.size());
  r.value *= inv;
  for (auto& g : r.grad.data) g *= inv;
  return r;
}

std::vector<EpochStat> train(Network& net, const std::vector<Sample>& data, const TrainConfig& config,
                             const std::function<void(const EpochStat&)>& on_epoch) {
  config.validate();
  require(!data.empty(), ErrorCode::InvalidArgument, "train: empty dataset");
  const auto params = net.parameters();
  for (Param* p : params) p->velocity.fill(0.0);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<EpochStat> curve;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = scheduled_lr(config, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      net.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = data[order[k]];
        const Tensor pred = net.forward(s.input);
        const LossResult loss = sample_loss(pred, s, config.curvature_weighted, config.reduction);
        if (!std::isfinite(loss.value))
          fail(ErrorCode::Numeric, "training diverged: non-finite loss in epoch " + std::to_string(epoch));
        total += loss.value;
        net.backward(loss.grad);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (Param* p : params)
        for (std::size_t i = 0; i < p->value.size(); ++i) {
          double& v = p->velocity[i];
          v = config.momentum * v + p->grad[i] * inv;
          p->value[i] -= lr * v;
        }
    }
    EpochStat st{epoch, total / static_cast<double>(data.size()), lr};
    curve.push_back(st);
    if (on_epoch) on_epoch(st);
  }
  net.trained = true;
  return curve;
}

double evaluate(Network& net, const std::vector<Sample>& data, bool weighted, Reduction reduction) {
  require(!data.empty(), ErrorCode::InvalidArgument, "evaluate: empty dataset");
  double total = 0.0;
  for (const Sample& s : data) total += sample_loss(net.forward(s.input), s, weighted, reduction).value;
  return total / static_cast<double>(data.size());
}

double standardize_targets(std::vector<Sample>& data, double rms) {
  double ss = 0.0;
  std::size_t n = 0;
  for (const Sample& s : data) {
    for (double v : s.target.data) ss += v * v;
    n += s.target.size();
  }
  if (n == 0 || !(ss > 0.0) || !std::isfinite(ss)) return 1.0;
  const double f = rms / std::sqrt(ss / static_cast<double>(n));
  for (Sample& s : data)
    for (double& v : s.target.data) v *= f;
  return f;
}

void save_loss_csv(const std::vector<EpochStat>& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
  out.precision(17);
  out << "epoch,mean_loss,lr\n";
  for (const auto& e : curve) out << e.epoch << ',' << e.mean_loss << ',' << e.lr << '\n';
}

}  // namespace surfnet::nn
