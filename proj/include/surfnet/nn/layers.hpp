#pragma once

#include "surfnet/nn/tensor.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace surfnet::nn {

/// Trainable array with its accumulated gradient and momentum buffer.
struct Param {
  std::string name;
  Tensor value, grad, velocity;

  Param() = default;
  Param(std::string n, std::vector<int> shape) : name(std::move(n)), value(shape), grad(shape), velocity(shape) {}
};

/// A differentiable layer. forward() caches what backward() needs, so calls
/// must alternate per sample. backward() accumulates parameter gradients and
/// returns the gradient with respect to the input.
class Module {
public:
  explicit Module(std::string name) : name_(std::move(name)) {}
  virtual ~Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;

  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void parameters(std::vector<Param*>&) {}
  virtual nlohmann::json describe() const = 0;
  /// Number of weight layers (convolutions and fully connected).
  virtual int weight_layers() const { return 0; }

  const std::string& name() const { return name_; }

protected:
  std::string name_;
};

using ModulePtr = std::unique_ptr<Module>;

/// Cross-correlation with zero padding. Weights (out, in, k, k).
class Conv2d : public Module {
public:
  Conv2d(std::string name, int in, int out, int kernel, int stride, int pad);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void parameters(std::vector<Param*>& out) override;
  nlohmann::json describe() const override;
  int weight_layers() const override { return 1; }

  /// Weights N(0, gain / fan_in), zero bias. Gain 2 suits rectified
  /// inputs; shortcuts on the signed residual stream use 1.
  void init_he(std::mt19937_64& rng, double gain = 2.0);
  void init_zero();
  Param& weight() { return w_; }
  Param& bias() { return b_; }
  double& w(int o, int i, int a, int b) { return w_.value[((static_cast<std::size_t>(o) * in_ + i) * k_ + a) * k_ + b]; }
  std::vector<int> output_shape(const std::vector<int>& in) const;

private:
  int in_, out_, k_, stride_, pad_;
  Param w_, b_;
  std::vector<int> in_shape_;
  Buffer cols_;  // im2col of the last input, (in*k*k) x (ho*wo)
  int ho_ = 0, wo_ = 0;
};

/// Transposed convolution with stride equal to the kernel size and no
/// cropping: every input pixel paints a k x k output patch. Weights
/// (in, out, k, k).
class ConvTranspose2d : public Module {
public:
  ConvTranspose2d(std::string name, int in, int out, int kernel);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void parameters(std::vector<Param*>& out) override;
  nlohmann::json describe() const override;
  int weight_layers() const override { return 1; }

  void init_he(std::mt19937_64& rng, double gain = 2.0);
  void init_zero();
  Param& weight() { return w_; }
  Param& bias() { return b_; }
  double& w(int i, int o, int a, int b) { return w_.value[((static_cast<std::size_t>(i) * out_ + o) * k_ + a) * k_ + b]; }

private:
  int in_, out_, k_;
  Param w_, b_;
  Tensor x_;
};

/// y = W x + b on rank-1 tensors. Weights (out, in).
class Linear : public Module {
public:
  Linear(std::string name, int in, int out);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void parameters(std::vector<Param*>& out) override;
  nlohmann::json describe() const override;
  int weight_layers() const override { return 1; }

  void init_he(std::mt19937_64& rng);
  void init_zero();
  Param& weight() { return w_; }
  Param& bias() { return b_; }

private:
  int in_, out_;
  Param w_, b_;
  Tensor x_;
};

/// max(x, leak * x); leak 0 is a plain ReLU.
class LeakyReLU : public Module {
public:
  LeakyReLU(std::string name, double leak) : Module(std::move(name)), leak_(leak) {}
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  nlohmann::json describe() const override;
  double leak() const { return leak_; }

private:
  double leak_;
  Tensor x_;
};

class Reshape : public Module {
public:
  Reshape(std::string name, std::vector<int> shape) : Module(std::move(name)), shape_(std::move(shape)) {}
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  nlohmann::json describe() const override;

private:
  std::vector<int> shape_;
  std::vector<int> in_shape_;
};

class Sequential : public Module {
public:
  explicit Sequential(std::string name) : Module(std::move(name)) {}
  Module& add(ModulePtr m) {
    layers_.push_back(std::move(m));
    return *layers_.back();
  }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void parameters(std::vector<Param*>& out) override;
  nlohmann::json describe() const override;
  int weight_layers() const override;
  std::size_t size() const { return layers_.size(); }
  Module& operator[](std::size_t i) { return *layers_[i]; }

private:
  std::vector<ModulePtr> layers_;
};

enum class BlockKind { Standard, Up, Down };

/// y = branch(x) + shortcut(x); the shortcut is the identity when null.
class ResidualBlock : public Module {
public:
  ResidualBlock(std::string name, BlockKind kind, std::unique_ptr<Sequential> branch, ModulePtr shortcut);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void parameters(std::vector<Param*>& out) override;
  nlohmann::json describe() const override;
  int weight_layers() const override;
  BlockKind kind() const { return kind_; }
  Sequential& branch() { return *branch_; }
  Module* shortcut() { return shortcut_.get(); }

private:
  BlockKind kind_;
  std::unique_ptr<Sequential> branch_;
  ModulePtr shortcut_;
};

/// conv3x3 -> activation -> conv3x3 with identity shortcut. The last conv is
/// zero-initialized, so a fresh block is the identity map.
std::unique_ptr<ResidualBlock> standard_block(const std::string& name, int channels, double leak,
                                              std::mt19937_64& rng);
/// conv3x3 stride 2 pad 1 -> activation -> conv3x3; shortcut conv1x1 stride 2.
std::unique_ptr<ResidualBlock> down_block(const std::string& name, int in, int out, double leak,
                                          std::mt19937_64& rng);
/// convT2x2 upsample 2 -> activation -> conv3x3; shortcut convT2x2.
std::unique_ptr<ResidualBlock> up_block(const std::string& name, int in, int out, double leak,
                                        std::mt19937_64& rng);

}  // namespace surfnet::nn
