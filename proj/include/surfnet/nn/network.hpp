#pragma once

#include "surfnet/nn/layers.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace surfnet::nn {

enum class NetKind { ImageToGim, ParamToResidualGim };

std::string to_string(NetKind kind);
NetKind net_kind_from_string(const std::string& s);

/// Hyperparameters of one per-channel generator. Widths are listed from the
/// finest encoder level to the coarsest (image net) and from the coarsest
/// decoder level to the finest (both nets); empty means derived from
/// base_width.
struct NetworkSpec {
  NetKind kind = NetKind::ImageToGim;
  std::string channel = "x";
  // image -> GIM
  int input_channels = 1;
  int input_res = 128;
  int bottleneck = 8;
  std::vector<int> encoder_widths;
  // param -> residual GIM
  int param_dim = 0;
  int hidden = 128;
  int coarse = 4;
  // shared
  int gim_res = 64;
  int base_width = 8;
  int max_width = 64;
  std::vector<int> decoder_widths;
  int standard_per_group = 2;
  bool paper_depth = false;
  double up_leak = 0.2;
  double down_leak = 0.0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static NetworkSpec from_json(const nlohmann::json& j);
};

/// Default desk-scale specs.
NetworkSpec image_to_gim_spec(const std::string& channel, int input_res = 128, int gim_res = 64,
                              int input_channels = 1);
NetworkSpec param_to_residual_gim_spec(const std::string& channel, int param_dim, int gim_res = 64);

/// Main-path weight layer counts targeted by paper_depth.
constexpr int kPaperImageDepth = 102;
constexpr int kPaperParamDepth = 65;

class Network {
public:
  /// Builds the layer graph and initializes it from spec.seed.
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  Tensor forward(const Tensor& x) { return body_.forward(x); }
  Tensor backward(const Tensor& dy) { return body_.backward(dy); }
  std::vector<Param*> parameters();
  void zero_grad();
  std::size_t parameter_count();

  std::vector<int> input_shape() const;
  std::vector<int> output_shape() const;
  nlohmann::json describe() const { return body_.describe(); }
  /// Convolution and fully connected layers on the main path (projection
  /// shortcuts excluded).
  int depth() const { return body_.weight_layers() - projections_; }
  int weight_layers() const { return body_.weight_layers(); }
  Sequential& body() { return body_; }

  bool trained = false;

private:
  NetworkSpec spec_;
  Sequential body_;
  int projections_ = 0;
};

/// Image net: stem conv3x3 -> down groups to the bottleneck -> up groups to
/// gim_res -> conv3x3 head with one output channel.
std::unique_ptr<Network> build_image_to_gim(const NetworkSpec& spec);
/// Param net: FC -> ReLU -> FC -> ReLU -> reshape (w, coarse, coarse) -> up
/// groups -> zero-initialized conv3x3 head emitting one residual channel.
std::unique_ptr<Network> build_param_to_residual_gim(const NetworkSpec& spec);

/// One header line of JSON (spec, graph, parameter table, trained flag),
/// then the parameters as raw little-endian float64 in table order.
void save_checkpoint(Network& net, const std::filesystem::path& path);
std::unique_ptr<Network> load_checkpoint(const std::filesystem::path& path);

}  // namespace surfnet::nn
