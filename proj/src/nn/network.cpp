#include "surfnet/nn/network.hpp"

#include "surfnet/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace surfnet::nn {

std::string to_string(NetKind kind) {
  return kind == NetKind::ImageToGim ? "image_to_gim" : "param_to_residual_gim";
}

NetKind net_kind_from_string(const std::string& s) {
  if (s == "image_to_gim") return NetKind::ImageToGim;
  if (s == "param_to_residual_gim") return NetKind::ParamToResidualGim;
  fail(ErrorCode::Parse, "unknown network kind '" + s + "'");
}

nlohmann::json NetworkSpec::to_json() const {
  return {{"kind", to_string(kind)},
          {"channel", channel},
          {"input_channels", input_channels},
          {"input_res", input_res},
          {"bottleneck", bottleneck},
          {"encoder_widths", encoder_widths},
          {"param_dim", param_dim},
          {"hidden", hidden},
          {"coarse", coarse},
          {"gim_res", gim_res},
          {"base_width", base_width},
          {"max_width", max_width},
          {"decoder_widths", decoder_widths},
          {"standard_per_group", standard_per_group},
          {"paper_depth", paper_depth},
          {"up_leak", up_leak},
          {"down_leak", down_leak},
          {"seed", seed}};
}

NetworkSpec NetworkSpec::from_json(const nlohmann::json& j) {
  try {
    NetworkSpec s;
    s.kind = net_kind_from_string(j.at("kind").get<std::string>());
    s.channel = j.at("channel").get<std::string>();
    s.input_channels = j.at("input_channels").get<int>();
    s.input_res = j.at("input_res").get<int>();
    s.bottleneck = j.at("bottleneck").get<int>();
    s.encoder_widths = j.at("encoder_widths").get<std::vector<int>>();
    s.param_dim = j.at("param_dim").get<int>();
    s.hidden = j.at("hidden").get<int>();
    s.coarse = j.at("coarse").get<int>();
    s.gim_res = j.at("gim_res").get<int>();
    s.base_width = j.at("base_width").get<int>();
    s.max_width = j.at("max_width").get<int>();
    s.decoder_widths = j.at("decoder_widths").get<std::vector<int>>();
    s.standard_per_group = j.at("standard_per_group").get<int>();
    s.paper_depth = j.at("paper_depth").get<bool>();
    s.up_leak = j.at("up_leak").get<double>();
    s.down_leak = j.at("down_leak").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("network spec: ") + e.what());
  }
}

NetworkSpec image_to_gim_spec(const std::string& channel, int input_res, int gim_res, int input_channels) {
  NetworkSpec s;
  s.kind = NetKind::ImageToGim;
  s.channel = channel;
  s.input_res = input_res;
  s.gim_res = gim_res;
  s.input_channels = input_channels;
  return s;
}

NetworkSpec param_to_residual_gim_spec(const std::string& channel, int param_dim, int gim_res) {
  NetworkSpec s;
  s.kind = NetKind::ParamToResidualGim;
  s.channel = channel;
  s.param_dim = param_dim;
  s.gim_res = gim_res;
  return s;
}

namespace {

int log2_ratio(int big, int small, const std::string& what) {
  require(small > 0 && big >= small && big % small == 0 && std::has_single_bit(static_cast<unsigned>(big / small)),
          ErrorCode::InvalidArgument, what + ": " + std::to_string(big) + " is not " + std::to_string(small) + " times a power of two");
  return std::countr_zero(static_cast<unsigned>(big / small));
}

int level_width(const NetworkSpec& s, int level) {
  long w = static_cast<long>(s.base_width) << std::min(level, 20);
  return static_cast<int>(std::min<long>(w, s.max_width));
}

// Standard blocks per group. paper_depth spreads enough of them to reach the
// target main-path depth; fixed layers are those outside the groups.
std::vector<int> standard_counts(const NetworkSpec& s, int groups, int fixed_layers, int target) {
  std::vector<int> counts(groups, s.standard_per_group);
  if (!s.paper_depth || groups == 0) return counts;
  const int total = (target - fixed_layers - 2 * groups) / 2;
  require(total >= 0, ErrorCode::InvalidArgument, "paper depth unreachable with this geometry");
  for (int g = 0; g < groups; ++g) counts[g] = total / groups + (g < total % groups ? 1 : 0);
  return counts;
}

struct Builder {
  Sequential& seq;
  std::mt19937_64& rng;
  int projections = 0;

  void group(BlockKind kind, const std::string& name, int in, int out, double leak, int standards) {
    if (kind == BlockKind::Down) seq.add(down_block(name + ".down", in, out, leak, rng));
    else seq.add(up_block(name + ".up", in, out, leak, rng));
    ++projections;
    for (int i = 0; i < standards; ++i) seq.add(standard_block(name + ".std" + std::to_string(i + 1), out, leak, rng));
  }
};

}  // namespace

Network::Network(NetworkSpec spec) : spec_(std::move(spec)), body_(to_string(spec_.kind) + "." + spec_.channel) {
  NetworkSpec& s = spec_;
  require(s.base_width > 0 && s.max_width >= s.base_width && s.standard_per_group >= 0, ErrorCode::InvalidArgument,
          "network spec: invalid widths");
  std::mt19937_64 rng(s.seed);
  Builder b{body_, rng};
  if (s.kind == NetKind::ImageToGim) {
    require(s.input_channels > 0, ErrorCode::InvalidArgument, "network spec: input_channels must be positive");
    const int downs = log2_ratio(s.input_res, s.bottleneck, "input_res / bottleneck");
    const int ups = log2_ratio(s.gim_res, s.bottleneck, "gim_res / bottleneck");
    if (s.encoder_widths.empty())
      for (int l = 0; l <= downs; ++l) s.encoder_widths.push_back(level_width(s, l));
    if (s.decoder_widths.empty())
      for (int j = 0; j < ups; ++j) s.decoder_widths.push_back(level_width(s, ups - 1 - j));
    require(static_cast<int>(s.encoder_widths.size()) == downs + 1 && static_cast<int>(s.decoder_widths.size()) == ups,
            ErrorCode::InvalidArgument, "network spec: width list length does not match the level count");
    const auto counts = standard_counts(s, downs + ups, 2, kPaperImageDepth);
    auto stem = std::make_unique<Conv2d>("stem", s.input_channels, s.encoder_widths[0], 3, 1, 1);
    stem->init_he(rng);
    body_.add(std::move(stem));
    for (int l = 0; l < downs; ++l)
      b.group(BlockKind::Down, "enc" + std::to_string(l + 1), s.encoder_widths[l], s.encoder_widths[l + 1], s.down_leak,
              counts[l]);
    int w = s.encoder_widths.back();
    for (int j = 0; j < ups; ++j) {
      b.group(BlockKind::Up, "dec" + std::to_string(j + 1), w, s.decoder_widths[j], s.up_leak, counts[downs + j]);
      w = s.decoder_widths[j];
    }
    auto head = std::make_unique<Conv2d>("head", w, 1, 3, 1, 1);
    head->init_zero();
    body_.add(std::move(head));
  } else {
    require(s.param_dim >= 1, ErrorCode::InvalidArgument, "network spec: param_dim must be at least 1");
    require(s.hidden >= 1, ErrorCode::InvalidArgument, "network spec: hidden must be at least 1");
    const int ups = log2_ratio(s.gim_res, s.coarse, "gim_res / coarse");
    if (s.decoder_widths.empty())
      for (int j = 0; j < ups; ++j) s.decoder_widths.push_back(level_width(s, ups - 1 - j));
    require(static_cast<int>(s.decoder_widths.size()) == ups, ErrorCode::InvalidArgument,
            "network spec: width list length does not match the level count");
    const int w0 = level_width(s, ups);
    const auto counts = standard_counts(s, ups, 3, kPaperParamDepth);
    auto fc1 = std::make_unique<Linear>("fc1", s.param_dim, s.hidden);
    fc1->init_he(rng);
    auto fc2 = std::make_unique<Linear>("fc2", s.hidden, w0 * s.coarse * s.coarse);
    fc2->init_he(rng);
    body_.add(std::move(fc1));
    body_.add(std::make_unique<LeakyReLU>("fc1.relu", 0.0));
    body_.add(std::move(fc2));
    body_.add(std::make_unique<LeakyReLU>("fc2.relu", 0.0));
    body_.add(std::make_unique<Reshape>("reshape", std::vector<int>{w0, s.coarse, s.coarse}));
    int w = w0;
    for (int j = 0; j < ups; ++j) {
      b.group(BlockKind::Up, "dec" + std::to_string(j + 1), w, s.decoder_widths[j], s.up_leak, counts[j]);
      w = s.decoder_widths[j];
    }
    auto head = std::make_unique<Conv2d>("head", w, 1, 3, 1, 1);
    head->init_zero();
    body_.add(std::move(head));
  }
  projections_ = b.projections;
}

std::vector<Param*> Network::parameters() {
  std::vector<Param*> out;
  body_.parameters(out);
  return out;
}

void Network::zero_grad() {
  for (Param* p : parameters()) p->grad.fill(0.0);
}

std::size_t Network::parameter_count() {
  std::size_t n = 0;
  for (Param* p : parameters()) n += p->value.size();
  return n;
}

std::vector<int> Network::input_shape() const {
  if (spec_.kind == NetKind::ImageToGim) return {spec_.input_channels, spec_.input_res, spec_.input_res};
  return {spec_.param_dim};
}

std::vector<int> Network::output_shape() const { return {1, spec_.gim_res, spec_.gim_res}; }

std::unique_ptr<Network> build_image_to_gim(const NetworkSpec& spec) {
  require(spec.kind == NetKind::ImageToGim, ErrorCode::InvalidArgument, "build_image_to_gim: wrong spec kind");
  return std::make_unique<Network>(spec);
}

std::unique_ptr<Network> build_param_to_residual_gim(const NetworkSpec& spec) {
  require(spec.kind == NetKind::ParamToResidualGim, ErrorCode::InvalidArgument,
          "build_param_to_residual_gim: wrong spec kind");
  return std::make_unique<Network>(spec);
}

// ---- checkpoint ------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void save_checkpoint(Network& net, const std::filesystem::path& path) {
  nlohmann::json table = nlohmann::json::array();
  std::size_t offset = 0;
  const auto params = net.parameters();
  for (const Param* p : params) {
    table.push_back({{"name", p->name}, {"shape", p->value.shape}, {"offset", offset}});
    offset += p->value.size();
  }
  const nlohmann::json header = {{"format", "surfnet-checkpoint"}, {"version", 1},      {"dtype", "f64-le"},
                                 {"spec", net.spec().to_json()},  {"graph", net.describe()}, {"params", table},
                                 {"count", offset},                {"trained", net.trained}};
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
  out << header.dump() << '\n';
  for (const Param* p : params)
    out.write(reinterpret_cast<const char*>(p->value.data.data()), static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  require(static_cast<bool>(out), ErrorCode::Io, "write failed: " + path.string());
}

std::unique_ptr<Network> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, path.string() + ": bad checkpoint header: " + e.what());
  }
  require(header.value("format", "") == "surfnet-checkpoint" && header.value("dtype", "") == "f64-le", ErrorCode::Parse,
          path.string() + ": not a checkpoint");
  auto net = std::make_unique<Network>(NetworkSpec::from_json(header.at("spec")));
  const auto params = net->parameters();
  const auto& table = header.at("params");
  require(table.size() == params.size(), ErrorCode::Parse, path.string() + ": parameter table does not match the graph");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param* p = params[i];
    require(table[i].at("name").get<std::string>() == p->name && table[i].at("shape").get<std::vector<int>>() == p->value.shape,
            ErrorCode::Parse, path.string() + ": parameter '" + p->name + "' does not match");
    in.read(reinterpret_cast<char*>(p->value.data.data()), static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    require(static_cast<bool>(in), ErrorCode::Parse, path.string() + ": truncated parameter blob");
  }
  net->trained = header.value("trained", false);
  return net;
}

}  // namespace surfnet::nn
