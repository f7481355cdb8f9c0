#include "surfnet/nn/layers.hpp"

#include "surfnet/error.hpp"

#include <Eigen/Core>
#include <cmath>

namespace surfnet::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor& Tensor::operator+=(const Tensor& o) {
  require(o.data.size() == data.size(), ErrorCode::InvalidArgument,
          "tensor add: shape " + shape_string(shape) + " vs " + shape_string(o.shape));
  for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
  return *this;
}

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
  return s + ")";
}

double dot(const Tensor& a, const Tensor& b) {
  require(a.size() == b.size(), ErrorCode::InvalidArgument, "dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace {

void he_fill(Tensor& t, int fan_in, std::mt19937_64& rng, double gain) {
  std::normal_distribution<double> n(0.0, std::sqrt(gain / fan_in));
  for (auto& v : t.data) v = n(rng);
}

[[noreturn]] void shape_error(const std::string& layer, const std::string& want, const Tensor& got) {
  fail(ErrorCode::InvalidArgument,
       "layer '" + layer + "': expected input " + want + ", got " + shape_string(got.shape));
}

}  // namespace

// ---- Conv2d ---------------------------------------------------------------------

Conv2d::Conv2d(std::string name, int in, int out, int kernel, int stride, int pad)
    : Module(std::move(name)), in_(in), out_(out), k_(kernel), stride_(stride), pad_(pad),
      w_(name_ + ".weight", {out, in, kernel, kernel}), b_(name_ + ".bias", {out}) {
  require(in > 0 && out > 0 && kernel > 0 && stride > 0 && pad >= 0, ErrorCode::InvalidArgument,
          "layer '" + name_ + "': invalid convolution geometry");
}

void Conv2d::init_he(std::mt19937_64& rng, double gain) {
  he_fill(w_.value, in_ * k_ * k_, rng, gain);
  b_.value.fill(0.0);
}

void Conv2d::init_zero() {
  w_.value.fill(0.0);
  b_.value.fill(0.0);
}

std::vector<int> Conv2d::output_shape(const std::vector<int>& in) const {
  return {out_, (in[1] + 2 * pad_ - k_) / stride_ + 1, (in[2] + 2 * pad_ - k_) / stride_ + 1};
}

Tensor Conv2d::forward(const Tensor& x) {
  if (x.rank() != 3 || x.dim(0) != in_ || x.dim(1) + 2 * pad_ < k_ || x.dim(2) + 2 * pad_ < k_)
    shape_error(name_, "(" + std::to_string(in_) + ", H, W) with H, W >= " + std::to_string(k_ - 2 * pad_), x);
  in_shape_ = x.shape;
  const int h = x.dim(1), wd = x.dim(2);
  ho_ = (h + 2 * pad_ - k_) / stride_ + 1;
  wo_ = (wd + 2 * pad_ - k_) / stride_ + 1;
  const int npix = ho_ * wo_;
  cols_.assign(static_cast<std::size_t>(in_) * k_ * k_ * npix, 0.0);
  for (int c = 0; c < in_; ++c)
    for (int a = 0; a < k_; ++a)
      for (int b = 0; b < k_; ++b) {
        double* row = &cols_[((static_cast<std::size_t>(c) * k_ + a) * k_ + b) * npix];
        for (int i = 0; i < ho_; ++i) {
          const int y = i * stride_ + a - pad_;
          if (y < 0 || y >= h) continue;
          for (int j = 0; j < wo_; ++j) {
            const int xx = j * stride_ + b - pad_;
            if (xx >= 0 && xx < wd) row[i * wo_ + j] = x.at(c, y, xx);
          }
        }
      }
  Tensor out({out_, ho_, wo_});
  MapMat y(out.data.data(), out_, npix);
  y.noalias() = CMapMat(w_.value.data.data(), out_, in_ * k_ * k_) * CMapMat(cols_.data(), in_ * k_ * k_, npix);
  for (int o = 0; o < out_; ++o) y.row(o).array() += b_.value[o];
  return out;
}

Tensor Conv2d::backward(const Tensor& dy) {
  const int npix = ho_ * wo_;
  if (dy.rank() != 3 || dy.dim(0) != out_ || dy.dim(1) != ho_ || dy.dim(2) != wo_)
    shape_error(name_ + " (backward)", shape_string({out_, ho_, wo_}), dy);
  const CMapMat g(dy.data.data(), out_, npix);
  const CMapMat cols(cols_.data(), in_ * k_ * k_, npix);
  MapMat(w_.grad.data.data(), out_, in_ * k_ * k_).noalias() += g * cols.transpose();
  for (int o = 0; o < out_; ++o) b_.grad[o] += g.row(o).sum();
  RowMat dcols = CMapMat(w_.value.data.data(), out_, in_ * k_ * k_).transpose() * g;
  Tensor dx(in_shape_);
  const int h = in_shape_[1], wd = in_shape_[2];
  for (int c = 0; c < in_; ++c)
    for (int a = 0; a < k_; ++a)
      for (int b = 0; b < k_; ++b) {
        const double* row = dcols.data() + ((static_cast<std::size_t>(c) * k_ + a) * k_ + b) * npix;
        for (int i = 0; i < ho_; ++i) {
          const int y = i * stride_ + a - pad_;
          if (y < 0 || y >= h) continue;
          for (int j = 0; j < wo_; ++j) {
            const int xx = j * stride_ + b - pad_;
            if (xx >= 0 && xx < wd) dx.at(c, y, xx) += row[i * wo_ + j];
          }
        }
      }
  return dx;
}

void Conv2d::parameters(std::vector<Param*>& out) {
  out.push_back(&w_);
  out.push_back(&b_);
}

nlohmann::json Conv2d::describe() const {
  return {{"name", name_}, {"kind", "conv"}, {"in", in_}, {"out", out_}, {"kernel", k_}, {"stride", stride_}, {"pad", pad_}};
}

// ---- ConvTranspose2d ------------------------------------------------------------

ConvTranspose2d::ConvTranspose2d(std::string name, int in, int out, int kernel)
    : Module(std::move(name)), in_(in), out_(out), k_(kernel), w_(name_ + ".weight", {in, out, kernel, kernel}),
      b_(name_ + ".bias", {out}) {
  require(in > 0 && out > 0 && kernel > 0, ErrorCode::InvalidArgument,
          "layer '" + name_ + "': invalid transposed convolution geometry");
}

void ConvTranspose2d::init_he(std::mt19937_64& rng, double gain) {
  he_fill(w_.value, in_, rng, gain);
  b_.value.fill(0.0);
}

void ConvTranspose2d::init_zero() {
  w_.value.fill(0.0);
  b_.value.fill(0.0);
}

Tensor ConvTranspose2d::forward(const Tensor& x) {
  if (x.rank() != 3 || x.dim(0) != in_) shape_error(name_, "(" + std::to_string(in_) + ", H, W)", x);
  x_ = x;
  const int h = x.dim(1), wd = x.dim(2), npix = h * wd;
  Tensor out({out_, h * k_, wd * k_});
  const CMapMat xm(x.data.data(), in_, npix);
  RowMat wab(in_, out_);
  for (int a = 0; a < k_; ++a)
    for (int b = 0; b < k_; ++b) {
      for (int i = 0; i < in_; ++i)
        for (int o = 0; o < out_; ++o) wab(i, o) = w(i, o, a, b);
      const RowMat y = wab.transpose() * xm;
      for (int o = 0; o < out_; ++o)
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < wd; ++j) out.at(o, i * k_ + a, j * k_ + b) = y(o, i * wd + j) + b_.value[o];
    }
  return out;
}

Tensor ConvTranspose2d::backward(const Tensor& dy) {
  const int h = x_.dim(1), wd = x_.dim(2), npix = h * wd;
  if (dy.rank() != 3 || dy.dim(0) != out_ || dy.dim(1) != h * k_ || dy.dim(2) != wd * k_)
    shape_error(name_ + " (backward)", shape_string({out_, h * k_, wd * k_}), dy);
  const CMapMat xm(x_.data.data(), in_, npix);
  Tensor dx(x_.shape);
  MapMat dxm(dx.data.data(), in_, npix);
  RowMat g(out_, npix), wab(in_, out_);
  for (int a = 0; a < k_; ++a)
    for (int b = 0; b < k_; ++b) {
      for (int o = 0; o < out_; ++o)
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < wd; ++j) g(o, i * wd + j) = dy.at(o, i * k_ + a, j * k_ + b);
      for (int i = 0; i < in_; ++i)
        for (int o = 0; o < out_; ++o) wab(i, o) = w(i, o, a, b);
      dxm.noalias() += wab * g;
      const RowMat dw = xm * g.transpose();
      for (int i = 0; i < in_; ++i)
        for (int o = 0; o < out_; ++o) w_.grad[((static_cast<std::size_t>(i) * out_ + o) * k_ + a) * k_ + b] += dw(i, o);
      for (int o = 0; o < out_; ++o) b_.grad[o] += g.row(o).sum();
    }
  return dx;
}

void ConvTranspose2d::parameters(std::vector<Param*>& out) {
  out.push_back(&w_);
  out.push_back(&b_);
}

nlohmann::json ConvTranspose2d::describe() const {
  return {{"name", name_}, {"kind", "convT"}, {"in", in_}, {"out", out_}, {"kernel", k_}, {"stride", k_}, {"crop", 0}};
}

// ---- Linear -------------------------------------------------------------------

Linear::Linear(std::string name, int in, int out)
    : Module(std::move(name)), in_(in), out_(out), w_(name_ + ".weight", {out, in}), b_(name_ + ".bias", {out}) {
  require(in > 0 && out > 0, ErrorCode::InvalidArgument, "layer '" + name_ + "': invalid size");
}

void Linear::init_he(std::mt19937_64& rng) {
  he_fill(w_.value, in_, rng, 2.0);
  b_.value.fill(0.0);
}

void Linear::init_zero() {
  w_.value.fill(0.0);
  b_.value.fill(0.0);
}

Tensor Linear::forward(const Tensor& x) {
  if (x.rank() != 1 || x.dim(0) != in_) shape_error(name_, "(" + std::to_string(in_) + ")", x);
  x_ = x;
  Tensor y({out_});
  Eigen::Map<Eigen::VectorXd>(y.data.data(), out_).noalias() =
      CMapMat(w_.value.data.data(), out_, in_) * Eigen::Map<const Eigen::VectorXd>(x.data.data(), in_) +
      Eigen::Map<const Eigen::VectorXd>(b_.value.data.data(), out_);
  return y;
}

Tensor Linear::backward(const Tensor& dy) {
  if (dy.rank() != 1 || dy.dim(0) != out_) shape_error(name_ + " (backward)", "(" + std::to_string(out_) + ")", dy);
  const Eigen::Map<const Eigen::VectorXd> g(dy.data.data(), out_), x(x_.data.data(), in_);
  MapMat(w_.grad.data.data(), out_, in_).noalias() += g * x.transpose();
  Eigen::Map<Eigen::VectorXd>(b_.grad.data.data(), out_) += g;
  Tensor dx({in_});
  Eigen::Map<Eigen::VectorXd>(dx.data.data(), in_).noalias() = CMapMat(w_.value.data.data(), out_, in_).transpose() * g;
  return dx;
}

void Linear::parameters(std::vector<Param*>& out) {
  out.push_back(&w_);
  out.push_back(&b_);
}

nlohmann::json Linear::describe() const { return {{"name", name_}, {"kind", "fc"}, {"in", in_}, {"out", out_}}; }

// ---- activations and plumbing -----------------------------------------------------

Tensor LeakyReLU::forward(const Tensor& x) {
  x_ = x;
  Tensor y = x;
  for (auto& v : y.data) v = std::max(v, leak_ * v);
  return y;
}

Tensor LeakyReLU::backward(const Tensor& dy) {
  require(dy.size() == x_.size(), ErrorCode::InvalidArgument, "layer '" + name_ + "' (backward): size mismatch");
  Tensor dx = dy;
  // Subgradient at 0 follows the positive branch.
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (x_[i] < 0.0 || (x_[i] == 0.0 && leak_ > 1.0)) dx[i] *= leak_;
  return dx;
}

nlohmann::json LeakyReLU::describe() const {
  return {{"name", name_}, {"kind", leak_ == 0.0 ? "relu" : "leaky-relu"}, {"leak", leak_}};
}

Tensor Reshape::forward(const Tensor& x) {
  if (x.size() != Tensor::count(shape_)) shape_error(name_, "a tensor with " + std::to_string(Tensor::count(shape_)) + " values", x);
  in_shape_ = x.shape;
  Tensor y;
  y.shape = shape_;
  y.data = x.data;
  return y;
}

Tensor Reshape::backward(const Tensor& dy) {
  Tensor dx;
  dx.shape = in_shape_;
  dx.data = dy.data;
  return dx;
}

nlohmann::json Reshape::describe() const { return {{"name", name_}, {"kind", "reshape"}, {"shape", shape_}}; }

Tensor Sequential::forward(const Tensor& x) {
  Tensor h = x;
  for (auto& l : layers_) h = l->forward(h);
  return h;
}

Tensor Sequential::backward(const Tensor& dy) {
  Tensor g = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void Sequential::parameters(std::vector<Param*>& out) {
  for (auto& l : layers_) l->parameters(out);
}

nlohmann::json Sequential::describe() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : layers_) arr.push_back(l->describe());
  return {{"name", name_}, {"kind", "sequential"}, {"layers", arr}};
}

int Sequential::weight_layers() const {
  int n = 0;
  for (const auto& l : layers_) n += l->weight_layers();
  return n;
}

// ---- residual blocks ----------------------------------------------------------------

ResidualBlock::ResidualBlock(std::string name, BlockKind kind, std::unique_ptr<Sequential> branch, ModulePtr shortcut)
    : Module(std::move(name)), kind_(kind), branch_(std::move(branch)), shortcut_(std::move(shortcut)) {}

Tensor ResidualBlock::forward(const Tensor& x) {
  Tensor y = branch_->forward(x);
  const Tensor s = shortcut_ ? shortcut_->forward(x) : x;
  if (y.shape != s.shape)
    fail(ErrorCode::InvalidArgument, "block '" + name_ + "': branch output " + shape_string(y.shape) +
                                         " does not match shortcut " + shape_string(s.shape));
  y += s;
  return y;
}

Tensor ResidualBlock::backward(const Tensor& dy) {
  Tensor dx = branch_->backward(dy);
  if (shortcut_) dx += shortcut_->backward(dy);
  else dx += dy;
  return dx;
}

void ResidualBlock::parameters(std::vector<Param*>& out) {
  branch_->parameters(out);
  if (shortcut_) shortcut_->parameters(out);
}

nlohmann::json ResidualBlock::describe() const {
  static const char* kinds[] = {"standard-residual", "up-residual", "down-residual"};
  nlohmann::json j = {{"name", name_}, {"kind", kinds[static_cast<int>(kind_)]}, {"branch", branch_->describe()}};
  j["shortcut"] = shortcut_ ? shortcut_->describe() : nlohmann::json("identity");
  return j;
}

int ResidualBlock::weight_layers() const { return branch_->weight_layers() + (shortcut_ ? shortcut_->weight_layers() : 0); }

std::unique_ptr<ResidualBlock> standard_block(const std::string& name, int channels, double leak, std::mt19937_64& rng) {
  auto branch = std::make_unique<Sequential>(name + ".branch");
  auto c1 = std::make_unique<Conv2d>(name + ".conv1", channels, channels, 3, 1, 1);
  c1->init_he(rng);
  auto c2 = std::make_unique<Conv2d>(name + ".conv2", channels, channels, 3, 1, 1);
  c2->init_zero();
  branch->add(std::move(c1));
  branch->add(std::make_unique<LeakyReLU>(name + ".act", leak));
  branch->add(std::move(c2));
  return std::make_unique<ResidualBlock>(name, BlockKind::Standard, std::move(branch), nullptr);
}

std::unique_ptr<ResidualBlock> down_block(const std::string& name, int in, int out, double leak, std::mt19937_64& rng) {
  auto branch = std::make_unique<Sequential>(name + ".branch");
  auto c1 = std::make_unique<Conv2d>(name + ".conv1", in, out, 3, 2, 1);
  c1->init_he(rng);
  auto c2 = std::make_unique<Conv2d>(name + ".conv2", out, out, 3, 1, 1);
  c2->init_zero();
  branch->add(std::move(c1));
  branch->add(std::make_unique<LeakyReLU>(name + ".act", leak));
  branch->add(std::move(c2));
  auto proj = std::make_unique<Conv2d>(name + ".proj", in, out, 1, 2, 0);
  proj->init_he(rng, 1.0);
  return std::make_unique<ResidualBlock>(name, BlockKind::Down, std::move(branch), std::move(proj));
}

std::unique_ptr<ResidualBlock> up_block(const std::string& name, int in, int out, double leak, std::mt19937_64& rng) {
  auto branch = std::make_unique<Sequential>(name + ".branch");
  auto t1 = std::make_unique<ConvTranspose2d>(name + ".convT", in, out, 2);
  t1->init_he(rng);
  auto c2 = std::make_unique<Conv2d>(name + ".conv2", out, out, 3, 1, 1);
  c2->init_zero();
  branch->add(std::move(t1));
  branch->add(std::make_unique<LeakyReLU>(name + ".act", leak));
  branch->add(std::move(c2));
  auto proj = std::make_unique<ConvTranspose2d>(name + ".proj", in, out, 2);
  proj->init_he(rng, 1.0);
  return std::make_unique<ResidualBlock>(name, BlockKind::Up, std::move(branch), std::move(proj));
}

}  // namespace surfnet::nn
