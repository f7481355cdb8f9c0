#pragma once

#include "surfnet/dataset.hpp"
#include "surfnet/nn/network.hpp"
#include "surfnet/nn/train.hpp"

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace surfnet {

/// Network input for the parametric generator: a class code (one-hot over
/// the training shapes, relaxed under interpolation) optionally followed by
/// (sin az, cos az, sin el, cos el).
struct ParamVector {
  std::vector<double> code;
  bool has_view = true;
  double azimuth = 0.0;    ///< degrees
  double elevation = 0.0;  ///< degrees

  static ParamVector one_hot(int cls, int classes, double azimuth_deg, double elevation_deg);
  /// Non-rigid analog: joint parameters only, no view.
  static ParamVector joints(std::vector<double> values);

  /// code followed by the sin/cos view entries.
  std::vector<double> encode() const;
  nn::Tensor tensor() const;
  int dim() const { return static_cast<int>(code.size()) + (has_view ? 4 : 0); }
  /// Inverse of encode(); the view angles come from atan2 of the entries.
  static ParamVector decode(std::span<const double> values, int code_dim, bool has_view);
};

/// Base position channels rotated by view_rotation(azimuth, elevation);
/// pixel positions are unchanged.
GeometryImage make_base_gim(const GeometryImage& base, double azimuth_deg, double elevation_deg);

/// Three per-channel parametric generators plus the base GIM they add to.
struct ParamModel {
  std::array<std::unique_ptr<nn::Network>, 3> nets;
  GeometryImage base;  ///< x, y, z of the base shape at the networks' resolution
  int classes = 0;
  bool has_view = true;
  std::vector<ViewAngles> trained_views;
  /// Per-channel factor the training targets were multiplied by; network
  /// outputs are divided by it.
  std::array<double, 3> target_scale{1.0, 1.0, 1.0};
  /// Box around every training target position.
  Vec3 bounds_lo = Vec3::Zero();
  Vec3 bounds_hi = Vec3::Zero();

  void check_ready() const;
};

/// Base GIM for the code's view plus the network residuals. With
/// zero_residual the networks are skipped.
GeometryImage generate_gim(ParamModel& model, const std::vector<double>& input, double azimuth_deg,
                           double elevation_deg, bool zero_residual = false);
GeometryImage generate_gim(ParamModel& model, const ParamVector& v, bool zero_residual = false);

/// Blends of the encoded vectors t v2 + (1 - t) v1 for t = 0, 1/(steps-1),
/// ..., 1. The network sees the raw blend; the base GIM uses the view angles
/// recovered from the blended sin/cos entries.
std::vector<std::vector<double>> blend_inputs(const ParamVector& v1, const ParamVector& v2, int steps);
std::vector<GeometryImage> interpolate_params(ParamModel& model, const ParamVector& v1, const ParamVector& v2,
                                              int steps);

/// Three per-channel depth-image generators. Their output is the view-frame
/// GIM of the centered shape.
struct ImageModel {
  std::array<std::unique_ptr<nn::Network>, 3> nets;
  std::vector<ViewAngles> trained_views;
  std::array<double, 3> target_scale{1.0, 1.0, 1.0};

  void check_ready() const;
  bool view_in_range(double azimuth_deg, double elevation_deg) const;
};

nn::Tensor depth_tensor(const DepthImage& image);
GeometryImage predict_gim(ImageModel& model, const DepthImage& image);

// ---- training ---------------------------------------------------------------------

struct ParamTrainOptions {
  nn::NetworkSpec spec_template;  ///< kind, channel and param_dim are filled in
  nn::TrainConfig config;
  std::vector<ViewAngles> views;
  /// Targets are rescaled to this rms before training.
  double target_rms = 0.35;
};

struct ChannelCurves {
  std::array<std::vector<nn::EpochStat>, 3> curves;
  /// Sum over the three channels per epoch.
  std::vector<double> total() const;
};

/// Training pairs for one channel: every accepted shape at every view.
std::vector<nn::Sample> param_samples(const Family& family, const GeometryImage& base, int channel,
                                      const std::vector<ViewAngles>& views, bool has_view = true);
/// Base x, y, z channels resampled at `resolution`.
GeometryImage base_positions(const Family& family, int resolution);
/// Shape GIM resampled at `resolution` (x, y, z, curvature) on the base
/// parametrization. Returns the stored GIM when the resolution matches.
GeometryImage shape_gim(const Family& family, int shape, int resolution);

/// Trains the x, y, z networks concurrently, one thread each.
ParamModel train_param_model(const Family& family, const ParamTrainOptions& options, ChannelCurves* curves = nullptr);

struct ImageTrainOptions {
  nn::NetworkSpec spec_template;
  nn::TrainConfig config;
  std::vector<ViewAngles> views;
  std::vector<int> shapes;  ///< empty means every accepted shape
  double target_rms = 0.35;
};

/// View-frame target GIM of a shape: positions minus the surface centroid,
/// rotated by the view.
GeometryImage view_frame_gim(const Family& family, int shape, int resolution, double azimuth_deg, double elevation_deg);
ImageModel train_image_model(const Family& family, const ImageTrainOptions& options, ChannelCurves* curves = nullptr);

// ---- persistence -------------------------------------------------------------------

void save_param_model(const ParamModel& model, const std::filesystem::path& dir);
ParamModel load_param_model(const std::filesystem::path& dir);
void save_image_model(const ImageModel& model, const std::filesystem::path& dir);
ImageModel load_image_model(const std::filesystem::path& dir);

// ---- rectification ----------------------------------------------------------------

struct Rectification {
  DenseCorrespondence map;  ///< B -> M
  GeometryImage predicted;
  bool low_confidence = false;
};

/// Renders M, predicts its GIM and carries every base vertex to the point of
/// M nearest the predicted position at the vertex's octahedral pixel.
Rectification rectify_correspondence(const TriMesh& m, const ParametrizedMesh& base, ImageModel& model,
                                     double azimuth_deg, double elevation_deg, int image_res);
/// Same, from an already predicted view-frame GIM.
DenseCorrespondence correspondence_from_gim(const TriMesh& m, const ParametrizedMesh& base, const GeometryImage& predicted,
                                            double azimuth_deg, double elevation_deg);

/// Copy of `map` whose mapped points are moved by isotropic Gaussian noise
/// of standard deviation sigma * (M's bounding-box diagonal) and snapped
/// back to the closest point of M.
DenseCorrespondence perturb_correspondence(const DenseCorrespondence& map, const TriMesh& m, double sigma,
                                           std::uint64_t seed);
/// grid_smoothness_energy of M encoded on B through `map`.
double map_smoothness_energy(const TriMesh& m, const ParametrizedMesh& base, const DenseCorrespondence& map,
                             int resolution);

/// Mean per-pixel distance between the position channels of two GIMs.
double mean_position_error(const GeometryImage& a, const GeometryImage& b);
/// Bounding-box diagonal over the accepted shapes of a family.
double family_diagonal(const Family& family);

/// Symmetric mean nearest-neighbor distance.
double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b);

}  // namespace surfnet
