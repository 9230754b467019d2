#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace ergodic {

using Vec3 = Eigen::Vector3d;
using Rgb = std::array<std::uint8_t, 3>;

/// Surface samples in millimeters with optional colors and target masses.
///
/// Immutable once constructed; the constructor validates the invariants
/// (finite positions, matching lengths, nonnegative target with positive sum).
class PointCloud {
 public:
  explicit PointCloud(std::vector<Vec3> positions,
                      std::optional<std::vector<Rgb>> colors = std::nullopt,
                      std::optional<std::vector<double>> target = std::nullopt);

  std::size_t size() const noexcept { return positions_.size(); }
  const std::vector<Vec3>& positions() const noexcept { return positions_; }
  const Vec3& position(std::size_t i) const { return positions_[i]; }

  bool has_colors() const noexcept { return colors_.has_value(); }
  const std::vector<Rgb>& colors() const { return colors_.value(); }

  bool has_target() const noexcept { return target_.has_value(); }
  const std::vector<double>& target() const { return target_.value(); }

  /// Copy of this cloud with a different target column.
  PointCloud with_target(std::vector<double> target) const;

 private:
  std::vector<Vec3> positions_;
  std::optional<std::vector<Rgb>> colors_;
  std::optional<std::vector<double>> target_;
};

enum class CloudFormat { kCsv, kPlyAscii };

/// Loads a cloud; the format is inferred from the extension when not given.
/// CSV columns are x,y,z[,r,g,b][,p] with an optional header line.
PointCloud load_cloud(const std::filesystem::path& path,
                      std::optional<CloudFormat> format = std::nullopt);

PointCloud parse_csv_cloud(std::string_view text);
PointCloud parse_ply_cloud(std::string_view text);

void save_csv_cloud(const PointCloud& cloud, const std::filesystem::path& path);
void save_ply_cloud(const PointCloud& cloud, const std::filesystem::path& path);

/// One centroid per occupied voxel; masses summed, colors averaged.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);

/// Mean nearest-neighbor distance h.
double mean_spacing(const PointCloud& cloud);

}  // namespace ergodic
