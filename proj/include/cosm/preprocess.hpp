#pragma once

#include "cosm/core.hpp"
#include "cosm/random.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace cosm {

class NonPositiveLeaf : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Voxel grid

/// Integer lattice coordinates of a voxel, anchored at the cloud's min corner.
struct VoxelKey {
    std::int64_t ix = 0;
    std::int64_t iy = 0;
    std::int64_t iz = 0;

    friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

struct VoxelGrid {
    PointCloud cloud;                    ///< one centroid per occupied voxel
    std::vector<VoxelKey> keys;          ///< ascending, parallel to `cloud`
    std::vector<std::size_t> members;    ///< input points per voxel, parallel to `cloud`
};

/// Replaces the points of every occupied voxel with their centroid. Output is
/// ordered by ascending (ix, iy, iz).
VoxelGrid voxelize(const PointCloud& cloud, double leaf);
PointCloud voxel_grid_filter(const PointCloud& cloud, double leaf);

// ---------------------------------------------------------------------------
// Random rigid poses

enum class SamplerMode { Uniform, Gaussian };

struct TransformSampler {
    SamplerMode mode = SamplerMode::Gaussian;
    std::uint64_t seed = 0;
    double angle_bound = 6.28;   ///< uniform mode, radians
    double trans_bound = 10.0;   ///< uniform mode
    double angle_std = 6.28317;  ///< gaussian mode, radians
    double trans_std = 10.0;     ///< gaussian mode

    /// Bounds and standard deviations must be finite and nonnegative.
    void validate() const;
};

/// Stateful pose stream. Each call to next() draws roll, pitch, yaw, tx, ty, tz in that order.
class PoseSampler {
public:
    explicit PoseSampler(const TransformSampler& sampler);

    EulerPose next();

private:
    TransformSampler params_;
    Rng rng_;
};

/// The `index`-th pose (0-based) of the stream seeded by `sampler.seed`.
EulerPose sample_pose_at(const TransformSampler& sampler, std::size_t index);

// ---------------------------------------------------------------------------
// Shot-noise outliers

struct OutlierSpec {
    double fraction = 0.0;
    /// Per-axis standard deviation of the additive offset. Unset means half the
    /// bounding-box diagonal of the input cloud.
    std::optional<double> offset_std;
    std::uint64_t seed = 0;

    void validate() const;
};

struct OutlierResult {
    PointCloud cloud;
    std::vector<std::size_t> indices;  ///< sorted ascending
};

/// Perturbs exactly round(fraction * N) distinct points by a N(0, offset_std²)
/// offset per axis. All other points are copied unchanged and order is kept.
OutlierResult inject_outliers(const PointCloud& cloud, const OutlierSpec& spec);

std::size_t outlier_count(std::size_t n, double fraction);

}  // namespace cosm
