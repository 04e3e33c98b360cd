#pragma once

#include "cosm/core.hpp"
#include "cosm/correntropy.hpp"
#include "cosm/kdtree.hpp"

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cosm {

class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// c(i) and |p_i - q_c(i)|² for every source point.
struct Correspondences {
    std::vector<std::size_t> index;
    std::vector<double> dist_sq;

    std::size_t size() const { return index.size(); }
};

/// Exact nearest target for every source point; no rejection and no reciprocity check.
Correspondences find_correspondences(const PointCloud& source, const KdTree& target_tree);

Point3 centroid(std::span<const Point3> points);
inline Point3 centroid(const PointCloud& cloud) { return centroid(cloud.points()); }
std::vector<Point3> demean(std::span<const Point3> points, const Point3& center);

/// H = Σ over stored cells (j, k, w) of w · p'_j q'_kᵀ, i.e. P'·SM·Q'ᵀ for
/// demeaned 3×N point matrices. Throws DimensionMismatch if SM does not match.
Matrix3 cross_covariance(std::span<const Point3> source_demeaned, std::span<const Point3> target_demeaned,
                         const SimilarityMatrix& sm);

/// H = U diag(λ) Vᵀ with λ descending.
struct SvdFactors {
    Matrix3 U;
    Matrix3 V;
    Eigen::Vector3d singular_values;
};

SvdFactors svd3(const Matrix3& h);

struct RotationEstimate {
    Matrix3 rotation = Matrix3::Identity();
    Eigen::Vector3d singular_values = Eigen::Vector3d::Zero();
    bool reflection_corrected = false;
    /// Two or more singular values below 1e-12 x the largest (or H == 0):
    /// the rotation is not uniquely determined and `rotation` is a best effort.
    bool degenerate = false;
};

inline constexpr double kDegenerateRatio = 1e-12;

/// R = V Uᵀ, with the column of V for the smallest singular value negated when
/// that would otherwise give det R = -1.
RotationEstimate extract_rotation(const Matrix3& h);

struct StepResult {
    RigidTransform transform;
    RotationEstimate rotation;
};

/// One pose update mapping `source` towards `target`: rotation from the
/// SM-weighted cross covariance, translation t_cen - R·s_cen. Both centroids
/// are taken over the full clouds.
StepResult estimate_step(const PointCloud& source, const PointCloud& target, const SimilarityMatrix& sm);
/// Uniform weights at (i, c(i)) only.
StepResult estimate_step(const PointCloud& source, const PointCloud& target, std::span<const std::size_t> corr);

/// sqrt(mean_i |p_i - q_c(i)|²).
double rmse(const PointCloud& source, const PointCloud& target, std::span<const std::size_t> corr);
double rmse(const Correspondences& corr);

enum class StopReason { MaxIterations, AbsoluteTolerance, RelativeTolerance, FixedPoint };

std::string_view to_string(StopReason r);

struct RegistrationReport {
    /// Maps the original source into the target frame.
    RigidTransform final_transform;
    double initial_rmse = 0.0;
    /// RMSE after each iteration's update, against fresh correspondences.
    std::vector<double> rmse_trace;
    /// Distinct matched targets in the correspondences each iteration's step used.
    std::vector<std::size_t> rank_trace;
    std::size_t iterations = 0;
    bool converged = false;
    StopReason stop_reason = StopReason::MaxIterations;
    std::size_t degenerate_iterations = 0;
    /// Largest RigidTransform::rotation_defect() of the accumulated rotation over all iterations.
    double max_rotation_defect = 0.0;

    double final_rmse() const { return rmse_trace.empty() ? initial_rmse : rmse_trace.back(); }
};

/// Increments smaller than this (‖R - I‖_F and ‖t‖ / (1 + target diagonal)) end the loop.
inline constexpr double kFixedPointTolerance = 1e-12;

/// Iterative registration of `source` onto `target`. CoSM weights each
/// iteration's cross covariance with the correntropy similarity matrix;
/// StandardSVD uses weight 1 at (i, c(i)).
RegistrationReport register_clouds(const PointCloud& source, const PointCloud& target,
                                   const RegistrationConfig& config);
/// Variant reusing a tree already built over `target`.
RegistrationReport register_clouds(const PointCloud& source, const PointCloud& target, const KdTree& target_tree,
                                   const RegistrationConfig& config);

}  // namespace cosm
