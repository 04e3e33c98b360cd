#include "cosm/registration.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace cosm {

Correspondences find_correspondences(const PointCloud& source, const KdTree& target_tree) {
    Correspondences c;
    c.index.resize(source.size());
    c.dist_sq.resize(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
        const auto nn = target_tree.nearest(source[i]);
        c.index[i] = nn.index;
        c.dist_sq[i] = nn.dist_sq;
    }
    return c;
}

Point3 centroid(std::span<const Point3> points) {
    if (points.empty()) throw std::invalid_argument("centroid of an empty point set");
    Point3 sum = Point3::Zero();
    for (const auto& p : points) sum += p;
    return sum / static_cast<double>(points.size());
}

std::vector<Point3> demean(std::span<const Point3> points, const Point3& center) {
    std::vector<Point3> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(p - center);
    return out;
}

Matrix3 cross_covariance(std::span<const Point3> source_demeaned, std::span<const Point3> target_demeaned,
                         const SimilarityMatrix& sm) {
    if (sm.rows != source_demeaned.size() || sm.cols != target_demeaned.size()) {
        throw DimensionMismatch("similarity matrix is " + std::to_string(sm.rows) + "x" + std::to_string(sm.cols) +
                                " but clouds have " + std::to_string(source_demeaned.size()) + " and " +
                                std::to_string(target_demeaned.size()) + " points");
    }
    Matrix3 h = Matrix3::Zero();
    for (const auto& t : sm.entries) {
        if (t.row >= sm.rows || t.col >= sm.cols) throw DimensionMismatch("similarity entry outside matrix bounds");
        h.noalias() += t.weight * source_demeaned[t.row] * target_demeaned[t.col].transpose();
    }
    return h;
}

SvdFactors svd3(const Matrix3& h) {
    Eigen::JacobiSVD<Matrix3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return {svd.matrixU(), svd.matrixV(), svd.singularValues()};
}

RotationEstimate extract_rotation(const Matrix3& h) {
    if (!h.allFinite()) throw std::invalid_argument("cross covariance has non-finite entries");
    const auto f = svd3(h);
    RotationEstimate est;
    est.singular_values = f.singular_values;

    Matrix3 v = f.V;
    est.rotation = v * f.U.transpose();
    if (est.rotation.determinant() < 0.0) {
        v.col(2) *= -1.0;
        est.rotation = v * f.U.transpose();
        est.reflection_corrected = true;
    }
    const double largest = f.singular_values(0);
    est.degenerate = !(largest > 0.0) || f.singular_values(1) < kDegenerateRatio * largest;
    return est;
}

StepResult estimate_step(const PointCloud& source, const PointCloud& target, const SimilarityMatrix& sm) {
    const Point3 s_cen = centroid(source);
    const Point3 t_cen = centroid(target);
    const auto p = demean(source.points(), s_cen);
    const auto q = demean(target.points(), t_cen);

    // H = Σ w p' q'ᵀ with source rows and target columns, so V Uᵀ rotates source onto target.
    const auto rot = extract_rotation(cross_covariance(p, q, sm));
    const Point3 t = t_cen - rot.rotation * s_cen;
    return {RigidTransform(rot.rotation, t), rot};
}

StepResult estimate_step(const PointCloud& source, const PointCloud& target, std::span<const std::size_t> corr) {
    return estimate_step(source, target, uniform_similarity(target.size(), corr));
}

double rmse(const PointCloud& source, const PointCloud& target, std::span<const std::size_t> corr) {
    if (corr.size() != source.size()) throw DimensionMismatch("correspondence count differs from source size");
    if (source.empty()) throw std::invalid_argument("rmse of an empty cloud");
    double sum = 0.0;
    for (std::size_t i = 0; i < corr.size(); ++i) {
        if (corr[i] >= target.size()) throw CorrespondenceOutOfRange("correspondence outside target");
        sum += (source[i] - kScale * target[corr[i]]).squaredNorm();
    }
    return std::sqrt(sum / static_cast<double>(source.size()));
}

double rmse(const Correspondences& corr) {
    if (corr.dist_sq.empty()) throw std::invalid_argument("rmse of an empty cloud");
    double sum = 0.0;
    for (double d : corr.dist_sq) sum += d;
    return std::sqrt(sum / static_cast<double>(corr.dist_sq.size()));
}

std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::MaxIterations: return "max_iterations";
        case StopReason::AbsoluteTolerance: return "rmse_abs_tol";
        case StopReason::RelativeTolerance: return "rmse_rel_tol";
        case StopReason::FixedPoint: return "fixed_point";
    }
    return "unknown";
}

RegistrationReport register_clouds(const PointCloud& source, const PointCloud& target,
                                   const RegistrationConfig& config) {
    if (target.empty()) throw std::invalid_argument("target cloud is empty");
    const KdTree tree(target);
    return register_clouds(source, target, tree, config);
}

RegistrationReport register_clouds(const PointCloud& source, const PointCloud& target, const KdTree& target_tree,
                                   const RegistrationConfig& config) {
    config.validate();
    if (source.empty() || target.empty()) throw std::invalid_argument("registration needs nonempty clouds");
    if (target_tree.size() != target.size()) throw DimensionMismatch("k-d tree was not built over the target");

    const double scale = 1.0 + bounding_box(target).diagonal();
    RegistrationReport report;
    PointCloud current = source;
    RigidTransform total;
    Correspondences corr = find_correspondences(current, target_tree);
    report.initial_rmse = rmse(corr);
    double previous = report.initial_rmse;

    for (int it = 0; it < config.max_iterations; ++it) {
        const SimilarityMatrix sm =
            config.method == Method::CoSM
                ? build_similarity(current.points(), target.points(), corr.index, config.sigma,
                                   SimilarityOptions{config.mirror})
                : uniform_similarity(target.size(), corr.index);
        const StepResult step = estimate_step(current, target, sm);

        current = apply(step.transform, current);
        total = compose(step.transform, total);
        report.rank_trace.push_back(distinct_count(corr.index));
        if (step.rotation.degenerate) ++report.degenerate_iterations;
        report.max_rotation_defect = std::max(report.max_rotation_defect, total.rotation_defect());

        corr = find_correspondences(current, target_tree);
        const double now = rmse(corr);
        report.rmse_trace.push_back(now);
        ++report.iterations;

        const double rot_delta = (step.transform.rotation() - Matrix3::Identity()).norm();
        const double trans_delta = step.transform.translation().norm() / scale;
        if (config.rmse_abs_tol > 0.0 && now < config.rmse_abs_tol) {
            report.converged = true;
            report.stop_reason = StopReason::AbsoluteTolerance;
            break;
        }
        if (config.rmse_rel_tol > 0.0 && previous > 0.0 && std::abs(previous - now) / previous < config.rmse_rel_tol) {
            report.converged = true;
            report.stop_reason = StopReason::RelativeTolerance;
            break;
        }
        if (rot_delta <= kFixedPointTolerance && trans_delta <= kFixedPointTolerance) {
            report.converged = true;
            report.stop_reason = StopReason::FixedPoint;
            break;
        }
        previous = now;
    }
    report.final_transform = total;
    return report;
}

}  // namespace cosm
