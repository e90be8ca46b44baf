#include "fundreg/observation.hpp"

#include "fundreg/imageops.hpp"

namespace fundreg {

void ObsConfig::validate() const {
    if (patch_size < 1) throw Error(ErrorCode::InvalidArgument, "observation: C must be >= 1");
    if (!(spacing > 0)) throw Error(ErrorCode::InvalidArgument, "observation: S must be > 0");
}

Eigen::VectorXd Observation::flatten() const {
    Eigen::VectorXd out(patches.size() + norm_points.size());
    out.head(patches.size()) = patches;
    // Matrix2Xd is column-major, so the raw buffer is already x0 y0 x1 y1 ...
    out.tail(norm_points.size()) = norm_points.reshaped();
    return out;
}

GrayImage extract_patch(const GrayImage& img, const Vec2& center, const ObsConfig& cfg) {
    cfg.validate();
    const int c = cfg.patch_size;
    const Scalar half = 0.5 * (c - 1);
    GrayImage patch(c, c);
    for (int i = 0; i < c; ++i) {
        const Scalar y = center.y() + cfg.spacing * (i - half);
        for (int j = 0; j < c; ++j) {
            const Scalar x = center.x() + cfg.spacing * (j - half);
            patch(i, j) = sample_bilinear(img, x, y, cfg.fill);
        }
    }
    return patch;
}

PointNormalization normalize_points(const LandmarkSet& pts) {
    if (pts.cols() < 2) {
        throw Error(ErrorCode::DegeneratePointSet, "need at least 2 points, got " + std::to_string(pts.cols()));
    }
    PointNormalization out;
    out.centroid = pts.rowwise().mean();
    const Eigen::Matrix2Xd centered = pts.colwise() - out.centroid;
    out.scale = std::sqrt(centered.colwise().squaredNorm().mean());
    if (!(out.scale >= 1e-9)) throw Error(ErrorCode::DegeneratePointSet, "all points coincide");
    out.points = centered / out.scale;
    return out;
}

Observation encode(const LandmarkSet& source_landmarks, const GrayImage& preprocessed_source,
                   const GrayImage& preprocessed_target, const ObsConfig& cfg) {
    cfg.validate();
    const Eigen::Index k = source_landmarks.cols();
    const Eigen::Index per_patch = static_cast<Eigen::Index>(cfg.patch_size) * cfg.patch_size;
    Observation obs;
    obs.patch_size = cfg.patch_size;
    obs.patches.resize(2 * k * per_patch);
    for (Eigen::Index i = 0; i < k; ++i) {
        const Vec2 p = source_landmarks.col(i);
        obs.patches.segment(2 * i * per_patch, per_patch) =
            extract_patch(preprocessed_source, p, cfg).reshaped<Eigen::RowMajor>();
        obs.patches.segment((2 * i + 1) * per_patch, per_patch) =
            extract_patch(preprocessed_target, p, cfg).reshaped<Eigen::RowMajor>();
    }
    auto norm = normalize_points(source_landmarks);
    obs.norm_points = std::move(norm.points);
    obs.centroid = norm.centroid;
    obs.scale = norm.scale;
    return obs;
}

Observation encode(const ImagePair& pair, const GrayImage& preprocessed_source,
                   const GrayImage& preprocessed_target, const ObsConfig& cfg) {
    return encode(pair.source_landmarks, preprocessed_source, preprocessed_target, cfg);
}

} // namespace fundreg
