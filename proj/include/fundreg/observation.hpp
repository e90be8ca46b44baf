#ifndef FUNDREG_OBSERVATION_HPP
#define FUNDREG_OBSERVATION_HPP

#include "fundreg/core.hpp"

namespace fundreg {

struct ObsConfig {
    int patch_size = 20;   // C, samples per side
    Scalar spacing = 40;   // S, full-resolution pixels between samples
    Scalar fill = 0;       // value of samples that fall off the image

    void validate() const;
    [[nodiscard]] Scalar extent() const { return (patch_size - 1) * spacing; }
};

struct PointNormalization {
    Eigen::Matrix2Xd points;
    Vec2 centroid = Vec2::Zero();
    Scalar scale = 1;
};

/// Network input for one pair: per-landmark source/target patches plus the
/// normalized source point layout.
struct Observation {
    // 2*K patches of C*C samples: landmark-major, source before target, row-major.
    Eigen::VectorXd patches;
    Eigen::Matrix2Xd norm_points;
    Vec2 centroid = Vec2::Zero();
    Scalar scale = 1;
    int patch_size = 0;

    [[nodiscard]] Eigen::Index landmark_count() const { return norm_points.cols(); }

    /// patches followed by the normalized points as (x0, y0, x1, y1, ...).
    [[nodiscard]] Eigen::VectorXd flatten() const;
};

/// Length of Observation::flatten() for K landmarks and patch side C.
constexpr Eigen::Index observation_length(Eigen::Index landmarks, Eigen::Index patch_size) {
    return 2 * landmarks * patch_size * patch_size + 2 * landmarks;
}

/// C x C bilinear samples on the grid center + S * (j - (C-1)/2, i - (C-1)/2).
GrayImage extract_patch(const GrayImage& img, const Vec2& center, const ObsConfig& cfg);

/// Centers on the centroid and divides by the RMS radius.
PointNormalization normalize_points(const LandmarkSet& pts);

/// Both patches of landmark i are sampled at source landmark i.
Observation encode(const LandmarkSet& source_landmarks, const GrayImage& preprocessed_source,
                   const GrayImage& preprocessed_target, const ObsConfig& cfg);

Observation encode(const ImagePair& pair, const GrayImage& preprocessed_source,
                   const GrayImage& preprocessed_target, const ObsConfig& cfg);

} // namespace fundreg

#endif // FUNDREG_OBSERVATION_HPP
