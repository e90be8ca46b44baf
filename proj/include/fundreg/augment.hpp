#ifndef FUNDREG_AUGMENT_HPP
#define FUNDREG_AUGMENT_HPP

#include "fundreg/core.hpp"
#include "fundreg/random.hpp"

#include <cstdint>
#include <vector>

namespace fundreg {

/// Sampling ranges for a random affine: translate * rotate * scale * shear about a center.
struct AffineRanges {
    Scalar rot_deg = 10;          // uniform in [-rot_deg, rot_deg]
    Scalar scale_lo = 0.9;
    Scalar scale_hi = 1.1;
    Scalar shear = 0.05;          // uniform in [-shear, shear]
    Scalar trans = 50;            // pixels, uniform in [-trans, trans] per axis

    void validate() const;
    static AffineRanges neutral() { return {0, 1, 1, 0, 0}; }
};

struct AugmentConfig {
    int copies = 64;
    Scalar brightness = 0.2;      // additive shift, uniform in [-brightness, brightness]
    Scalar contrast_lo = 0.8;
    Scalar contrast_hi = 1.25;
    AffineRanges affine;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthConfig {
    int size = 256;
    int n_vessels = 6;            // root trees
    Scalar width_lo = 3;          // vessel full width at half maximum, pixels
    Scalar width_hi = 5;
    int n_landmarks = 10;
    AffineRanges transform{5, 1, 1, 0, 30};
    Scalar brightness = 0.05;     // target intensity jitter
    Scalar contrast_lo = 0.9;
    Scalar contrast_hi = 1.1;
    Scalar noise = 0.01;          // additive Gaussian noise per image
    std::uint64_t seed = 0;

    void validate() const;
};

struct AugmentedPair {
    ImagePair pair;
    Affine2D source_transform;    // applied to the original source image and landmarks
};

struct SyntheticPair {
    ImagePair pair;
    Affine2D truth;               // maps source pixel coordinates to target pixel coordinates
    std::vector<Eigen::Matrix2Xd> centerlines;  // source-frame polylines, one per branch
};

/// clamp(contrast * img + brightness, -1, 1)
GrayImage jitter_intensity(const GrayImage& img, Scalar brightness, Scalar contrast);

Affine2D random_affine(Rng& rng, const AffineRanges& ranges, const Vec2& center = Vec2::Zero());

/// Inverse-mapped bilinear warp: out(p) = img(t^-1 p), `fill` off-image.
GrayImage warp_image(const GrayImage& img, const Affine2D& t, Scalar fill);

/// target_landmarks - source_landmarks, column by column.
Displacements demonstrator(const ImagePair& pair);
Displacements demonstrator(const LandmarkSet& source, const LandmarkSet& target);

/// Copies with independent intensity jitter on both sides and a random affine on the
/// source side only. Copy i draws from derive_seed(cfg.seed, i).
std::vector<AugmentedPair> augment_pair(const ImagePair& pair, const AugmentConfig& cfg);

/// Copy `index` of augment_pair, for a pair whose images are already standardized gray.
AugmentedPair augment_copy(const ImagePair& standardized, const AugmentConfig& cfg, int index);

/// Gray, standardized copy of the pair's images; landmarks and metadata unchanged.
ImagePair standardized_pair(const ImagePair& pair);

/// Renders a vessel tree, picks landmarks on branch points, and renders the target
/// through a random ground-truth affine.
SyntheticPair synth_pair(const SynthConfig& cfg);

} // namespace fundreg

#endif // FUNDREG_AUGMENT_HPP
