#include "fundreg/augment.hpp"

#include "fundreg/imageops.hpp"

#include <numbers>

namespace fundreg {

namespace {

constexpr Scalar kDeg = std::numbers::pi / 180.0;

void require(bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

} // namespace

void AffineRanges::validate() const {
    require(rot_deg >= 0 && shear >= 0 && trans >= 0, "affine ranges: half-widths must be >= 0");
    require(scale_lo > 0 && scale_hi >= scale_lo, "affine ranges: scale interval must be positive and ordered");
}

void AugmentConfig::validate() const {
    require(copies >= 0, "augment: copies must be >= 0");
    require(brightness >= 0, "augment: brightness half-width must be >= 0");
    require(contrast_lo > 0 && contrast_hi >= contrast_lo, "augment: contrast interval must be positive and ordered");
    affine.validate();
}

GrayImage jitter_intensity(const GrayImage& img, Scalar brightness, Scalar contrast) {
    require(contrast > 0, "jitter_intensity: contrast must be > 0");
    return (contrast * img.array() + brightness).cwiseMax(-1.0).cwiseMin(1.0).matrix();
}

Affine2D random_affine(Rng& rng, const AffineRanges& ranges, const Vec2& center) {
    ranges.validate();
    const Scalar theta = rng.uniform(-ranges.rot_deg, ranges.rot_deg) * kDeg;
    const Scalar s = rng.uniform(ranges.scale_lo, ranges.scale_hi);
    const Scalar h = rng.uniform(-ranges.shear, ranges.shear);
    const Scalar tx = rng.uniform(-ranges.trans, ranges.trans);
    const Scalar ty = rng.uniform(-ranges.trans, ranges.trans);
    // Shear magnitude below 1 keeps det = s^2 > 0.
    const Affine2D linear = Affine2D::rotation(theta) * Affine2D::scaling(s) * Affine2D::shearing(h);
    return Affine2D::translation(tx, ty) * about(linear, center);
}

GrayImage warp_image(const GrayImage& img, const Affine2D& t, Scalar fill) {
    const Affine2D inv = invert(t);
    GrayImage out(img.rows(), img.cols());
    for (Eigen::Index y = 0; y < img.rows(); ++y) {
        for (Eigen::Index x = 0; x < img.cols(); ++x) {
            const Vec2 src = inv(Vec2(static_cast<Scalar>(x), static_cast<Scalar>(y)));
            out(y, x) = sample_bilinear(img, src.x(), src.y(), fill);
        }
    }
    return out;
}

Displacements demonstrator(const LandmarkSet& source, const LandmarkSet& target) {
    if (source.cols() != target.cols()) {
        throw Error(ErrorCode::CountMismatch, std::to_string(source.cols()) + " source vs " +
                                                  std::to_string(target.cols()) + " target landmarks");
    }
    return target - source;
}

Displacements demonstrator(const ImagePair& pair) {
    return demonstrator(pair.source_landmarks, pair.target_landmarks);
}

ImagePair standardized_pair(const ImagePair& pair) {
    ImagePair out = pair;
    out.source = standardize(as_gray(pair.source));
    out.target = standardize(as_gray(pair.target));
    return out;
}

AugmentedPair augment_copy(const ImagePair& standardized, const AugmentConfig& cfg, int index) {
    const auto& source = std::get<GrayImage>(standardized.source);
    const auto& target = std::get<GrayImage>(standardized.target);
    const Vec2 center(0.5 * static_cast<Scalar>(source.cols() - 1), 0.5 * static_cast<Scalar>(source.rows() - 1));

    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(index)));
    const Scalar b_src = rng.uniform(-cfg.brightness, cfg.brightness);
    const Scalar c_src = rng.uniform(cfg.contrast_lo, cfg.contrast_hi);
    const Scalar b_tgt = rng.uniform(-cfg.brightness, cfg.brightness);
    const Scalar c_tgt = rng.uniform(cfg.contrast_lo, cfg.contrast_hi);
    const Affine2D t = random_affine(rng, cfg.affine, center);

    AugmentedPair copy;
    copy.source_transform = t;
    copy.pair.id = standardized.id;
    copy.pair.category = standardized.category;
    copy.pair.target_landmarks = standardized.target_landmarks;
    copy.pair.source_landmarks = t(standardized.source_landmarks);
    copy.pair.target = jitter_intensity(target, b_tgt, c_tgt);
    const GrayImage src = jitter_intensity(source, b_src, c_src);
    // Mean fill keeps the frame border from reading as a vessel edge.
    copy.pair.source = warp_image(src, t, src.mean());
    return copy;
}

std::vector<AugmentedPair> augment_pair(const ImagePair& pair, const AugmentConfig& cfg) {
    cfg.validate();
    check_pair(pair);
    std::vector<AugmentedPair> out;
    out.reserve(static_cast<std::size_t>(cfg.copies));
    if (cfg.copies == 0) return out;
    const ImagePair base = standardized_pair(pair);
    for (int i = 0; i < cfg.copies; ++i) out.push_back(augment_copy(base, cfg, i));
    return out;
}

} // namespace fundreg
