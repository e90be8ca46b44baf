#include "fundreg/augment.hpp"

#include "fundreg/imageops.hpp"
#include "fundreg/registration.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <numbers>

using namespace fundreg;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

ImagePair small_pair(std::uint64_t seed) {
    Rng rng(seed);
    ImagePair p;
    p.id = "X001";
    p.category = Category::Synthetic;
    p.source = standardize(test::random_image(64, 64, seed));
    p.target = standardize(test::random_image(64, 64, seed + 1));
    p.source_landmarks = test::random_points(rng, 6, 10, 54);
    p.target_landmarks = test::random_points(rng, 6, 10, 54);
    return p;
}

} // namespace

TEST_CASE("jitter_intensity examples") {
    const GrayImage img = test::random_image(8, 8, 1);
    CHECK_EQ(jitter_intensity(img, 0, 1), img);
    const GrayImage half = GrayImage::Constant(3, 3, 0.5);
    CHECK_LT((jitter_intensity(half, 0.3, 1).array() - 0.8).abs().maxCoeff(), 1e-15);
    const GrayImage high = GrayImage::Constant(3, 3, 0.9);
    CHECK_EQ(jitter_intensity(high, 0.3, 1), GrayImage::Constant(3, 3, 1.0));
    CHECK_EQ(jitter_intensity(-high, -0.3, 1), GrayImage::Constant(3, 3, -1.0));
}

TEST_CASE("random_affine neutral ranges give identity") {
    Rng rng(4);
    const Affine2D t = random_affine(rng, AffineRanges::neutral(), Vec2(10, 20));
    CHECK_LT((t.matrix() - Affine2D::identity().matrix()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST_CASE("random_affine is seeded") {
    Rng a(99);
    Rng b(99);
    for (int i = 0; i < 10; ++i) CHECK_EQ(random_affine(a, {}).matrix(), random_affine(b, {}).matrix());
}

TEST_CASE("random_affine sampling covers the rotation range with positive determinant") {
    Rng rng(7);
    const AffineRanges ranges;
    double lo = 1e9;
    double hi = -1e9;
    for (int i = 0; i < 10000; ++i) {
        const Affine2D t = random_affine(rng, ranges);
        CHECK_GT(t.determinant(), 0);
        // Rotation of R*S*H: the first column of the linear part is s*(cos, sin).
        const double angle = std::atan2(t.linear()(1, 0), t.linear()(0, 0)) / kDeg;
        lo = std::min(lo, angle);
        hi = std::max(hi, angle);
    }
    CHECK_GE(hi - lo, 0.9 * 2 * ranges.rot_deg);
    CHECK_LE(hi, ranges.rot_deg + 1e-9);
    CHECK_GE(lo, -ranges.rot_deg - 1e-9);
}

TEST_CASE("random_affine fixes the center up to translation") {
    AffineRanges r;
    r.trans = 0;
    Rng rng(3);
    const Vec2 c(127.5, 127.5);
    for (int i = 0; i < 100; ++i) CHECK_LT((random_affine(rng, r, c)(c) - c).norm(), 1e-9);
}

TEST_CASE("warp_image identity and integer shift") {
    const GrayImage img = test::random_image(20, 30, 2);
    CHECK_LT((warp_image(img, Affine2D::identity(), 0) - img).cwiseAbs().maxCoeff(), 1e-12);

    GrayImage impulse = GrayImage::Zero(32, 32);
    impulse(10, 10) = 1;
    const GrayImage moved = warp_image(impulse, Affine2D::translation(5, 0), 0);
    CHECK_EQ(moved(10, 15), doctest::Approx(1.0));
    CHECK_LT(moved.sum() - 1.0, 1e-12);
    CHECK_EQ(moved(10, 10), 0.0);
}

TEST_CASE("warp_image fill outside and singular transform") {
    const GrayImage img = GrayImage::Constant(10, 10, 0.5);
    const GrayImage out = warp_image(img, Affine2D::translation(20, 0), -3);
    CHECK_EQ(out(5, 5), -3.0);
    CHECK_ERROR_CODE(warp_image(img, Affine2D(1, 1, 0, 1, 1, 0), 0), ErrorCode::SingularTransform);
}

TEST_CASE("warp_image round trip on a smooth image") {
    GrayImage img(96, 96);
    for (int y = 0; y < 96; ++y)
        for (int x = 0; x < 96; ++x) img(y, x) = std::sin(x / 9.0) * std::cos(y / 11.0);
    const Affine2D t = about(Affine2D::rotation(7 * kDeg) * Affine2D::scaling(1.05), Vec2(47.5, 47.5)) *
                       Affine2D::translation(2.3, -1.7);
    const GrayImage back = warp_image(warp_image(img, t, 0), invert(t), 0);
    const Eigen::Index m = 20;
    const auto inner = (back - img).block(m, m, 96 - 2 * m, 96 - 2 * m);
    CHECK_LT(std::sqrt(inner.squaredNorm() / static_cast<double>(inner.size())), 0.02);
}

TEST_CASE("demonstrator examples") {
    Rng rng(8);
    const LandmarkSet src = test::random_points(rng, 10);
    CHECK_EQ(demonstrator(src, src), Displacements::Zero(2, 10));
    const LandmarkSet shifted = src.colwise() + Vec2(3, -4);
    const Displacements d = demonstrator(src, shifted);
    for (Eigen::Index i = 0; i < 10; ++i) CHECK_LT((d.col(i) - Vec2(3, -4)).norm(), 1e-12);
    const Affine2D t = test::random_affine_transform(rng);
    const Displacements da = demonstrator(src, t(src));
    for (Eigen::Index i = 0; i < 10; ++i) CHECK_LT((da.col(i) - (t(Vec2(src.col(i))) - src.col(i))).norm(), 1e-9);
    CHECK_ERROR_CODE(demonstrator(src, src.leftCols(9)), ErrorCode::CountMismatch);
}

TEST_CASE("augment_pair copy count and zero copies") {
    const ImagePair p = small_pair(1);
    AugmentConfig cfg;
    cfg.copies = 0;
    CHECK(augment_pair(p, cfg).empty());
    cfg.copies = 5;
    CHECK_EQ(augment_pair(p, cfg).size(), 5);
}

TEST_CASE("augment_pair zero-width ranges reproduce the input") {
    const ImagePair p = small_pair(2);
    AugmentConfig cfg;
    cfg.copies = 3;
    cfg.brightness = 0;
    cfg.contrast_lo = cfg.contrast_hi = 1;
    cfg.affine = AffineRanges::neutral();
    for (const auto& c : augment_pair(p, cfg)) {
        CHECK_LT((std::get<GrayImage>(c.pair.source) - std::get<GrayImage>(p.source)).cwiseAbs().maxCoeff(), 1e-12);
        CHECK_LT((std::get<GrayImage>(c.pair.target) - std::get<GrayImage>(p.target)).cwiseAbs().maxCoeff(), 1e-12);
        CHECK_LT((c.pair.source_landmarks - p.source_landmarks).cwiseAbs().maxCoeff(), 1e-12);
        CHECK_EQ(c.pair.target_landmarks, p.target_landmarks);
    }
}

TEST_CASE("augment_pair bookkeeping") {
    const ImagePair p = small_pair(3);
    AugmentConfig cfg;
    cfg.copies = 16;
    cfg.seed = 5;
    const auto copies = augment_pair(p, cfg);
    for (const auto& c : copies) {
        // Target side is never geometrically altered.
        CHECK_EQ(c.pair.target_landmarks, p.target_landmarks);
        CHECK_EQ(c.pair.source_landmarks.cols(), p.source_landmarks.cols());
        const Displacements expected = p.target_landmarks - c.source_transform(p.source_landmarks);
        CHECK_LT((demonstrator(c.pair) - expected).cwiseAbs().maxCoeff(), 1e-9);
        CHECK_GT(c.source_transform.determinant(), 0);
        CHECK_EQ(c.pair.id, p.id);
        CHECK_LE(std::get<GrayImage>(c.pair.source).cwiseAbs().maxCoeff(), 1.0);
    }
    // Deterministic per seed, and copy i does not depend on how many copies are made.
    const auto again = augment_pair(p, cfg);
    AugmentConfig fewer = cfg;
    fewer.copies = 4;
    const auto prefix = augment_pair(p, fewer);
    for (int i = 0; i < 4; ++i) {
        CHECK_EQ(std::get<GrayImage>(again[i].pair.source), std::get<GrayImage>(copies[i].pair.source));
        CHECK_EQ(prefix[i].source_transform.matrix(), copies[i].source_transform.matrix());
    }
    CHECK_NE(copies[0].source_transform.matrix(), copies[1].source_transform.matrix());
}

TEST_CASE("augmented copies keep anatomical correspondence on synthetic pairs") {
    SynthConfig sc;
    sc.seed = 31;
    const SyntheticPair sp = synth_pair(sc);
    AugmentConfig cfg;
    cfg.copies = 8;
    for (const auto& c : augment_pair(sp.pair, cfg)) {
        // Copy source point i maps back to the original source point i, which the
        // ground truth sends to target point i.
        const LandmarkSet back = invert(c.source_transform)(c.pair.source_landmarks);
        CHECK_LT((sp.truth(back) - c.pair.target_landmarks).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST_CASE("config validation") {
    AugmentConfig bad;
    bad.copies = -1;
    CHECK_THROWS_AS(bad.validate(), Error);
    AugmentConfig contrast;
    contrast.contrast_lo = 0;
    CHECK_THROWS_AS(contrast.validate(), Error);
    AffineRanges r;
    r.scale_lo = 2;
    r.scale_hi = 1;
    CHECK_THROWS_AS(r.validate(), Error);
    SynthConfig s;
    s.size = 32;
    CHECK_THROWS_AS(s.validate(), Error);
    s = SynthConfig{};
    s.n_landmarks = 2;
    CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("synth_pair determinism and shapes") {
    SynthConfig sc;
    sc.seed = 17;
    const SyntheticPair a = synth_pair(sc);
    const SyntheticPair b = synth_pair(sc);
    CHECK_EQ(std::get<GrayImage>(a.pair.source), std::get<GrayImage>(b.pair.source));
    CHECK_EQ(std::get<GrayImage>(a.pair.target), std::get<GrayImage>(b.pair.target));
    CHECK_EQ(a.pair.source_landmarks, b.pair.source_landmarks);
    CHECK_EQ(a.pair.category, Category::Synthetic);
    CHECK_EQ(a.pair.source_landmarks.cols(), 10);
    const auto& s = std::get<GrayImage>(a.pair.source);
    CHECK_EQ(s.rows(), 256);
    CHECK_EQ(s.cols(), 256);
    CHECK_GE(s.minCoeff(), 0.0);
    CHECK_LE(s.maxCoeff(), 1.0);
    CHECK_LT((a.truth(a.pair.source_landmarks) - a.pair.target_landmarks).cwiseAbs().maxCoeff(), 1e-9);
}

TEST_CASE("synth_pair neutral transform keeps geometry") {
    SynthConfig sc;
    sc.seed = 2;
    sc.transform = AffineRanges::neutral();
    const SyntheticPair sp = synth_pair(sc);
    CHECK_LT(demonstrator(sp.pair).cwiseAbs().maxCoeff(), 1e-12);
}

TEST_CASE("synth_pair ground truth is recoverable by an affine fit") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SynthConfig sc;
        sc.seed = seed;
        const SyntheticPair sp = synth_pair(sc);
        const Affine2D fit = fit_transform(sp.pair.source_landmarks,
                                           sp.pair.source_landmarks + demonstrator(sp.pair), TransformModel::Affine);
        CHECK_LT((fit.matrix() - sp.truth.matrix()).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST_CASE("synth_pair landmarks lie inside the frame on both sides") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        SynthConfig sc;
        sc.seed = seed;
        const SyntheticPair sp = synth_pair(sc);
        for (const auto* pts : {&sp.pair.source_landmarks, &sp.pair.target_landmarks}) {
            CHECK_GE(pts->minCoeff(), 0.0);
            CHECK_LE(pts->maxCoeff(), 255.0);
        }
        // Distinct points: no two landmarks closer than a few pixels.
        for (Eigen::Index i = 0; i < 10; ++i)
            for (Eigen::Index j = i + 1; j < 10; ++j)
                CHECK_GT((sp.pair.source_landmarks.col(i) - sp.pair.source_landmarks.col(j)).norm(), 5.0);
    }
}

TEST_CASE("synth_pair vessels are darker than background") {
    SynthConfig sc;
    sc.seed = 6;
    const SyntheticPair sp = synth_pair(sc);
    const auto& img = std::get<GrayImage>(sp.pair.source);
    double on = 0;
    int n_on = 0;
    for (const auto& line : sp.centerlines) {
        for (Eigen::Index i = 0; i < line.cols(); ++i) {
            const Vec2 c = line.col(i);
            if (c.minCoeff() < 0 || c.maxCoeff() > 255) continue;
            on += sample_bilinear(img, c.x(), c.y(), 0);
            ++n_on;
        }
    }
    REQUIRE_GT(n_on, 100);
    CHECK_LT(on / n_on, img.mean() - 0.1);
}
