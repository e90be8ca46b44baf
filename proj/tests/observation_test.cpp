#include "fundreg/observation.hpp"

#include "fundreg/augment.hpp"
#include "fundreg/imageops.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace fundreg;

namespace {

GrayImage plane(int h, int w, double a, double b, double c) {
    GrayImage img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img(y, x) = a * x + b * y + c;
    return img;
}

LandmarkSet ten_points(std::uint64_t seed) {
    Rng rng(seed);
    return test::random_points(rng, 10, 60, 200);
}

} // namespace

TEST_CASE("ObsConfig validation and extent") {
    CHECK_NOTHROW(ObsConfig{}.validate());
    CHECK_EQ(ObsConfig{8, 8, 0}.extent(), 56);
    CHECK_THROWS_AS((ObsConfig{0, 8, 0}.validate()), Error);
    CHECK_THROWS_AS((ObsConfig{4, 0, 0}.validate()), Error);
}

TEST_CASE("extract_patch constant image") {
    const GrayImage img = GrayImage::Constant(50, 60, 0.25);
    for (int c : {1, 3, 6}) {
        const GrayImage p = extract_patch(img, Vec2(30, 20), ObsConfig{c, 2.5, 0});
        CHECK_EQ(p.rows(), c);
        CHECK_EQ(p.cols(), c);
        CHECK_LT((p.array() - 0.25).abs().maxCoeff(), 1e-15);
    }
}

TEST_CASE("extract_patch single sample is bilinear at the center") {
    const GrayImage img = test::random_image(20, 20, 4);
    const GrayImage p = extract_patch(img, Vec2(7.3, 11.6), ObsConfig{1, 5, 0});
    CHECK_EQ(p(0, 0), doctest::Approx(sample_bilinear(img, 7.3, 11.6, 0)).epsilon(1e-15));
}

TEST_CASE("extract_patch ramp example") {
    const GrayImage img = test::ramp_x(120, 120);
    const GrayImage p = extract_patch(img, Vec2(50, 50), ObsConfig{3, 40, 0});
    for (int i = 0; i < 3; ++i) {
        CHECK_NEAR(p(i, 0), 10.0, 1e-12);
        CHECK_NEAR(p(i, 1), 50.0, 1e-12);
        CHECK_NEAR(p(i, 2), 90.0, 1e-12);
    }
}

TEST_CASE("extract_patch out of bounds uses fill") {
    const GrayImage img = GrayImage::Constant(10, 10, 1.0);
    const GrayImage p = extract_patch(img, Vec2(0, 0), ObsConfig{3, 20, -7});
    CHECK_EQ(p(1, 1), 1.0);
    CHECK_EQ(p(0, 0), -7.0);
    CHECK_EQ(p(2, 2), -7.0);
    CHECK_EQ(p(0, 1), -7.0);
}

TEST_CASE("extract_patch exact on planar images") {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const double a = rng.uniform(-2, 2);
        const double b = rng.uniform(-2, 2);
        const double c = rng.uniform(-5, 5);
        const GrayImage img = plane(64, 80, a, b, c);
        const ObsConfig cfg{5, rng.uniform(0.5, 6), 0};
        const Vec2 center(rng.uniform(20, 60), rng.uniform(20, 44));
        const GrayImage p = extract_patch(img, center, cfg);
        for (int i = 0; i < cfg.patch_size; ++i) {
            for (int j = 0; j < cfg.patch_size; ++j) {
                const double x = center.x() + cfg.spacing * (j - 2);
                const double y = center.y() + cfg.spacing * (i - 2);
                if (x < 0 || y < 0 || x > 79 || y > 63) continue;
                CHECK_NEAR(p(i, j), a * x + b * y + c, 1e-9);
            }
        }
    }
}

TEST_CASE("normalize_points examples") {
    LandmarkSet two(2, 2);
    two << -1, 1, 0, 0;
    PointNormalization n = normalize_points(two);
    CHECK_LT((n.points - two).norm(), 1e-15);
    CHECK_EQ(n.scale, doctest::Approx(1.0));
    CHECK_LT(n.centroid.norm(), 1e-15);

    LandmarkSet shifted(2, 2);
    shifted << 0, 2, 0, 0;
    n = normalize_points(shifted);
    CHECK_LT((n.points - two).norm(), 1e-15);
    CHECK_LT((n.centroid - Vec2(1, 0)).norm(), 1e-15);
    CHECK_EQ(n.scale, doctest::Approx(1.0));

    LandmarkSet square(2, 4);
    square << 0, 1, 1, 0, 0, 0, 1, 1;
    n = normalize_points(square);
    CHECK_EQ(n.scale, doctest::Approx(std::sqrt(0.5)));
    const double r = n.points.colwise().squaredNorm().mean();
    CHECK_NEAR(r, 1.0, 1e-12);
}

TEST_CASE("normalize_points degenerate sets") {
    LandmarkSet same(2, 3);
    same << 4, 4, 4, 2, 2, 2;
    CHECK_ERROR_CODE(normalize_points(same), ErrorCode::DegeneratePointSet);
    CHECK_ERROR_CODE(normalize_points(LandmarkSet::Zero(2, 1)), ErrorCode::DegeneratePointSet);
}

TEST_CASE("normalize_points invariants") {
    Rng rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        const LandmarkSet p = test::random_points(rng, 2 + static_cast<int>(rng.below(12)), -500, 500);
        const PointNormalization n = normalize_points(p);
        CHECK_LT(n.points.rowwise().mean().norm(), 1e-9);
        CHECK_NEAR(std::sqrt(n.points.colwise().squaredNorm().mean()), 1.0, 1e-9);

        const Vec2 shift(rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3));
        const double s = rng.uniform(0.01, 100);
        const LandmarkSet q = (s * p).colwise() + shift;
        CHECK_LT((normalize_points(q).points - n.points).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST_CASE("observation_length") {
    static_assert(observation_length(10, 20) == 8020);
    CHECK_EQ(observation_length(10, 8), 2 * 10 * 64 + 20);
    CHECK_EQ(observation_length(1, 1), 4);
}

TEST_CASE("encode layout and shapes") {
    const LandmarkSet pts = ten_points(2);
    const GrayImage src = test::random_image(256, 256, 3);
    const GrayImage tgt = test::random_image(256, 256, 4);
    const ObsConfig cfg{20, 3, 0};
    const Observation o = encode(pts, src, tgt, cfg);
    CHECK_EQ(o.patches.size(), 8000);
    CHECK_EQ(o.landmark_count(), 10);
    CHECK_EQ(o.flatten().size(), observation_length(10, 20));

    // Landmark 3: source block then target block, each row-major.
    const Eigen::Index block = 400;
    const GrayImage s3 = extract_patch(src, pts.col(3), cfg);
    const GrayImage t3 = extract_patch(tgt, pts.col(3), cfg);
    for (int i = 0; i < 20; ++i) {
        for (int j = 0; j < 20; ++j) {
            CHECK_EQ(o.patches(2 * 3 * block + i * 20 + j), s3(i, j));
            CHECK_EQ(o.patches((2 * 3 + 1) * block + i * 20 + j), t3(i, j));
        }
    }
    const Eigen::VectorXd flat = o.flatten();
    const PointNormalization n = normalize_points(pts);
    for (Eigen::Index k = 0; k < 10; ++k) {
        CHECK_EQ(flat(8000 + 2 * k), n.points(0, k));
        CHECK_EQ(flat(8000 + 2 * k + 1), n.points(1, k));
    }
}

TEST_CASE("encode identical images gives identical blocks") {
    const LandmarkSet pts = ten_points(8);
    const GrayImage img = test::random_image(256, 256, 9);
    const ObsConfig cfg{8, 8, 0};
    const Observation o = encode(pts, img, img, cfg);
    const Eigen::Index block = 64;
    for (Eigen::Index k = 0; k < 10; ++k) {
        CHECK_EQ(o.patches.segment(2 * k * block, block), o.patches.segment((2 * k + 1) * block, block));
    }
}

TEST_CASE("encode shifted ramp shifts target patches by d/S columns") {
    const double d = 8;
    const double s = 4;
    const GrayImage src = test::ramp_x(200, 200);
    const GrayImage tgt = (src.array() - d).matrix();   // target(x) = source(x - d)
    LandmarkSet pts(2, 3);
    pts << 80, 100, 120, 90, 100, 110;
    const ObsConfig cfg{6, s, 0};
    const Observation o = encode(pts, src, tgt, cfg);
    const auto shift = static_cast<int>(d / s);
    for (Eigen::Index k = 0; k < 3; ++k) {
        const Eigen::Map<const Image<double>> sp(o.patches.data() + 2 * k * 36, 6, 6);
        const Eigen::Map<const Image<double>> tp(o.patches.data() + (2 * k + 1) * 36, 6, 6);
        for (int i = 0; i < 6; ++i) {
            for (int j = shift; j < 6; ++j) CHECK_NEAR(tp(i, j), sp(i, j - shift), 1e-9);
        }
    }
}

TEST_CASE("encode from an ImagePair uses source landmarks only") {
    SynthConfig sc;
    sc.seed = 12;
    const SyntheticPair sp = synth_pair(sc);
    const GrayImage src = std::get<GrayImage>(sp.pair.source);
    const GrayImage tgt = std::get<GrayImage>(sp.pair.target);
    const ObsConfig cfg{4, 10, 0};
    const Observation a = encode(sp.pair, src, tgt, cfg);
    const Observation b = encode(sp.pair.source_landmarks, src, tgt, cfg);
    CHECK_EQ(a.flatten(), b.flatten());
    ImagePair moved = sp.pair;
    moved.target_landmarks.array() += 13.0;
    CHECK_EQ(encode(moved, src, tgt, cfg).flatten(), a.flatten());
}
