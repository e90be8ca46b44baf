#include "fundreg/augment.hpp"

#include "fundreg/imageops.hpp"

#include <algorithm>
#include <numbers>

namespace fundreg {

namespace {

constexpr Scalar kPi = std::numbers::pi;

struct Segment {
    Vec2 a;
    Vec2 b;
    Scalar width;
};

struct VesselTree {
    std::vector<Segment> segments;
    std::vector<Eigen::Matrix2Xd> branches;
    std::vector<Vec2> bifurcations;
};

// Children are 20% thinner than their parent but never thinner than min_width.
void grow_branch(Rng& rng, const Vec2& start, Scalar heading, Scalar width, Scalar min_width, int depth,
                 VesselTree& tree) {
    constexpr Scalar kStep = 6.0;
    const int steps = static_cast<int>(rng.uniform(7, 14));
    std::vector<Vec2> pts{start};
    Vec2 p = start;
    for (int s = 0; s < steps; ++s) {
        heading += 0.15 * rng.normal();
        const Vec2 q = p + kStep * Vec2(std::cos(heading), std::sin(heading));
        tree.segments.push_back({p, q, width});
        pts.push_back(q);
        p = q;
    }
    Eigen::Matrix2Xd line(2, static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) line.col(static_cast<Eigen::Index>(i)) = pts[i];
    tree.branches.push_back(std::move(line));
    if (depth == 0) return;
    tree.bifurcations.push_back(p);
    const Scalar spread_a = rng.uniform(25, 50) * kPi / 180.0;
    const Scalar spread_b = rng.uniform(25, 50) * kPi / 180.0;
    const Scalar child = std::max(0.8 * width, min_width);
    grow_branch(rng, p, heading + spread_a, child, min_width, depth - 1, tree);
    grow_branch(rng, p, heading - spread_b, child, min_width, depth - 1, tree);
}

Scalar segment_distance2(const Vec2& p, const Segment& s) {
    const Vec2 d = s.b - s.a;
    const Scalar len2 = d.squaredNorm();
    const Scalar u = len2 > 0 ? std::clamp((p - s.a).dot(d) / len2, 0.0, 1.0) : 0.0;
    return (p - (s.a + u * d)).squaredNorm();
}

// Vessels darken a vignetted bright background; overlapping vessels take the darker value.
GrayImage render(const std::vector<Segment>& segments, int size, Scalar noise, Rng& rng) {
    constexpr Scalar kContrast = 0.55;
    const Scalar c = 0.5 * (size - 1);
    const Scalar r2 = 2.0 * c * c;
    GrayImage darkness = GrayImage::Zero(size, size);
    for (const auto& s : segments) {
        const Scalar sd = s.width / 2.3548;
        const Scalar reach = 3.0 * sd + 1.0;
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min(s.a.x(), s.b.x()) - reach)));
        const int x1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(s.a.x(), s.b.x()) + reach)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min(s.a.y(), s.b.y()) - reach)));
        const int y1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(s.a.y(), s.b.y()) + reach)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const Scalar d2 = segment_distance2(Vec2(x, y), s);
                const Scalar v = kContrast * std::exp(-0.5 * d2 / (sd * sd));
                darkness(y, x) = std::max(darkness(y, x), v);
            }
        }
    }
    GrayImage img(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const Scalar rr = ((x - c) * (x - c) + (y - c) * (y - c)) / r2;
            const Scalar bg = 0.8 * (1.0 - 0.3 * rr);
            img(y, x) = std::clamp(bg * (1.0 - darkness(y, x)) + noise * rng.normal(), 0.0, 1.0);
        }
    }
    return img;
}

} // namespace

void SynthConfig::validate() const {
    if (size < 64) throw Error(ErrorCode::InvalidArgument, "synth: size must be >= 64");
    if (n_landmarks < 3) throw Error(ErrorCode::InvalidArgument, "synth: n_landmarks must be >= 3");
    if (n_vessels < 1) throw Error(ErrorCode::InvalidArgument, "synth: n_vessels must be >= 1");
    if (!(width_lo > 0) || width_hi < width_lo) throw Error(ErrorCode::InvalidArgument, "synth: bad width range");
    if (!(contrast_lo > 0) || contrast_hi < contrast_lo || brightness < 0 || noise < 0) {
        throw Error(ErrorCode::InvalidArgument, "synth: bad intensity jitter");
    }
    transform.validate();
}

SyntheticPair synth_pair(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const Scalar size = cfg.size;
    const Vec2 center(0.5 * (size - 1), 0.5 * (size - 1));
    const Scalar margin = std::max<Scalar>(0.12 * size, cfg.transform.trans + 8);
    const Scalar min_sep = 0.06 * size;

    VesselTree tree;
    std::vector<Vec2> picked;
    int roots = 0;
    while (true) {
        // Roots start anywhere on a canvas wider than the frame so vessels can move in.
        const int wanted = roots == 0 ? cfg.n_vessels : roots + 1;
        for (; roots < wanted; ++roots) {
            const Vec2 start(rng.uniform(-0.1 * size, 1.1 * size), rng.uniform(-0.1 * size, 1.1 * size));
            const Scalar heading = std::atan2(center.y() - start.y(), center.x() - start.x()) + rng.uniform(-0.8, 0.8);
            grow_branch(rng, start, heading, rng.uniform(cfg.width_lo, cfg.width_hi), cfg.width_lo, 3, tree);
        }
        std::vector<Vec2> candidates;
        for (const auto& b : tree.bifurcations) {
            if (b.x() >= margin && b.y() >= margin && b.x() <= size - 1 - margin && b.y() <= size - 1 - margin) {
                candidates.push_back(b);
            }
        }
        rng.shuffle(candidates.begin(), candidates.end());
        picked.clear();
        for (const auto& c : candidates) {
            const bool apart = std::all_of(picked.begin(), picked.end(),
                                           [&](const Vec2& q) { return (q - c).norm() >= min_sep; });
            if (apart) picked.push_back(c);
            if (static_cast<int>(picked.size()) == cfg.n_landmarks) break;
        }
        if (static_cast<int>(picked.size()) == cfg.n_landmarks) break;
        if (roots > 50 * cfg.n_vessels + 200) {
            throw Error(ErrorCode::InvalidArgument, "synth: cannot place " + std::to_string(cfg.n_landmarks) +
                                                        " separated landmarks inside the frame margin");
        }
    }

    const Affine2D truth = random_affine(rng, cfg.transform, center);
    const Scalar width_scale = std::sqrt(std::abs(truth.determinant()));
    std::vector<Segment> moved;
    moved.reserve(tree.segments.size());
    for (const auto& s : tree.segments) moved.push_back({truth(s.a), truth(s.b), s.width * width_scale});

    const Scalar b = rng.uniform(-cfg.brightness, cfg.brightness);
    const Scalar c = rng.uniform(cfg.contrast_lo, cfg.contrast_hi);
    Rng noise_src(derive_seed(cfg.seed, 1));
    Rng noise_tgt(derive_seed(cfg.seed, 2));

    SyntheticPair out;
    out.truth = truth;
    out.centerlines = std::move(tree.branches);
    out.pair.category = Category::Synthetic;
    out.pair.source_landmarks.resize(2, cfg.n_landmarks);
    for (int i = 0; i < cfg.n_landmarks; ++i) out.pair.source_landmarks.col(i) = picked[static_cast<std::size_t>(i)];
    out.pair.target_landmarks = truth(out.pair.source_landmarks);
    out.pair.source = render(tree.segments, cfg.size, cfg.noise, noise_src);
    const GrayImage target = render(moved, cfg.size, cfg.noise, noise_tgt);
    out.pair.target = GrayImage((c * target.array() + b).cwiseMax(0.0).cwiseMin(1.0).matrix());
    return out;
}

} // namespace fundreg
