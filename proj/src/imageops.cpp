#include "fundreg/imageops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fundreg {

namespace {

using Index = Eigen::Index;

// Mirror index without repeating the edge sample: ... 2 1 | 0 1 2 ... n-1 | n-2 ...
Index reflect(Index i, Index n) {
    if (n == 1) return 0;
    const Index period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

// Convolves along x for the selected rows only.
GrayImage convolve_x(const GrayImage& img, const std::vector<Scalar>& k, Index col_step = 1) {
    const Index h = img.rows();
    const Index w = img.cols();
    const Index r = static_cast<Index>(k.size() / 2);
    const Index out_w = (w + col_step - 1) / col_step;
    GrayImage out(h, out_w);
    for (Index y = 0; y < h; ++y) {
        for (Index ox = 0; ox < out_w; ++ox) {
            const Index x = ox * col_step;
            Scalar acc = 0;
            for (Index j = -r; j <= r; ++j) {
                acc += k[static_cast<std::size_t>(j + r)] * img(y, reflect(x + j, w));
            }
            out(y, ox) = acc;
        }
    }
    return out;
}

GrayImage convolve_y(const GrayImage& img, const std::vector<Scalar>& k, Index row_step = 1) {
    const Index h = img.rows();
    const Index w = img.cols();
    const Index r = static_cast<Index>(k.size() / 2);
    const Index out_h = (h + row_step - 1) / row_step;
    GrayImage out = GrayImage::Zero(out_h, w);
    for (Index oy = 0; oy < out_h; ++oy) {
        const Index y = oy * row_step;
        for (Index j = -r; j <= r; ++j) {
            out.row(oy) += k[static_cast<std::size_t>(j + r)] * img.row(reflect(y + j, h));
        }
    }
    return out;
}

void require_positive_sigma(Scalar sigma) {
    if (!(sigma > 0) || !std::isfinite(sigma)) {
        throw Error(ErrorCode::InvalidArgument, "sigma must be positive, got " + std::to_string(sigma));
    }
}

} // namespace

void FrangiConfig::validate() const {
    if (scales.empty()) throw Error(ErrorCode::InvalidArgument, "frangi: no scales");
    for (std::size_t i = 0; i < scales.size(); ++i) {
        if (!(scales[i] > 0)) throw Error(ErrorCode::InvalidArgument, "frangi: scales must be > 0");
        if (i > 0 && !(scales[i] > scales[i - 1])) {
            throw Error(ErrorCode::InvalidArgument, "frangi: scales must be strictly increasing");
        }
    }
    if (!(beta > 0)) throw Error(ErrorCode::InvalidArgument, "frangi: beta must be > 0");
    if (c && !(*c > 0)) throw Error(ErrorCode::InvalidArgument, "frangi: c must be > 0");
}

void GuidedFilterConfig::validate() const {
    if (radius < 1) throw Error(ErrorCode::InvalidArgument, "guided filter: radius must be >= 1");
    if (!(eps > 0)) throw Error(ErrorCode::InvalidArgument, "guided filter: eps must be > 0");
}

std::string_view to_string(Branch b) {
    switch (b) {
    case Branch::None: return "None";
    case Branch::HistEqLoG: return "HistEqLoG";
    case Branch::GuidedFrangi: return "GuidedFrangi";
    }
    return "None";
}

Branch branch_from_string(std::string_view s) {
    if (s == "None" || s == "none") return Branch::None;
    if (s == "HistEqLoG" || s == "histeq-log") return Branch::HistEqLoG;
    if (s == "GuidedFrangi" || s == "guided-frangi") return Branch::GuidedFrangi;
    throw Error(ErrorCode::InvalidArgument, "unknown preprocessing branch '" + std::string(s) + "'");
}

GrayImage to_gray(const RgbImage& img, GrayMode mode) {
    if (mode == GrayMode::GreenChannel) return img.green;
    return 0.299 * img.red + 0.587 * img.green + 0.114 * img.blue;
}

GrayImage as_gray(const AnyImage& img, GrayMode mode) {
    if (const auto* g = std::get_if<GrayImage>(&img)) return *g;
    return to_gray(std::get<RgbImage>(img), mode);
}

GrayImage standardize(const GrayImage& img) {
    if (img.size() == 0) return img;
    const Scalar lo = img.minCoeff();
    const Scalar hi = img.maxCoeff();
    if (!(hi > lo)) return GrayImage::Zero(img.rows(), img.cols());
    const Scalar scale = 2.0 / (hi - lo);
    GrayImage out = ((img.array() - lo) * scale - 1.0).matrix();
    // Pin the endpoints against rounding.
    return out.cwiseMax(-1.0).cwiseMin(1.0);
}

GrayImage hist_equalize(const GrayImage& img, int bins) {
    if (bins < 2) throw Error(ErrorCode::InvalidArgument, "hist_equalize: bins must be >= 2");
    if (img.size() == 0) return img;
    const Scalar lo = img.minCoeff();
    const Scalar hi = img.maxCoeff();
    const Scalar range = hi - lo;
    auto bin_of = [&](Scalar v) {
        if (!(range > 0)) return 0;
        const auto b = static_cast<int>(std::floor((v - lo) / range * bins));
        return std::clamp(b, 0, bins - 1);
    };
    std::vector<double> cdf(static_cast<std::size_t>(bins), 0.0);
    for (Eigen::Index i = 0; i < img.size(); ++i) cdf[static_cast<std::size_t>(bin_of(img.data()[i]))] += 1.0;
    double run = 0;
    for (auto& c : cdf) {
        run += c;
        c = run / static_cast<double>(img.size());
    }
    GrayImage out(img.rows(), img.cols());
    for (Eigen::Index i = 0; i < img.size(); ++i) {
        out.data()[i] = 2.0 * cdf[static_cast<std::size_t>(bin_of(img.data()[i]))] - 1.0;
    }
    return out;
}

std::vector<Scalar> gaussian_kernel(Scalar sigma) {
    require_positive_sigma(sigma);
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<Scalar> k(static_cast<std::size_t>(2 * r + 1));
    Scalar sum = 0;
    for (int j = -r; j <= r; ++j) {
        const Scalar v = std::exp(-0.5 * j * j / (sigma * sigma));
        k[static_cast<std::size_t>(j + r)] = v;
        sum += v;
    }
    for (auto& v : k) v /= sum;
    return k;
}

GrayImage gaussian_blur(const GrayImage& img, Scalar sigma) {
    const auto k = gaussian_kernel(sigma);
    return convolve_x(convolve_y(img, k), k);
}

Hessian hessian_2d(const GrayImage& img, Scalar sigma) {
    const GrayImage g = gaussian_blur(img, sigma);
    const Index h = g.rows();
    const Index w = g.cols();
    const Scalar s2 = sigma * sigma;
    Hessian out{GrayImage(h, w), GrayImage(h, w), GrayImage(h, w)};
    for (Index y = 0; y < h; ++y) {
        const Index ym = reflect(y - 1, h);
        const Index yp = reflect(y + 1, h);
        for (Index x = 0; x < w; ++x) {
            const Index xm = reflect(x - 1, w);
            const Index xp = reflect(x + 1, w);
            const Scalar c = g(y, x);
            out.xx(y, x) = s2 * (g(y, xp) - 2.0 * c + g(y, xm));
            out.yy(y, x) = s2 * (g(yp, x) - 2.0 * c + g(ym, x));
            out.xy(y, x) = s2 * 0.25 * (g(yp, xp) - g(ym, xp) - g(yp, xm) + g(ym, xm));
        }
    }
    return out;
}

GrayImage log_filter(const GrayImage& img, Scalar sigma) {
    Hessian hs = hessian_2d(img, sigma);
    return hs.xx + hs.yy;
}

GrayImage box_mean(const GrayImage& img, int radius) {
    const Index h = img.rows();
    const Index w = img.cols();
    // Summed-area table with a zero border row/column.
    Eigen::MatrixXd sat = Eigen::MatrixXd::Zero(h + 1, w + 1);
    for (Index y = 0; y < h; ++y) {
        Scalar row = 0;
        for (Index x = 0; x < w; ++x) {
            row += img(y, x);
            sat(y + 1, x + 1) = sat(y, x + 1) + row;
        }
    }
    GrayImage out(h, w);
    for (Index y = 0; y < h; ++y) {
        const Index y0 = std::max<Index>(0, y - radius);
        const Index y1 = std::min<Index>(h, y + radius + 1);
        for (Index x = 0; x < w; ++x) {
            const Index x0 = std::max<Index>(0, x - radius);
            const Index x1 = std::min<Index>(w, x + radius + 1);
            const Scalar sum = sat(y1, x1) - sat(y0, x1) - sat(y1, x0) + sat(y0, x0);
            out(y, x) = sum / static_cast<Scalar>((y1 - y0) * (x1 - x0));
        }
    }
    return out;
}

GrayImage guided_filter(const GrayImage& guide, const GrayImage& input, const GuidedFilterConfig& cfg) {
    cfg.validate();
    if (guide.rows() != input.rows() || guide.cols() != input.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "guided_filter: guide and input differ in size");
    }
    const int r = cfg.radius;
    const GrayImage mean_i = box_mean(guide, r);
    const GrayImage mean_p = box_mean(input, r);
    const GrayImage corr_ip = box_mean(guide.cwiseProduct(input), r);
    const GrayImage corr_ii = box_mean(guide.cwiseProduct(guide), r);
    const GrayImage cov_ip = corr_ip - mean_i.cwiseProduct(mean_p);
    // Variance can dip slightly below zero through cancellation.
    const GrayImage var_i = (corr_ii - mean_i.cwiseProduct(mean_i)).cwiseMax(0.0);
    const GrayImage a = cov_ip.array() / (var_i.array() + cfg.eps);
    const GrayImage b = mean_p - a.cwiseProduct(mean_i);
    return box_mean(a, r).cwiseProduct(guide) + box_mean(b, r);
}

GrayImage frangi_vesselness(const GrayImage& img, const FrangiConfig& cfg) {
    cfg.validate();
    const Index h = img.rows();
    const Index w = img.cols();
    struct Eigenmaps {
        GrayImage small;  // |l1| <= |l2|
        GrayImage large;
    };
    std::vector<Eigenmaps> maps;
    maps.reserve(cfg.scales.size());
    Scalar max_structure = 0;
    for (Scalar sigma : cfg.scales) {
        const Hessian hs = hessian_2d(img, sigma);
        Eigenmaps em{GrayImage(h, w), GrayImage(h, w)};
        for (Index i = 0; i < img.size(); ++i) {
            const Scalar xx = hs.xx.data()[i];
            const Scalar xy = hs.xy.data()[i];
            const Scalar yy = hs.yy.data()[i];
            const Scalar mean = 0.5 * (xx + yy);
            const Scalar dev = std::sqrt(0.25 * (xx - yy) * (xx - yy) + xy * xy);
            Scalar l1 = mean + dev;
            Scalar l2 = mean - dev;
            if (std::abs(l1) > std::abs(l2)) std::swap(l1, l2);
            em.small.data()[i] = l1;
            em.large.data()[i] = l2;
            max_structure = std::max(max_structure, std::sqrt(l1 * l1 + l2 * l2));
        }
        maps.push_back(std::move(em));
    }

    GrayImage out = GrayImage::Zero(h, w);
    const Scalar c = cfg.c ? *cfg.c : 0.5 * max_structure;
    if (!(c > 0)) return out;
    const Scalar two_beta2 = 2.0 * cfg.beta * cfg.beta;
    const Scalar two_c2 = 2.0 * c * c;
    for (const auto& em : maps) {
        for (Index i = 0; i < out.size(); ++i) {
            const Scalar l1 = em.small.data()[i];
            const Scalar l2 = em.large.data()[i];
            const bool passes = cfg.polarity == Polarity::DarkOnBright ? l2 > 0 : l2 < 0;
            if (!passes) continue;
            const Scalar rb = l1 / l2;
            const Scalar s2 = l1 * l1 + l2 * l2;
            const Scalar v = std::exp(-rb * rb / two_beta2) * (1.0 - std::exp(-s2 / two_c2));
            out.data()[i] = std::max(out.data()[i], v);
        }
    }
    const Scalar peak = out.maxCoeff();
    if (peak > 0) out /= peak;
    return out;
}

GrayImage resample(const GrayImage& img, ResampleFactor factor) {
    const Index h = img.rows();
    const Index w = img.cols();
    if (factor == ResampleFactor::Down4) {
        if (h < 4 || w < 4) {
            throw Error(ErrorCode::ImageTooSmall,
                        "Down4 needs at least 4x4, got " + std::to_string(w) + "x" + std::to_string(h));
        }
        // Blur only at the rows and columns that survive decimation.
        const auto k = gaussian_kernel(2.0);
        return convolve_x(convolve_y(img, k, 4), k, 4);
    }

    if (h < 1 || w < 1) throw Error(ErrorCode::ImageTooSmall, "Up4 on empty image");
    GrayImage out(4 * h, 4 * w);
    // Output pixel X sits at source coordinate X / 4; beyond the last sample the
    // edge interval is extended linearly.
    auto locate = [](Index pos, Index n, Index& i0, Scalar& f) {
        const Scalar u = static_cast<Scalar>(pos) / 4.0;
        if (n == 1) {
            i0 = 0;
            f = 0;
            return;
        }
        i0 = std::min<Index>(static_cast<Index>(u), n - 2);
        f = u - static_cast<Scalar>(i0);
    };
    for (Index oy = 0; oy < 4 * h; ++oy) {
        Index y0;
        Scalar fy;
        locate(oy, h, y0, fy);
        const Index y1 = std::min<Index>(y0 + 1, h - 1);
        for (Index ox = 0; ox < 4 * w; ++ox) {
            Index x0;
            Scalar fx;
            locate(ox, w, x0, fx);
            const Index x1 = std::min<Index>(x0 + 1, w - 1);
            const Scalar top = (1 - fx) * img(y0, x0) + fx * img(y0, x1);
            const Scalar bot = (1 - fx) * img(y1, x0) + fx * img(y1, x1);
            out(oy, ox) = (1 - fy) * top + fy * bot;
        }
    }
    return out;
}

GrayImage preprocess(const GrayImage& img, const PreprocessParams& params) {
    const GrayImage base = standardize(img);
    switch (params.branch) {
    case Branch::None:
        return base;
    case Branch::HistEqLoG:
        return standardize(log_filter(hist_equalize(base, params.hist_bins), params.log_sigma));
    case Branch::GuidedFrangi: {
        const GrayImage small = resample(base, ResampleFactor::Down4);
        const GrayImage smooth = guided_filter(small, small, params.guided);
        const GrayImage vessels = frangi_vesselness(smooth, params.frangi);
        const GrayImage up = resample(vessels, ResampleFactor::Up4);
        return standardize(up.topLeftCorner(img.rows(), img.cols()));
    }
    }
    return base;
}

GrayImage preprocess(const RgbImage& img, const PreprocessParams& params) {
    return preprocess(to_gray(img, params.gray_mode), params);
}

GrayImage preprocess(const AnyImage& img, const PreprocessParams& params) {
    return preprocess(as_gray(img, params.gray_mode), params);
}

Scalar sample_bilinear(const GrayImage& img, Scalar x, Scalar y, Scalar fill) {
    const Index h = img.rows();
    const Index w = img.cols();
    if (!(x >= 0) || !(y >= 0) || x > static_cast<Scalar>(w - 1) || y > static_cast<Scalar>(h - 1)) {
        return fill;
    }
    const Index x0 = std::min<Index>(static_cast<Index>(x), std::max<Index>(w - 2, 0));
    const Index y0 = std::min<Index>(static_cast<Index>(y), std::max<Index>(h - 2, 0));
    const Index x1 = std::min<Index>(x0 + 1, w - 1);
    const Index y1 = std::min<Index>(y0 + 1, h - 1);
    const Scalar fx = x - static_cast<Scalar>(x0);
    const Scalar fy = y - static_cast<Scalar>(y0);
    const Scalar top = (1 - fx) * img(y0, x0) + fx * img(y0, x1);
    const Scalar bot = (1 - fx) * img(y1, x0) + fx * img(y1, x1);
    return (1 - fy) * top + fy * bot;
}

} // namespace fundreg
