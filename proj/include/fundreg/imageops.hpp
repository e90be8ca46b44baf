#ifndef FUNDREG_IMAGEOPS_HPP
#define FUNDREG_IMAGEOPS_HPP

#include "fundreg/core.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace fundreg {

enum class GrayMode { GreenChannel, Luma };

enum class Polarity { DarkOnBright, BrightOnDark };

struct FrangiConfig {
    std::vector<Scalar> scales{1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0};
    Scalar beta = 0.5;
    // Unset means half the largest structureness seen in the image.
    std::optional<Scalar> c;
    Polarity polarity = Polarity::DarkOnBright;

    void validate() const;
};

struct GuidedFilterConfig {
    int radius = 2;
    Scalar eps = 1e-2;

    void validate() const;
};

struct Hessian {
    GrayImage xx;
    GrayImage xy;
    GrayImage yy;
};

enum class ResampleFactor { Down4, Up4 };

enum class Branch { None, HistEqLoG, GuidedFrangi };

std::string_view to_string(Branch b);
Branch branch_from_string(std::string_view s);

struct PreprocessParams {
    Branch branch = Branch::GuidedFrangi;
    GrayMode gray_mode = GrayMode::GreenChannel;
    int hist_bins = 256;
    Scalar log_sigma = 2.0;
    GuidedFilterConfig guided;
    FrangiConfig frangi;
};

GrayImage to_gray(const RgbImage& img, GrayMode mode = GrayMode::GreenChannel);

/// Linear map of [min, max] onto [-1, 1]; constant images become all zeros.
GrayImage standardize(const GrayImage& img);

/// CDF remapping over `bins` equal-width bins spanning the value range, rescaled to [-1, 1].
GrayImage hist_equalize(const GrayImage& img, int bins = 256);

/// Sampled Gaussian, half-width ceil(3 sigma), normalized to unit sum.
std::vector<Scalar> gaussian_kernel(Scalar sigma);

/// Separable Gaussian smoothing with mirror (reflect-101) boundaries.
GrayImage gaussian_blur(const GrayImage& img, Scalar sigma);

/// Scale-normalized second derivatives sigma^2 * (Ixx, Ixy, Iyy) of the smoothed image.
Hessian hessian_2d(const GrayImage& img, Scalar sigma);

/// Scale-normalized Laplacian of Gaussian sigma^2 * (Ixx + Iyy).
GrayImage log_filter(const GrayImage& img, Scalar sigma);

/// Mean over the (2r+1)^2 window clipped to the image, normalized by the clipped pixel count.
GrayImage box_mean(const GrayImage& img, int radius);

GrayImage guided_filter(const GrayImage& guide, const GrayImage& input,
                        const GuidedFilterConfig& cfg);

/// Multi-scale Frangi vesselness, maximum over scales, rescaled to [0, 1].
GrayImage frangi_vesselness(const GrayImage& img, const FrangiConfig& cfg = {});

GrayImage resample(const GrayImage& img, ResampleFactor factor);

GrayImage preprocess(const GrayImage& img, const PreprocessParams& params);
GrayImage preprocess(const RgbImage& img, const PreprocessParams& params);
GrayImage preprocess(const AnyImage& img, const PreprocessParams& params);

/// Grayscale view of either image kind (green channel / luma for color input).
GrayImage as_gray(const AnyImage& img, GrayMode mode = GrayMode::GreenChannel);

/// Bilinear sample at continuous (x, y); returns `fill` outside [0, w-1] x [0, h-1].
Scalar sample_bilinear(const GrayImage& img, Scalar x, Scalar y, Scalar fill);

} // namespace fundreg

#endif // FUNDREG_IMAGEOPS_HPP
