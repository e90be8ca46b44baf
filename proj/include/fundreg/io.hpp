#ifndef FUNDREG_IO_HPP
#define FUNDREG_IO_HPP

#include "fundreg/core.hpp"
#include "fundreg/imageops.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace fundreg {

enum class CoordinateOrigin { ZeroBased, OneBased };

/// Column order of the ground-truth rows.
enum class ColumnOrder { SourceFirst, TargetFirst };

/// FIRE on-disk layout: <images>/<id>_1.<ext> (source), <images>/<id>_2.<ext> (target) and
/// <ground_truth>/control_points_<id>_1_2.txt. The id's first letter is the category
/// (A, P, S; X marks generated pairs).
struct DatasetLayout {
    std::filesystem::path images_dir;
    std::filesystem::path ground_truth_dir;
    CoordinateOrigin coordinate_origin = CoordinateOrigin::ZeroBased;
    ColumnOrder column_order = ColumnOrder::SourceFirst;

    /// <root>/Images and <root>/Ground Truth, as FIRE ships them.
    static DatasetLayout under(const std::filesystem::path& root);
};

struct LoadOptions {
    bool strict = true;          // throw on the first bad pair instead of collecting errors
    bool load_images = true;     // false loads landmarks only
    bool gray = false;           // convert color images to gray on load
    GrayMode gray_mode = GrayMode::GreenChannel;
};

struct LoadedDataset {
    std::vector<ImagePair> pairs;    // sorted by id
    std::vector<std::string> errors; // lenient mode only
};

/// Decodes binary PGM (P5) and PPM (P6), 8 or 16 bit; samples scaled by maxval to [0, 1].
AnyImage load_image(const std::filesystem::path& path);

enum class PixelRange { Signed, Unit };

/// P5 with [-1, 1] (Signed) or [0, 1] (Unit) mapped linearly onto 0..255.
void save_image(const GrayImage& img, const std::filesystem::path& path, PixelRange range = PixelRange::Signed);

/// P6 from [0, 1] channels.
void save_image(const RgbImage& img, const std::filesystem::path& path);

/// One "x y" row per landmark with round-trip precision.
void save_points(const LandmarkSet& pts, const std::filesystem::path& path);
LandmarkSet load_points(const std::filesystem::path& path);

void save_transform(const Affine2D& t, const std::filesystem::path& path);
Affine2D load_transform(const std::filesystem::path& path);

/// Rows "x_src y_src x_tgt y_tgt" (or target first); returns {source, target}.
std::pair<LandmarkSet, LandmarkSet> load_ground_truth(const std::filesystem::path& path,
                                                      ColumnOrder order = ColumnOrder::SourceFirst,
                                                      CoordinateOrigin origin = CoordinateOrigin::ZeroBased);

void save_ground_truth(const LandmarkSet& source, const LandmarkSet& target, const std::filesystem::path& path);

LoadedDataset load_fire(const DatasetLayout& layout, const LoadOptions& options = {});

Category category_from_id(const std::string& id);

} // namespace fundreg

#endif // FUNDREG_IO_HPP
