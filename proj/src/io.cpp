#include "fundreg/io.hpp"

#include "fundreg/registration.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <regex>
#include <sstream>

namespace fundreg {

namespace fs = std::filesystem;

namespace {

std::string read_token(std::istream& in) {
    std::string tok;
    char ch = 0;
    while (in.get(ch)) {
        if (ch == '#') {
            std::string discard;
            std::getline(in, discard);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(ch)) != 0) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(ch);
    }
    return tok;
}

int parse_header_int(std::istream& in, const fs::path& path) {
    const std::string tok = read_token(in);
    int v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size() || v <= 0) {
        throw Error(ErrorCode::CorruptFile, path.string() + ": bad header field '" + tok + "'");
    }
    return v;
}

std::vector<double> parse_numbers(const std::string& line, bool& ok) {
    std::vector<double> v;
    std::istringstream ss(line);
    std::string tok;
    ok = true;
    while (ss >> tok) {
        double x = 0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || !std::isfinite(x)) {
            ok = false;
            return v;
        }
        v.push_back(x);
    }
    return v;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const fs::path& path) {
    if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    return in;
}

unsigned char to_byte(Scalar unit) {
    return static_cast<unsigned char>(std::lround(std::clamp(unit, 0.0, 1.0) * 255.0));
}

fs::path find_image(const fs::path& dir, const std::string& stem) {
    for (const char* ext : {".ppm", ".pgm", ".PPM", ".PGM"}) {
        const fs::path p = dir / (stem + ext);
        if (fs::exists(p)) return p;
    }
    throw Error(ErrorCode::MissingFile, (dir / (stem + ".ppm|.pgm")).string());
}

} // namespace

DatasetLayout DatasetLayout::under(const fs::path& root) {
    return DatasetLayout{root / "Images", root / "Ground Truth", CoordinateOrigin::ZeroBased,
                         ColumnOrder::SourceFirst};
}

AnyImage load_image(const fs::path& path) {
    std::ifstream in = open_in(path);
    const std::string magic = read_token(in);
    if (magic != "P5" && magic != "P6") {
        throw Error(ErrorCode::UnsupportedFormat, path.string() + ": magic '" + magic + "' (expected P5 or P6)");
    }
    const int width = parse_header_int(in, path);
    const int height = parse_header_int(in, path);
    const int maxval = parse_header_int(in, path);
    if (maxval > 65535) throw Error(ErrorCode::CorruptFile, path.string() + ": maxval above 65535");
    // read_token consumed the single whitespace byte after maxval.
    const int channels = magic == "P6" ? 3 : 1;
    const int bytes_per_sample = maxval > 255 ? 2 : 1;
    const auto count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * channels;
    std::vector<unsigned char> raw(count * static_cast<std::size_t>(bytes_per_sample));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw Error(ErrorCode::CorruptFile, path.string() + ": pixel data truncated (" + std::to_string(in.gcount()) +
                                                " of " + std::to_string(raw.size()) + " bytes)");
    }
    auto sample = [&](std::size_t i) {
        const unsigned v = bytes_per_sample == 2 ? (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
        return static_cast<Scalar>(v) / static_cast<Scalar>(maxval);
    };
    if (channels == 1) {
        GrayImage img(height, width);
        for (std::size_t i = 0; i < count; ++i) img.data()[i] = sample(i);
        return img;
    }
    RgbImage img(height, width);
    for (std::size_t i = 0; i < count / 3; ++i) {
        img.red.data()[i] = sample(3 * i);
        img.green.data()[i] = sample(3 * i + 1);
        img.blue.data()[i] = sample(3 * i + 2);
    }
    return img;
}

void save_image(const GrayImage& img, const fs::path& path, PixelRange range) {
    std::ofstream out = open_out(path);
    out << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
    std::vector<unsigned char> bytes(static_cast<std::size_t>(img.size()));
    for (Eigen::Index i = 0; i < img.size(); ++i) {
        const Scalar v = img.data()[i];
        bytes[static_cast<std::size_t>(i)] = to_byte(range == PixelRange::Signed ? 0.5 * (v + 1.0) : v);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

void save_image(const RgbImage& img, const fs::path& path) {
    std::ofstream out = open_out(path);
    out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
    std::vector<unsigned char> bytes(static_cast<std::size_t>(3 * img.red.size()));
    for (Eigen::Index i = 0; i < img.red.size(); ++i) {
        bytes[static_cast<std::size_t>(3 * i)] = to_byte(img.red.data()[i]);
        bytes[static_cast<std::size_t>(3 * i + 1)] = to_byte(img.green.data()[i]);
        bytes[static_cast<std::size_t>(3 * i + 2)] = to_byte(img.blue.data()[i]);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

void save_points(const LandmarkSet& pts, const fs::path& path) {
    std::ofstream out = open_out(path);
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
        out << format_number(pts(0, i)) << ' ' << format_number(pts(1, i)) << '\n';
    }
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

LandmarkSet load_points(const fs::path& path) {
    std::ifstream in = open_in(path);
    std::vector<Vec2> pts;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        bool ok = false;
        const auto v = parse_numbers(line, ok);
        if (ok && v.empty()) continue;
        if (!ok || v.size() != 2) {
            throw Error(ErrorCode::CorruptFile, path.string() + ":" + std::to_string(line_no) + ": expected 'x y'");
        }
        pts.emplace_back(v[0], v[1]);
    }
    LandmarkSet out(2, static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = pts[i];
    return out;
}

void save_transform(const Affine2D& t, const fs::path& path) {
    std::ofstream out = open_out(path);
    const auto p = t.params();
    out << "# a11 a12 tx a21 a22 ty\n";
    for (int i = 0; i < 6; ++i) out << format_number(p(i)) << (i == 5 ? '\n' : ' ');
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

Affine2D load_transform(const fs::path& path) {
    std::ifstream in = open_in(path);
    std::string line;
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        bool ok = false;
        const auto v = parse_numbers(line, ok);
        if (!ok) throw Error(ErrorCode::CorruptFile, path.string() + ": non-numeric transform entry");
        values.insert(values.end(), v.begin(), v.end());
    }
    if (values.size() != 6) throw Error(ErrorCode::CorruptFile, path.string() + ": expected 6 transform entries");
    return Affine2D(values[0], values[1], values[2], values[3], values[4], values[5]);
}

std::pair<LandmarkSet, LandmarkSet> load_ground_truth(const fs::path& path, ColumnOrder order,
                                                      CoordinateOrigin origin) {
    std::ifstream in = open_in(path);
    std::vector<std::array<double, 4>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        bool ok = false;
        const auto v = parse_numbers(line, ok);
        if (ok && v.empty()) continue;
        if (!ok || v.size() != 4) {
            throw Error(ErrorCode::MalformedGroundTruth,
                        path.string() + ":" + std::to_string(line_no) + ": expected 4 numeric fields");
        }
        rows.push_back({v[0], v[1], v[2], v[3]});
    }
    if (rows.empty()) throw Error(ErrorCode::MalformedGroundTruth, path.string() + ": no landmark rows");
    const double shift = origin == CoordinateOrigin::OneBased ? 1.0 : 0.0;
    LandmarkSet first(2, static_cast<Eigen::Index>(rows.size()));
    LandmarkSet second(2, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        first.col(c) = Vec2(rows[i][0] - shift, rows[i][1] - shift);
        second.col(c) = Vec2(rows[i][2] - shift, rows[i][3] - shift);
    }
    if (order == ColumnOrder::TargetFirst) return {second, first};
    return {first, second};
}

void save_ground_truth(const LandmarkSet& source, const LandmarkSet& target, const fs::path& path) {
    if (source.cols() != target.cols()) throw Error(ErrorCode::CountMismatch, "ground truth sets differ in size");
    std::ofstream out = open_out(path);
    for (Eigen::Index i = 0; i < source.cols(); ++i) {
        out << format_number(source(0, i)) << ' ' << format_number(source(1, i)) << ' '
            << format_number(target(0, i)) << ' ' << format_number(target(1, i)) << '\n';
    }
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

Category category_from_id(const std::string& id) {
    if (!id.empty()) {
        switch (id.front()) {
        case 'A': return Category::A;
        case 'P': return Category::P;
        case 'S': return Category::S;
        case 'X': return Category::Synthetic;
        default: break;
        }
    }
    throw Error(ErrorCode::UnknownCategory, "pair id '" + id + "' does not start with A, P, S or X");
}

LoadedDataset load_fire(const DatasetLayout& layout, const LoadOptions& options) {
    if (!fs::is_directory(layout.ground_truth_dir)) {
        throw Error(ErrorCode::MissingFile, layout.ground_truth_dir.string());
    }
    if (options.load_images && !fs::is_directory(layout.images_dir)) {
        throw Error(ErrorCode::MissingFile, layout.images_dir.string());
    }
    static const std::regex pattern(R"(control_points_(.+)_1_2\.txt)");
    std::vector<std::pair<std::string, fs::path>> entries;
    for (const auto& e : fs::directory_iterator(layout.ground_truth_dir)) {
        std::smatch m;
        const std::string name = e.path().filename().string();
        if (e.is_regular_file() && std::regex_match(name, m, pattern)) entries.emplace_back(m[1].str(), e.path());
    }
    std::sort(entries.begin(), entries.end());

    LoadedDataset out;
    for (const auto& [id, gt] : entries) {
        try {
            ImagePair pair;
            pair.id = id;
            pair.category = category_from_id(id);
            std::tie(pair.source_landmarks, pair.target_landmarks) =
                load_ground_truth(gt, layout.column_order, layout.coordinate_origin);
            if (options.load_images) {
                pair.source = load_image(find_image(layout.images_dir, id + "_1"));
                pair.target = load_image(find_image(layout.images_dir, id + "_2"));
                if (options.gray) {
                    pair.source = as_gray(pair.source, options.gray_mode);
                    pair.target = as_gray(pair.target, options.gray_mode);
                }
            }
            check_pair(pair);
            out.pairs.push_back(std::move(pair));
        } catch (const Error& e) {
            if (options.strict) throw;
            out.errors.emplace_back(e.what());
        }
    }
    return out;
}

} // namespace fundreg
