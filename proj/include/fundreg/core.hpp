#ifndef FUNDREG_CORE_HPP
#define FUNDREG_CORE_HPP

#include <Eigen/Core>
#include <Eigen/LU>

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace fundreg {

using Scalar = double;

// Images are row-major dense matrices: rows() is the height, cols() the width.
// Pixel (row y, col x) sits at continuous coordinate (x, y).
template <typename T>
using Image = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using GrayImage = Image<Scalar>;

using Vec2 = Eigen::Vector2d;

// One landmark per column, x in row 0, y in row 1. Column order defines correspondence.
using LandmarkSet = Eigen::Matrix2Xd;

// Per-landmark (dx, dy), one column per landmark.
using Displacements = Eigen::Matrix2Xd;

/// Planar color image with channels in [0, 1].
struct RgbImage {
    GrayImage red;
    GrayImage green;
    GrayImage blue;

    RgbImage() = default;
    RgbImage(Eigen::Index height, Eigen::Index width)
        : red(GrayImage::Zero(height, width)),
          green(GrayImage::Zero(height, width)),
          blue(GrayImage::Zero(height, width)) {}

    [[nodiscard]] Eigen::Index width() const { return red.cols(); }
    [[nodiscard]] Eigen::Index height() const { return red.rows(); }
};

using AnyImage = std::variant<GrayImage, RgbImage>;

enum class ErrorCode {
    SingularTransform,
    DimensionMismatch,
    ImageTooSmall,
    DegeneratePointSet,
    CountMismatch,
    ShapeMismatch,
    EmptyDataset,
    InconsistentShapes,
    DegenerateConfiguration,
    DatasetTooSmall,
    LeakageDetected,
    MissingFile,
    MalformedGroundTruth,
    UnknownCategory,
    UnsupportedFormat,
    CorruptFile,
    IoFailure,
    ConfigMismatch,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_number(double v);

/// Exception type thrown by every fundreg operation.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// 2D affine map x' = A x + t, stored as a 2x3 matrix [A | t].
template <typename T>
class Affine2 {
public:
    using Matrix = Eigen::Matrix<T, 2, 3>;
    using Point = Eigen::Matrix<T, 2, 1>;

    Affine2() : m_(Matrix::Zero()) { m_(0, 0) = T(1); m_(1, 1) = T(1); }
    explicit Affine2(const Matrix& m) : m_(m) {}
    Affine2(T a11, T a12, T tx, T a21, T a22, T ty) {
        m_ << a11, a12, tx, a21, a22, ty;
    }

    static Affine2 identity() { return Affine2(); }
    static Affine2 translation(T tx, T ty) { return Affine2(T(1), T(0), tx, T(0), T(1), ty); }
    static Affine2 rotation(T radians) {
        using std::cos;
        using std::sin;
        const T c = cos(radians);
        const T s = sin(radians);
        return Affine2(c, -s, T(0), s, c, T(0));
    }
    static Affine2 scaling(T s) { return Affine2(s, T(0), T(0), T(0), s, T(0)); }
    static Affine2 shearing(T h) { return Affine2(T(1), h, T(0), T(0), T(1), T(0)); }

    [[nodiscard]] const Matrix& matrix() const { return m_; }
    [[nodiscard]] Matrix& matrix() { return m_; }
    [[nodiscard]] auto linear() const { return m_.template leftCols<2>(); }
    [[nodiscard]] auto offset() const { return m_.col(2); }
    [[nodiscard]] T determinant() const { return m_(0, 0) * m_(1, 1) - m_(0, 1) * m_(1, 0); }

    /// Entries in the documented order a11, a12, tx, a21, a22, ty.
    [[nodiscard]] Eigen::Matrix<T, 6, 1> params() const {
        Eigen::Matrix<T, 6, 1> p;
        p << m_(0, 0), m_(0, 1), m_(0, 2), m_(1, 0), m_(1, 1), m_(1, 2);
        return p;
    }

    [[nodiscard]] Point operator()(const Point& p) const { return linear() * p + offset(); }

    [[nodiscard]] Eigen::Matrix<T, 2, Eigen::Dynamic> operator()(
        const Eigen::Matrix<T, 2, Eigen::Dynamic>& pts) const {
        return (linear() * pts).colwise() + offset();
    }

    [[nodiscard]] bool allFinite() const { return m_.allFinite(); }

private:
    Matrix m_;
};

using Affine2D = Affine2<Scalar>;

template <typename T>
Affine2<T> compose(const Affine2<T>& a, const Affine2<T>& b) {
    typename Affine2<T>::Matrix m;
    m.template leftCols<2>() = a.linear() * b.linear();
    m.col(2) = a.linear() * b.offset() + a.offset();
    return Affine2<T>(m);
}

template <typename T>
Affine2<T> operator*(const Affine2<T>& a, const Affine2<T>& b) {
    return compose(a, b);
}

template <typename T>
Affine2<T> invert(const Affine2<T>& t) {
    using std::abs;
    const T det = t.determinant();
    if (!(abs(det) > T(1e-12))) {
        throw Error(ErrorCode::SingularTransform, "determinant " + std::to_string(double(det)));
    }
    typename Affine2<T>::Matrix m;
    const Eigen::Matrix<T, 2, 2> inv = t.linear().inverse();
    m.template leftCols<2>() = inv;
    m.col(2) = -inv * t.offset();
    return Affine2<T>(m);
}

/// Affine map that applies `t` about `center` instead of the origin.
template <typename T>
Affine2<T> about(const Affine2<T>& t, const Eigen::Matrix<T, 2, 1>& center) {
    return Affine2<T>::translation(center.x(), center.y()) * t *
           Affine2<T>::translation(-center.x(), -center.y());
}

enum class Category { A, P, S, Synthetic };

std::string_view to_string(Category c);
Category category_from_string(std::string_view s);

struct ImagePair {
    AnyImage source;
    AnyImage target;
    LandmarkSet source_landmarks;
    LandmarkSet target_landmarks;
    Category category = Category::Synthetic;
    std::string id;
};

/// Throws CountMismatch unless both landmark sets have the same count.
void check_pair(const ImagePair& pair);

} // namespace fundreg

#endif // FUNDREG_CORE_HPP
