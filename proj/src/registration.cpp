#include "fundreg/registration.hpp"

#include <Eigen/Eigenvalues>

namespace fundreg {

namespace {

void require_counts(const LandmarkSet& a, const LandmarkSet& b) {
    if (a.cols() != b.cols()) {
        throw Error(ErrorCode::CountMismatch,
                    std::to_string(a.cols()) + " vs " + std::to_string(b.cols()) + " landmarks");
    }
}

// Isotropic normalization p -> (p - centroid) / rms radius, as an affine map.
Affine2D normalizer(const LandmarkSet& pts) {
    const Vec2 c = pts.rowwise().mean();
    const Scalar rms = std::sqrt((pts.colwise() - c).colwise().squaredNorm().mean());
    const Scalar s = rms > 0 ? 1.0 / rms : 1.0;
    return Affine2D(s, 0, -s * c.x(), 0, s, -s * c.y());
}

Affine2D fit_affine(const LandmarkSet& src, const LandmarkSet& dst) {
    if (src.cols() < 3) {
        throw Error(ErrorCode::DegenerateConfiguration, "affine fit needs >= 3 points, got " + std::to_string(src.cols()));
    }
    const Affine2D ns = normalizer(src);
    const Affine2D nd = normalizer(dst);
    const LandmarkSet x = ns(src);
    const LandmarkSet y = nd(dst);
    Eigen::MatrixXd design(x.cols(), 3);
    design.leftCols<2>() = x.transpose();
    design.col(2).setOnes();
    const Eigen::Matrix3d normal = design.transpose() * design;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(normal, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues()(0) > 1e-10 * eig.eigenvalues()(2))) {
        throw Error(ErrorCode::DegenerateConfiguration, "source points are collinear or coincident");
    }
    const Eigen::Matrix<double, 3, 2> rhs = design.transpose() * y.transpose();
    const Eigen::Matrix<double, 3, 2> theta = normal.ldlt().solve(rhs);
    const Affine2D fitted(Affine2D::Matrix(theta.transpose()));
    return invert(nd) * fitted * ns;
}

Affine2D fit_similarity(const LandmarkSet& src, const LandmarkSet& dst) {
    if (src.cols() < 2) {
        throw Error(ErrorCode::DegenerateConfiguration,
                    "similarity fit needs >= 2 points, got " + std::to_string(src.cols()));
    }
    const Vec2 cs = src.rowwise().mean();
    const Vec2 cd = dst.rowwise().mean();
    const Eigen::Matrix2Xd p = src.colwise() - cs;
    const Eigen::Matrix2Xd q = dst.colwise() - cd;
    const Scalar spread = p.squaredNorm();
    if (!(spread > 1e-18)) throw Error(ErrorCode::DegenerateConfiguration, "source points coincide");
    // Linear part restricted to [[a, -b], [b, a]]: closed-form least squares.
    const Scalar a = (p.row(0).dot(q.row(0)) + p.row(1).dot(q.row(1))) / spread;
    const Scalar b = (p.row(0).dot(q.row(1)) - p.row(1).dot(q.row(0))) / spread;
    const Vec2 t = cd - Eigen::Matrix2d{{a, -b}, {b, a}} * cs;
    return Affine2D(a, -b, t.x(), b, a, t.y());
}

} // namespace

std::string_view to_string(TransformModel m) {
    switch (m) {
    case TransformModel::Translation: return "Translation";
    case TransformModel::Similarity: return "Similarity";
    case TransformModel::Affine: return "Affine";
    }
    return "Affine";
}

TransformModel transform_model_from_string(std::string_view s) {
    if (s == "Translation" || s == "translation") return TransformModel::Translation;
    if (s == "Similarity" || s == "similarity") return TransformModel::Similarity;
    if (s == "Affine" || s == "affine") return TransformModel::Affine;
    throw Error(ErrorCode::InvalidArgument, "unknown transform model '" + std::string(s) + "'");
}

Affine2D fit_transform(const LandmarkSet& src, const LandmarkSet& dst, TransformModel model) {
    require_counts(src, dst);
    if (src.cols() < 1) throw Error(ErrorCode::DegenerateConfiguration, "no correspondences");
    switch (model) {
    case TransformModel::Translation: {
        const Vec2 t = dst.rowwise().mean() - src.rowwise().mean();
        return Affine2D::translation(t.x(), t.y());
    }
    case TransformModel::Similarity:
        return fit_similarity(src, dst);
    case TransformModel::Affine:
        return fit_affine(src, dst);
    }
    return Affine2D::identity();
}

Scalar residual(const Affine2D& t, const LandmarkSet& src, const LandmarkSet& dst) {
    require_counts(src, dst);
    return (t(src) - dst).squaredNorm();
}

TreResult tre(const Affine2D& t, const LandmarkSet& src, const LandmarkSet& tgt) {
    require_counts(src, tgt);
    TreResult out;
    out.per_point = (t(src) - tgt).colwise().norm().transpose();
    out.mean = out.per_point.size() > 0 ? out.per_point.mean() : 0.0;
    return out;
}

Estimate estimate_transform(const ModelParams& params, const LandmarkSet& source_landmarks,
                            const GrayImage& preprocessed_source, const GrayImage& preprocessed_target,
                            const ObsConfig& obs, TransformModel model) {
    if (params.landmark_count() != source_landmarks.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "model predicts " + std::to_string(params.landmark_count()) +
                                                  " landmarks, got " + std::to_string(source_landmarks.cols()));
    }
    const Observation o = encode(source_landmarks, preprocessed_source, preprocessed_target, obs);
    const Prediction pred = forward(params, o);
    Estimate out;
    out.predicted_points = source_landmarks + pred.displacements;
    out.transform = fit_transform(source_landmarks, out.predicted_points, model);
    return out;
}

RegistrationResult register_landmarks(const ModelParams& params, const LandmarkSet& source_landmarks,
                                      const LandmarkSet& target_landmarks, const GrayImage& preprocessed_source,
                                      const GrayImage& preprocessed_target, const ObsConfig& obs,
                                      TransformModel model) {
    require_counts(source_landmarks, target_landmarks);
    const Estimate est =
        estimate_transform(params, source_landmarks, preprocessed_source, preprocessed_target, obs, model);
    RegistrationResult out;
    out.predicted_points = est.predicted_points;
    out.transform = est.transform;
    out.tre_initial = tre(Affine2D::identity(), source_landmarks, target_landmarks).mean;
    out.tre_final = tre(out.transform, source_landmarks, target_landmarks).mean;
    out.tre_raw = (out.predicted_points - target_landmarks).colwise().norm().mean();
    return out;
}

RegistrationResult register_pair(const ModelParams& params, const ImagePair& pair, const ObsConfig& obs,
                                 const PreprocessParams& preprocess_params, TransformModel model) {
    check_pair(pair);
    return register_landmarks(params, pair.source_landmarks, pair.target_landmarks,
                              preprocess(pair.source, preprocess_params), preprocess(pair.target, preprocess_params),
                              obs, model);
}

} // namespace fundreg
