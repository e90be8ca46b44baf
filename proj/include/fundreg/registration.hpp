#ifndef FUNDREG_REGISTRATION_HPP
#define FUNDREG_REGISTRATION_HPP

#include "fundreg/augment.hpp"
#include "fundreg/core.hpp"
#include "fundreg/imageops.hpp"
#include "fundreg/model.hpp"
#include "fundreg/observation.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace fundreg {

enum class TransformModel { Translation, Similarity, Affine };

std::string_view to_string(TransformModel m);
TransformModel transform_model_from_string(std::string_view s);

/// Least-squares fit of dst ~ T(src) within the model class.
Affine2D fit_transform(const LandmarkSet& src, const LandmarkSet& dst, TransformModel model = TransformModel::Affine);

/// Sum of squared residuals |T(src_i) - dst_i|^2.
Scalar residual(const Affine2D& t, const LandmarkSet& src, const LandmarkSet& dst);

struct TreResult {
    Scalar mean = 0;
    Eigen::VectorXd per_point;
};

/// Target registration error: distances |T(src_i) - tgt_i| and their mean.
TreResult tre(const Affine2D& t, const LandmarkSet& src, const LandmarkSet& tgt);

struct RegistrationResult {
    Affine2D transform;
    LandmarkSet predicted_points;   // source landmarks moved by the predicted displacements
    Scalar tre_initial = 0;         // identity transform against the target landmarks
    Scalar tre_final = 0;           // fitted transform against the target landmarks
    Scalar tre_raw = 0;             // predicted points against the target landmarks
};

struct Estimate {
    Affine2D transform;
    LandmarkSet predicted_points;   // source landmarks moved by the predicted displacements
};

/// Predicts displacements for the source landmarks and fits the transform; needs no ground truth.
Estimate estimate_transform(const ModelParams& params, const LandmarkSet& source_landmarks,
                            const GrayImage& preprocessed_source, const GrayImage& preprocessed_target,
                            const ObsConfig& obs, TransformModel model = TransformModel::Affine);

/// Registers from already-preprocessed images.
RegistrationResult register_landmarks(const ModelParams& params, const LandmarkSet& source_landmarks,
                                      const LandmarkSet& target_landmarks, const GrayImage& preprocessed_source,
                                      const GrayImage& preprocessed_target, const ObsConfig& obs,
                                      TransformModel model = TransformModel::Affine);

RegistrationResult register_pair(const ModelParams& params, const ImagePair& pair, const ObsConfig& obs,
                                 const PreprocessParams& preprocess, TransformModel model = TransformModel::Affine);

/// Everything that shapes an evaluation run; embedded in every report.
struct EvalConfig {
    ObsConfig obs;
    PreprocessParams preprocess;
    AugmentConfig augment;
    TrainConfig train;
    TransformModel model = TransformModel::Affine;
    std::uint64_t seed = 0;
};

struct ReportRow {
    std::string id;
    Category category = Category::Synthetic;
    int patch_size = 0;
    Scalar spacing = 0;
    Branch branch = Branch::None;
    Scalar tre_initial = 0;
    Scalar tre_final = 0;
    Scalar tre_raw = 0;
    Scalar recovery_pct = 0;
};

struct ColumnStats {
    Scalar mean = 0;
    Scalar std = 0;   // sample standard deviation, 0 for a single row
};

struct CategoryStats {
    std::size_t count = 0;
    ColumnStats tre_initial;
    ColumnStats tre_final;
    ColumnStats tre_raw;
    ColumnStats recovery_pct;
};

struct EvalReport {
    std::vector<ReportRow> rows;
    std::map<std::string, CategoryStats> per_category;   // keyed by category name, plus "All"
    EvalConfig config;
    std::string protocol;   // "leave-one-out" or "holdout"
};

/// 100 * (1 - final / initial); 0 when the pair was already aligned.
Scalar recovery_pct(Scalar tre_initial, Scalar tre_final);

ColumnStats column_stats(const std::vector<Scalar>& values);

/// Recomputes per_category from rows.
void summarize(EvalReport& report);

struct Fold {
    std::vector<std::size_t> test;
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

/// One fold per pair; the rest split 0.9/0.1 (by train.val_fraction) into train/val.
std::vector<Fold> plan_leave_one_out(std::size_t n_pairs, const TrainConfig& train, std::uint64_t seed);

/// Single fold with the given test pairs; the rest split into train/val.
Fold plan_holdout(std::size_t n_pairs, const std::vector<std::size_t>& test, const TrainConfig& train,
                  std::uint64_t seed);

/// Throws LeakageDetected when any test pair id appears in the fold's train or val pairs.
void assert_disjoint(const std::vector<ImagePair>& dataset, const Fold& fold);

/// Trains one model per fold on augmented train/val pairs and registers each test pair.
EvalReport run_folds(const std::vector<ImagePair>& dataset, const std::vector<Fold>& folds, const EvalConfig& cfg,
                     const std::string& protocol);

/// Runs the same folds once per observation config, sharing augmentation and preprocessing.
std::vector<EvalReport> run_folds(const std::vector<ImagePair>& dataset, const std::vector<Fold>& folds,
                                  const EvalConfig& cfg, const std::vector<ObsConfig>& obs_grid,
                                  const std::string& protocol);

/// Encoded samples for one pair: the pair itself, then cfg.augment.copies augmented copies
/// seeded from derive_seed(cfg.seed, index).
std::vector<Sample> pair_samples(const ImagePair& pair, std::size_t index, const EvalConfig& cfg);

/// Trains one model on all pairs, split into train/val pairs by cfg.train.val_fraction.
TrainResult train_on_pairs(const std::vector<ImagePair>& dataset, const EvalConfig& cfg);

/// Displacement scale used for a dataset whose images are `width` pixels wide.
Scalar output_scale_for(Eigen::Index width);

EvalReport leave_one_out(const std::vector<ImagePair>& dataset, const EvalConfig& cfg);

/// One leave-one-out report per (C, S), C-major order.
std::vector<EvalReport> sweep_hyperparams(const std::vector<ImagePair>& dataset, const std::vector<int>& c_values,
                                          const std::vector<Scalar>& s_values, const EvalConfig& cfg);

/// Tab-separated, one row per pair. Columns: id category C S branch tre_initial tre_final tre_raw recovery_pct.
/// Leading '#' lines carry the configuration.
void write_report_tsv(const EvalReport& report, std::ostream& out);

/// JSON document with config, per_pair rows and per_category statistics.
void write_report_json(const EvalReport& report, std::ostream& out);

/// JSON text of the configuration snapshot.
std::string config_json(const EvalConfig& cfg);

} // namespace fundreg

#endif // FUNDREG_REGISTRATION_HPP
