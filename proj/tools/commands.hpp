#ifndef FUNDREG_TOOLS_COMMANDS_HPP
#define FUNDREG_TOOLS_COMMANDS_HPP

#include "fundreg/augment.hpp"
#include "fundreg/io.hpp"
#include "fundreg/model.hpp"
#include "fundreg/registration.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fundreg::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,      // bad flags or argument values
    kData = 3,       // missing, malformed or inconsistent input data
    kNumeric = 4,    // degenerate geometry or singular transforms
};

int exit_code_for(const Error& e);

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputEnv = "FUNDREG_OUT";

/// $FUNDREG_OUT when set, otherwise ./fundreg_out.
fs::path default_output_dir();

struct DatasetOptions {
    fs::path root;
    ColumnOrder column_order = ColumnOrder::SourceFirst;
    CoordinateOrigin origin = CoordinateOrigin::ZeroBased;
    bool strict = true;
};

LoadedDataset load_dataset(const DatasetOptions& opts);

struct SynthOptions {
    int n_pairs = 20;
    SynthConfig synth;       // synth.seed is the base seed; pair i uses derive_seed(seed, i)
    fs::path out_dir;
};

/// Writes pairs in the FIRE layout plus transforms/<id>.txt and manifest.json.
std::vector<std::string> cmd_synth(const SynthOptions& opts, std::ostream& log);

struct ImageStats {
    Scalar min = 0;
    Scalar max = 0;
    Scalar mean = 0;
};

struct PreprocessOptions {
    fs::path input;
    PreprocessParams params;
    fs::path output;
    bool debug = false;      // also writes <output>_gray.pgm, the standardized input
};

ImageStats cmd_preprocess(const PreprocessOptions& opts, std::ostream& log);

struct TrainOptions {
    DatasetOptions data;
    EvalConfig config;
    fs::path checkpoint;     // loss history goes next to it as <stem>_history.tsv
};

TrainResult cmd_train(const TrainOptions& opts, std::ostream& log);

enum class Protocol { LeaveOneOut, Holdout };

struct EvaluateOptions {
    DatasetOptions data;
    EvalConfig config;
    std::vector<int> c_values;       // both non-empty: sweep over the grid
    std::vector<Scalar> s_values;
    Protocol protocol = Protocol::LeaveOneOut;
    Scalar test_fraction = 0.2;      // holdout only
    fs::path out_dir;
};

/// report.{tsv,json}, or report_C<C>_S<S>.{tsv,json} per grid point when sweeping.
std::vector<EvalReport> cmd_evaluate(const EvaluateOptions& opts, std::ostream& log);

/// Per-category TRE and recovery as mean ± std.
void print_summary(const EvalReport& report, std::ostream& out);

struct RegisterOptions {
    fs::path checkpoint;
    fs::path source_image;
    fs::path target_image;
    fs::path source_points;
    std::optional<fs::path> target_points;   // enables TRE output
    std::optional<int> patch_size;           // each must match the checkpoint when given
    std::optional<Scalar> spacing;
    PreprocessParams preprocess;             // branch is taken from the checkpoint
    TransformModel model = TransformModel::Affine;
    fs::path out_dir;
    bool debug = false;
};

/// Writes transform.txt, predicted_points.txt (transform applied to the source points),
/// raw_points.txt (source points plus predicted displacements) and warped.pgm.
Estimate cmd_register(const RegisterOptions& opts, std::ostream& log);

} // namespace fundreg::cli

#endif // FUNDREG_TOOLS_COMMANDS_HPP
