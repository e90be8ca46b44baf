#include "commands.hpp"

#include "fundreg/random.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

namespace fundreg::cli {

namespace {

using nlohmann::json;

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    return out;
}

std::string synth_id(int index, int n_pairs) {
    const int width = std::max<int>(3, static_cast<int>(std::to_string(std::max(n_pairs, 1)).size()));
    std::ostringstream s;
    s << 'X' << std::setw(width) << std::setfill('0') << index + 1;
    return s.str();
}

std::string mean_std(const ColumnStats& s, int precision) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(precision) << s.mean << " ± " << s.std;
    return o.str();
}

std::string grid_key(const ObsConfig& o) {
    return "C" + std::to_string(o.patch_size) + "_S" + format_number(o.spacing);
}

void write_report_files(const EvalReport& report, const fs::path& stem) {
    auto tsv = open_out(fs::path(stem.string() + ".tsv"));
    write_report_tsv(report, tsv);
    auto js = open_out(fs::path(stem.string() + ".json"));
    write_report_json(report, js);
}

// Alternating square blocks of two same-sized images.
GrayImage checkerboard(const GrayImage& a, const GrayImage& b, int block) {
    GrayImage out = a;
    for (Eigen::Index y = 0; y < out.rows(); ++y) {
        for (Eigen::Index x = 0; x < out.cols(); ++x) {
            if (((y / block) + (x / block)) % 2 == 1 && y < b.rows() && x < b.cols()) out(y, x) = b(y, x);
        }
    }
    return out;
}

// Marks each patch sample of every landmark with a bright dot.
GrayImage patch_grid(const GrayImage& img, const LandmarkSet& pts, const ObsConfig& obs) {
    GrayImage out = img;
    const Scalar half = (obs.patch_size - 1) / 2.0;
    for (Eigen::Index k = 0; k < pts.cols(); ++k) {
        for (int i = 0; i < obs.patch_size; ++i) {
            for (int j = 0; j < obs.patch_size; ++j) {
                const auto x = static_cast<Eigen::Index>(std::lround(pts(0, k) + obs.spacing * (j - half)));
                const auto y = static_cast<Eigen::Index>(std::lround(pts(1, k) + obs.spacing * (i - half)));
                if (x >= 0 && y >= 0 && x < out.cols() && y < out.rows()) out(y, x) = 1.0;
            }
        }
    }
    return out;
}

} // namespace

int exit_code_for(const Error& e) {
    switch (e.code()) {
    case ErrorCode::InvalidArgument:
        return kUsage;
    case ErrorCode::SingularTransform:
    case ErrorCode::DegeneratePointSet:
    case ErrorCode::DegenerateConfiguration:
        return kNumeric;
    default:
        return kData;
    }
}

fs::path default_output_dir() {
    const char* env = std::getenv(kOutputEnv);
    return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("fundreg_out");
}

LoadedDataset load_dataset(const DatasetOptions& opts) {
    DatasetLayout layout = DatasetLayout::under(opts.root);
    layout.column_order = opts.column_order;
    layout.coordinate_origin = opts.origin;
    LoadOptions lo;
    lo.strict = opts.strict;
    return load_fire(layout, lo);
}

std::vector<std::string> cmd_synth(const SynthOptions& opts, std::ostream& log) {
    if (opts.n_pairs < 0) throw Error(ErrorCode::InvalidArgument, "n_pairs must be >= 0");
    opts.synth.validate();
    const DatasetLayout layout = DatasetLayout::under(opts.out_dir);
    const fs::path transforms = opts.out_dir / "transforms";
    for (const auto& dir : {layout.images_dir, layout.ground_truth_dir, transforms}) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
    }
    std::vector<std::string> ids;
    for (int i = 0; i < opts.n_pairs; ++i) {
        SynthConfig cfg = opts.synth;
        cfg.seed = derive_seed(opts.synth.seed, static_cast<std::uint64_t>(i));
        const SyntheticPair sp = synth_pair(cfg);
        const std::string id = synth_id(i, opts.n_pairs);
        save_image(std::get<GrayImage>(sp.pair.source), layout.images_dir / (id + "_1.pgm"), PixelRange::Unit);
        save_image(std::get<GrayImage>(sp.pair.target), layout.images_dir / (id + "_2.pgm"), PixelRange::Unit);
        save_ground_truth(sp.pair.source_landmarks, sp.pair.target_landmarks,
                          layout.ground_truth_dir / ("control_points_" + id + "_1_2.txt"));
        save_transform(sp.truth, transforms / (id + ".txt"));
        ids.push_back(id);
    }
    const auto& s = opts.synth;
    const json manifest{
        {"format", "fundreg-synthetic"},
        {"n_pairs", opts.n_pairs},
        {"ids", ids},
        {"synth",
         {{"size", s.size},
          {"n_vessels", s.n_vessels},
          {"width", {s.width_lo, s.width_hi}},
          {"n_landmarks", s.n_landmarks},
          {"rot_deg", s.transform.rot_deg},
          {"scale", {s.transform.scale_lo, s.transform.scale_hi}},
          {"shear", s.transform.shear},
          {"trans", s.transform.trans},
          {"brightness", s.brightness},
          {"contrast", {s.contrast_lo, s.contrast_hi}},
          {"noise", s.noise},
          {"seed", s.seed}}},
    };
    auto out = open_out(opts.out_dir / "manifest.json");
    out << manifest.dump(2) << '\n';
    log << "wrote " << opts.n_pairs << " synthetic pairs to " << opts.out_dir.string() << '\n';
    return ids;
}

ImageStats cmd_preprocess(const PreprocessOptions& opts, std::ostream& log) {
    const AnyImage input = load_image(opts.input);
    const GrayImage out = preprocess(input, opts.params);
    save_image(out, opts.output, PixelRange::Signed);
    if (opts.debug) {
        const fs::path gray = opts.output.parent_path() / (opts.output.stem().string() + "_gray.pgm");
        save_image(standardize(as_gray(input, opts.params.gray_mode)), gray, PixelRange::Signed);
    }
    const ImageStats st{out.minCoeff(), out.maxCoeff(), out.mean()};
    log << "branch " << to_string(opts.params.branch) << "  size " << out.cols() << "x" << out.rows() << "  min "
        << format_number(st.min) << "  max " << format_number(st.max) << "  mean " << format_number(st.mean) << '\n';
    return st;
}

TrainResult cmd_train(const TrainOptions& opts, std::ostream& log) {
    const LoadedDataset data = load_dataset(opts.data);
    if (data.pairs.empty()) throw Error(ErrorCode::EmptyDataset, "no pairs under " + opts.data.root.string());
    const TrainResult result = train_on_pairs(data.pairs, opts.config);
    if (opts.checkpoint.has_parent_path()) fs::create_directories(opts.checkpoint.parent_path());
    save_checkpoint(Checkpoint{result.params, opts.config.obs, opts.config.preprocess.branch}, opts.checkpoint);

    const fs::path history = opts.checkpoint.parent_path() / (opts.checkpoint.stem().string() + "_history.tsv");
    auto h = open_out(history);
    h << "epoch\ttrain\tval\n";
    log << "epoch\ttrain\tval\n";
    for (const auto& e : result.history) {
        h << e.epoch << '\t' << format_number(e.train) << '\t' << format_number(e.val) << '\n';
        log << e.epoch << '\t' << format_number(e.train) << '\t' << format_number(e.val) << '\n';
    }
    log << "best epoch " << result.best_epoch << ", checkpoint " << opts.checkpoint.string() << '\n';
    return result;
}

void print_summary(const EvalReport& report, std::ostream& out) {
    const auto& o = report.config.obs;
    out << "C=" << o.patch_size << " S=" << format_number(o.spacing) << " branch "
        << to_string(report.config.preprocess.branch) << " (" << report.protocol << ")\n";
    out << std::left << std::setw(10) << "category" << std::setw(5) << "n" << std::setw(24) << "TRE initial [px]"
        << std::setw(24) << "TRE final [px]" << "recovery [%]\n";
    auto row = [&](const std::string& name, const CategoryStats& s) {
        out << std::left << std::setw(10) << name << std::setw(5) << s.count << std::setw(24)
            << mean_std(s.tre_initial, 2) << std::setw(24) << mean_std(s.tre_final, 2)
            << mean_std(s.recovery_pct, 1) << '\n';
    };
    for (const auto& [name, s] : report.per_category) {
        if (name != "All") row(name, s);
    }
    if (auto it = report.per_category.find("All"); it != report.per_category.end()) row(it->first, it->second);
}

std::vector<EvalReport> cmd_evaluate(const EvaluateOptions& opts, std::ostream& log) {
    const LoadedDataset data = load_dataset(opts.data);
    const auto& pairs = data.pairs;
    const bool sweep = !opts.c_values.empty() && !opts.s_values.empty();
    if (opts.c_values.empty() != opts.s_values.empty()) {
        throw Error(ErrorCode::InvalidArgument, "a sweep needs both C and S values");
    }

    std::vector<ObsConfig> grid;
    if (sweep) {
        for (int c : opts.c_values) {
            for (Scalar s : opts.s_values) {
                ObsConfig o = opts.config.obs;
                o.patch_size = c;
                o.spacing = s;
                grid.push_back(o);
            }
        }
    } else {
        grid.push_back(opts.config.obs);
    }

    std::vector<EvalReport> reports;
    if (opts.protocol == Protocol::LeaveOneOut) {
        if (pairs.size() < 2) {
            throw Error(ErrorCode::DatasetTooSmall,
                        "leave-one-out needs >= 2 pairs, got " + std::to_string(pairs.size()));
        }
        reports = run_folds(pairs, plan_leave_one_out(pairs.size(), opts.config.train, opts.config.seed),
                            opts.config, grid, "leave-one-out");
    } else {
        if (!(opts.test_fraction > 0 && opts.test_fraction < 1)) {
            throw Error(ErrorCode::InvalidArgument, "test fraction must lie in (0, 1)");
        }
        if (pairs.size() < 3) {
            throw Error(ErrorCode::DatasetTooSmall, "holdout needs >= 3 pairs, got " + std::to_string(pairs.size()));
        }
        std::vector<std::size_t> order(pairs.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(opts.config.seed, 1));
        rng.shuffle(order.begin(), order.end());
        const auto wanted = static_cast<std::size_t>(std::llround(opts.test_fraction * static_cast<double>(pairs.size())));
        const std::size_t n_test = std::clamp<std::size_t>(wanted, 1, pairs.size() - 2);
        std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
        std::sort(test.begin(), test.end());
        reports = run_folds(pairs, {plan_holdout(pairs.size(), test, opts.config.train, opts.config.seed)},
                            opts.config, grid, "holdout");
    }

    fs::create_directories(opts.out_dir);
    for (const auto& r : reports) {
        const fs::path stem = opts.out_dir / (sweep ? "report_" + grid_key(r.config.obs) : std::string("report"));
        write_report_files(r, stem);
        print_summary(r, log);
        log << '\n';
    }
    return reports;
}

Estimate cmd_register(const RegisterOptions& opts, std::ostream& log) {
    for (const auto& p : {opts.checkpoint, opts.source_image, opts.target_image, opts.source_points}) {
        if (!fs::exists(p)) throw Error(ErrorCode::MissingFile, p.string());
    }
    const Checkpoint ckpt = load_checkpoint(opts.checkpoint);
    ObsConfig requested = ckpt.obs;
    if (opts.patch_size) requested.patch_size = *opts.patch_size;
    if (opts.spacing) requested.spacing = *opts.spacing;
    check_compatible(ckpt, requested);
    PreprocessParams pp = opts.preprocess;
    pp.branch = ckpt.branch;

    const AnyImage source = load_image(opts.source_image);
    const AnyImage target = load_image(opts.target_image);
    const LandmarkSet src_pts = load_points(opts.source_points);
    const GrayImage pre_src = preprocess(source, pp);
    const GrayImage pre_tgt = preprocess(target, pp);
    const Estimate est = estimate_transform(ckpt.params, src_pts, pre_src, pre_tgt, ckpt.obs, opts.model);

    fs::create_directories(opts.out_dir);
    save_transform(est.transform, opts.out_dir / "transform.txt");
    save_points(est.transform(src_pts), opts.out_dir / "predicted_points.txt");
    save_points(est.predicted_points, opts.out_dir / "raw_points.txt");
    const GrayImage src_gray = standardize(as_gray(source, pp.gray_mode));
    const GrayImage warped = warp_image(src_gray, est.transform, -1.0);
    save_image(warped, opts.out_dir / "warped.pgm", PixelRange::Signed);

    if (opts.debug) {
        const GrayImage tgt_gray = standardize(as_gray(target, pp.gray_mode));
        save_image(checkerboard(warped, tgt_gray, 32), opts.out_dir / "checkerboard.pgm", PixelRange::Signed);
        save_image(pre_src, opts.out_dir / "preprocessed_source.pgm", PixelRange::Signed);
        save_image(pre_tgt, opts.out_dir / "preprocessed_target.pgm", PixelRange::Signed);
        save_image(patch_grid(pre_tgt, src_pts, ckpt.obs), opts.out_dir / "patch_grid.pgm", PixelRange::Signed);
    }

    const auto p = est.transform.params();
    log << "transform (a11 a12 tx a21 a22 ty):";
    for (Eigen::Index i = 0; i < p.size(); ++i) log << ' ' << format_number(p[i]);
    log << '\n';
    if (opts.target_points) {
        const LandmarkSet tgt_pts = load_points(*opts.target_points);
        const Scalar before = tre(Affine2D::identity(), src_pts, tgt_pts).mean;
        const Scalar after = tre(est.transform, src_pts, tgt_pts).mean;
        log << "TRE initial " << format_number(before) << " px, final " << format_number(after) << " px, recovery "
            << format_number(recovery_pct(before, after)) << " %\n";
    }
    return est;
}

} // namespace fundreg::cli
