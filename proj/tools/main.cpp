#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

using namespace fundreg;
using namespace fundreg::cli;

namespace {

// Branch and transform-model names go through the library parsers after CLI parsing.
struct Names {
    std::string branch;
    std::string model;
};

void apply(const Names& n, PreprocessParams& p, TransformModel* model) {
    if (!n.branch.empty()) p.branch = branch_from_string(n.branch);
    if (model != nullptr && !n.model.empty()) *model = transform_model_from_string(n.model);
}

const std::map<std::string, ColumnOrder> kOrders{{"source-first", ColumnOrder::SourceFirst},
                                                 {"target-first", ColumnOrder::TargetFirst}};
const std::map<std::string, CoordinateOrigin> kOrigins{{"0", CoordinateOrigin::ZeroBased},
                                                       {"1", CoordinateOrigin::OneBased}};
const std::map<std::string, Protocol> kProtocols{{"loo", Protocol::LeaveOneOut}, {"holdout", Protocol::Holdout}};

void add_dataset(CLI::App* app, DatasetOptions& d) {
    app->add_option("dataset", d.root, "Dataset root holding 'Images' and 'Ground Truth'")->required();
    app->add_option("--columns", d.column_order, "Ground-truth column order")
        ->transform(CLI::CheckedTransformer(kOrders, CLI::ignore_case));
    app->add_option("--origin", d.origin, "Ground-truth coordinate origin (0 or 1)")
        ->transform(CLI::CheckedTransformer(kOrigins));
    app->add_flag("!--lenient", d.strict, "Skip unreadable pairs instead of failing");
}

void add_preprocess(CLI::App* app, PreprocessParams& p, Names* names) {
    if (names != nullptr) {
        app->add_option("--branch", names->branch, "Preprocessing branch: none, histeq-log, guided-frangi");
    }
    app->add_option("--log-sigma", p.log_sigma, "LoG sigma in pixels");
    app->add_option("--guided-radius", p.guided.radius, "Guided filter radius (quarter resolution)");
    app->add_option("--guided-eps", p.guided.eps, "Guided filter regularization");
    app->add_option("--frangi-scales", p.frangi.scales, "Frangi sigmas (quarter resolution)");
    app->add_option("--frangi-beta", p.frangi.beta, "Frangi blobness sensitivity");
}

void add_observation(CLI::App* app, ObsConfig& o) {
    app->add_option("-C,--patch-size", o.patch_size, "Samples per patch side");
    app->add_option("-S,--spacing", o.spacing, "Pixels between patch samples");
}

void add_training(CLI::App* app, EvalConfig& c, Names& names) {
    add_observation(app, c.obs);
    add_preprocess(app, c.preprocess, &names);
    auto& a = c.augment;
    app->add_option("--copies", a.copies, "Augmented copies per pair");
    app->add_option("--brightness", a.brightness, "Brightness jitter (+-)");
    app->add_option("--contrast-lo", a.contrast_lo, "Lowest contrast factor");
    app->add_option("--contrast-hi", a.contrast_hi, "Highest contrast factor");
    app->add_option("--aug-rot", a.affine.rot_deg, "Augmentation rotation range (+- degrees)");
    app->add_option("--aug-scale-lo", a.affine.scale_lo, "Augmentation lowest scale");
    app->add_option("--aug-scale-hi", a.affine.scale_hi, "Augmentation highest scale");
    app->add_option("--aug-shear", a.affine.shear, "Augmentation shear range (+-)");
    app->add_option("--aug-trans", a.affine.trans, "Augmentation translation range (+- pixels)");
    auto& t = c.train;
    app->add_option("--lr", t.lr, "Adam learning rate");
    app->add_option("--epochs", t.epochs, "Maximum epochs");
    app->add_option("--patience", t.patience, "Early-stopping patience in epochs");
    app->add_option("--batch-size", t.batch_size, "Mini-batch size");
    app->add_option("--hidden", t.hidden, "Hidden layer widths");
    app->add_option("--w-translation", t.w_translation, "Translation loss weight");
    app->add_option("--w-displacement", t.w_displacement, "Displacement loss weight");
    app->add_option("--val-fraction", t.val_fraction, "Validation share of the training pairs");
    app->add_option("--transform-model", names.model, "Fitted transform: translation, similarity, affine");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Imitation-learning registration of fundus image pairs"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;
    fs::path out = default_output_dir();
    app.add_option("--seed", seed, "Base seed for every random draw");
    app.add_option("-o,--out", out, std::string("Output directory (default $") + kOutputEnv + " or ./fundreg_out)");

    SynthOptions synth;
    auto* c_synth = app.add_subcommand("synth", "Write synthetic pairs in the FIRE layout");
    c_synth->add_option("-n,--pairs", synth.n_pairs, "Number of pairs");
    c_synth->add_option("--size", synth.synth.size, "Image side in pixels");
    c_synth->add_option("--vessels", synth.synth.n_vessels, "Vessel trees per image");
    c_synth->add_option("--landmarks", synth.synth.n_landmarks, "Landmarks per pair");
    c_synth->add_option("--rot", synth.synth.transform.rot_deg, "Rotation range (+- degrees)");
    c_synth->add_option("--trans", synth.synth.transform.trans, "Translation range (+- pixels)");
    c_synth->add_option("--scale-lo", synth.synth.transform.scale_lo, "Lowest scale");
    c_synth->add_option("--scale-hi", synth.synth.transform.scale_hi, "Highest scale");
    c_synth->add_option("--shear", synth.synth.transform.shear, "Shear range (+-)");

    PreprocessOptions pre;
    auto* c_pre = app.add_subcommand("preprocess", "Apply a preprocessing branch to one image");
    c_pre->add_option("input", pre.input, "Input PGM/PPM")->required()->check(CLI::ExistingFile);
    c_pre->add_option("output", pre.output, "Output PGM (default <out>/<input stem>_<branch>.pgm)");
    Names pre_names;
    add_preprocess(c_pre, pre.params, &pre_names);
    c_pre->add_flag("--debug", pre.debug, "Also write the standardized gray input");

    TrainOptions train;
    auto* c_train = app.add_subcommand("train", "Train one model on every pair of a dataset");
    add_dataset(c_train, train.data);
    Names train_names;
    add_training(c_train, train.config, train_names);
    c_train->add_option("--checkpoint", train.checkpoint, "Checkpoint path (default <out>/model.json)");

    EvaluateOptions eval;
    auto* c_eval = app.add_subcommand("evaluate", "Leave-one-out (or holdout) evaluation and C/S sweeps");
    add_dataset(c_eval, eval.data);
    Names eval_names;
    add_training(c_eval, eval.config, eval_names);
    c_eval->add_option("--sweep-C", eval.c_values, "Patch sizes to sweep");
    c_eval->add_option("--sweep-S", eval.s_values, "Spacings to sweep");
    c_eval->add_option("--protocol", eval.protocol, "loo or holdout")
        ->transform(CLI::CheckedTransformer(kProtocols, CLI::ignore_case));
    c_eval->add_option("--test-fraction", eval.test_fraction, "Holdout test share");

    RegisterOptions reg;
    std::string target_points;
    auto* c_reg = app.add_subcommand("register", "Register a source image onto a target with a trained model");
    c_reg->add_option("checkpoint", reg.checkpoint, "Model checkpoint")->required();
    c_reg->add_option("source", reg.source_image, "Source image")->required();
    c_reg->add_option("target", reg.target_image, "Target image")->required();
    c_reg->add_option("points", reg.source_points, "Source landmarks, one 'x y' per line")->required();
    c_reg->add_option("--target-points", target_points, "Target landmarks for TRE output");
    Names reg_names;
    c_reg->add_option("--transform-model", reg_names.model, "Fitted transform: translation, similarity, affine");
    add_preprocess(c_reg, reg.preprocess, nullptr);
    c_reg->add_option("-C,--patch-size", reg.patch_size, "Expected patch size; refused if the checkpoint differs");
    c_reg->add_option("-S,--spacing", reg.spacing, "Expected spacing; refused if the checkpoint differs");
    c_reg->add_flag("--debug", reg.debug, "Write checkerboard, preprocessed maps and patch grid");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*c_synth) {
            synth.synth.seed = seed;
            synth.out_dir = out;
            cmd_synth(synth, std::cout);
        } else if (*c_pre) {
            apply(pre_names, pre.params, nullptr);
            if (pre.output.empty()) {
                std::string branch(to_string(pre.params.branch));
                pre.output = out / (pre.input.stem().string() + "_" + branch + ".pgm");
            }
            cmd_preprocess(pre, std::cout);
        } else if (*c_train) {
            apply(train_names, train.config.preprocess, &train.config.model);
            train.config.seed = seed;
            train.config.train.seed = seed;
            train.config.augment.seed = seed;
            if (train.checkpoint.empty()) train.checkpoint = out / "model.json";
            cmd_train(train, std::cout);
        } else if (*c_eval) {
            apply(eval_names, eval.config.preprocess, &eval.config.model);
            eval.config.seed = seed;
            eval.config.train.seed = seed;
            eval.config.augment.seed = seed;
            eval.out_dir = out;
            cmd_evaluate(eval, std::cout);
        } else if (*c_reg) {
            apply(reg_names, reg.preprocess, &reg.model);
            if (!target_points.empty()) reg.target_points = fs::path(target_points);
            reg.out_dir = out;
            cmd_register(reg, std::cout);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}
