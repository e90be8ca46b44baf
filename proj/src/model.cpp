#include "fundreg/model.hpp"

#include "fundreg/random.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace fundreg {

namespace {

Eigen::MatrixXd glorot(Rng& rng, Eigen::Index out, Eigen::Index in) {
    const Scalar bound = std::sqrt(6.0 / static_cast<Scalar>(in + out));
    Eigen::MatrixXd w(out, in);
    // Column-major fill order fixes the draw sequence.
    for (Eigen::Index j = 0; j < in; ++j) {
        for (Eigen::Index i = 0; i < out; ++i) w(i, j) = rng.uniform(-bound, bound);
    }
    return w;
}

template <typename Visit>
void for_each_block(ModelParams& p, Visit&& visit) {
    for (std::size_t l = 0; l < p.trunk_weights.size(); ++l) {
        visit(p.trunk_weights[l].reshaped());
        visit(p.trunk_biases[l].reshaped());
    }
    visit(p.translation_weights.reshaped());
    visit(p.translation_bias.reshaped());
    visit(p.displacement_weights.reshaped());
    visit(p.displacement_bias.reshaped());
}

template <typename Visit>
void for_each_block(const ModelParams& p, Visit&& visit) {
    for_each_block(const_cast<ModelParams&>(p), [&](auto block) { visit(std::as_const(block)); });
}

// Stacks demos as 2K x N columns divided by `scale`.
Eigen::MatrixXd stack_targets(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx,
                              Scalar scale) {
    const Eigen::Index rows = samples.at(idx.front()).demo.size();
    Eigen::MatrixXd y(rows, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
        y.col(static_cast<Eigen::Index>(j)) = samples[idx[j]].demo.reshaped() / scale;
    }
    return y;
}

Eigen::MatrixXd stack_inputs(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd x(samples.at(idx.front()).input.size(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = samples[idx[j]].input;
    return x;
}

void check_shapes(const std::vector<Sample>& samples, Eigen::Index in, Eigen::Index k) {
    for (const auto& s : samples) {
        if (s.input.size() != in || s.demo.cols() != k) {
            throw Error(ErrorCode::InconsistentShapes,
                        "sample '" + s.pair_id + "' has input " + std::to_string(s.input.size()) + " and " +
                            std::to_string(s.demo.cols()) + " landmarks, expected " + std::to_string(in) +
                            " and " + std::to_string(k));
        }
    }
}

} // namespace

Eigen::Index ModelParams::input_size() const {
    return trunk_weights.empty() ? translation_weights.cols() : trunk_weights.front().cols();
}

std::vector<Eigen::Index> ModelParams::layer_sizes() const {
    std::vector<Eigen::Index> sizes{input_size()};
    for (const auto& w : trunk_weights) sizes.push_back(w.rows());
    sizes.push_back(translation_weights.rows());
    sizes.push_back(displacement_weights.rows());
    return sizes;
}

Eigen::Index ModelParams::parameter_count() const {
    Eigen::Index n = 0;
    for_each_block(*this, [&](const auto& b) { n += b.size(); });
    return n;
}

Eigen::VectorXd ModelParams::flatten() const {
    Eigen::VectorXd flat(parameter_count());
    Eigen::Index at = 0;
    for_each_block(*this, [&](const auto& b) {
        flat.segment(at, b.size()) = b;
        at += b.size();
    });
    return flat;
}

void ModelParams::assign(const Eigen::VectorXd& flat) {
    if (flat.size() != parameter_count()) {
        throw Error(ErrorCode::ShapeMismatch, "parameter vector has " + std::to_string(flat.size()) +
                                                  " entries, model has " + std::to_string(parameter_count()));
    }
    Eigen::Index at = 0;
    for_each_block(*this, [&](auto b) {
        b = flat.segment(at, b.size());
        at += b.size();
    });
}

ModelParams ModelParams::zeros_like() const {
    ModelParams z = *this;
    for_each_block(z, [](auto b) { b.setZero(); });
    return z;
}

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw Error(ErrorCode::InvalidArgument, what);
    };
    require(lr >= 0, "train: lr must be >= 0");
    require(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1, "train: Adam betas in [0, 1)");
    require(adam_eps > 0, "train: adam_eps must be > 0");
    require(epochs >= 0 && patience >= 1 && batch_size >= 1, "train: epochs >= 0, patience >= 1, batch_size >= 1");
    require(w_translation >= 0 && w_displacement >= 0 && w_translation + w_displacement > 0,
            "train: loss weights must be >= 0 and not both zero");
    require(val_fraction > 0 && val_fraction < 1, "train: val_fraction must be in (0, 1)");
    for (int h : hidden) require(h >= 1, "train: hidden widths must be >= 1");
}

ModelParams init_model(Eigen::Index input_size, Eigen::Index landmarks, const std::vector<int>& hidden,
                       std::uint64_t seed, Scalar output_scale) {
    if (input_size < 1 || landmarks < 1) {
        throw Error(ErrorCode::InvalidArgument, "init_model: input size and landmark count must be >= 1");
    }
    Rng rng(seed);
    ModelParams p;
    p.output_scale = output_scale;
    Eigen::Index fan_in = input_size;
    for (int width : hidden) {
        p.trunk_weights.push_back(glorot(rng, width, fan_in));
        p.trunk_biases.push_back(Eigen::VectorXd::Zero(width));
        fan_in = width;
    }
    p.translation_weights = glorot(rng, 2, fan_in);
    p.translation_bias = Eigen::VectorXd::Zero(2);
    p.displacement_weights = glorot(rng, 2 * landmarks, fan_in);
    p.displacement_bias = Eigen::VectorXd::Zero(2 * landmarks);
    return p;
}

Prediction forward(const ModelParams& p, const Eigen::VectorXd& input) {
    if (input.size() != p.input_size()) {
        throw Error(ErrorCode::ShapeMismatch, "observation length " + std::to_string(input.size()) +
                                                  ", model expects " + std::to_string(p.input_size()));
    }
    Eigen::VectorXd h = input;
    for (std::size_t l = 0; l < p.trunk_weights.size(); ++l) {
        h = (p.trunk_weights[l] * h + p.trunk_biases[l]).cwiseMax(0.0);
    }
    Prediction out;
    out.translation = p.output_scale * (p.translation_weights * h + p.translation_bias);
    const Eigen::VectorXd d = p.output_scale * (p.displacement_weights * h + p.displacement_bias);
    out.displacements = d.reshaped(2, p.landmark_count());
    return out;
}

Prediction forward(const ModelParams& p, const Observation& obs) { return forward(p, obs.flatten()); }

Scalar loss(const Prediction& pred, const Displacements& demo, const TrainConfig& cfg) {
    if (pred.displacements.cols() != demo.cols()) {
        throw Error(ErrorCode::CountMismatch, std::to_string(pred.displacements.cols()) +
                                                  " predicted vs " + std::to_string(demo.cols()) + " demonstrated");
    }
    const Vec2 mean = demo.rowwise().mean();
    const Scalar k = static_cast<Scalar>(demo.cols());
    return cfg.w_translation * (pred.translation - mean).squaredNorm() +
           cfg.w_displacement / k * (pred.displacements - demo).squaredNorm();
}

Scalar batch_loss(const ModelParams& p, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                  const TrainConfig& cfg, Gradients* grad) {
    const Eigen::Index n = inputs.cols();
    const Eigen::Index k = p.landmark_count();
    if (inputs.rows() != p.input_size() || targets.rows() != 2 * k || targets.cols() != n) {
        throw Error(ErrorCode::ShapeMismatch, "batch does not match model shape");
    }
    const std::size_t depth = p.trunk_weights.size();
    std::vector<Eigen::MatrixXd> acts;  // acts[0] = inputs, acts[l+1] = relu output of layer l
    acts.reserve(depth + 1);
    acts.push_back(inputs);
    for (std::size_t l = 0; l < depth; ++l) {
        Eigen::MatrixXd z = p.trunk_weights[l] * acts.back();
        z.colwise() += p.trunk_biases[l];
        acts.push_back(z.cwiseMax(0.0));
    }
    const Eigen::MatrixXd& top = acts.back();
    Eigen::MatrixXd t = p.translation_weights * top;
    t.colwise() += p.translation_bias;
    Eigen::MatrixXd d = p.displacement_weights * top;
    d.colwise() += p.displacement_bias;

    // Translation target: mean displacement over landmarks.
    Eigen::MatrixXd t_target(2, n);
    for (Eigen::Index j = 0; j < n; ++j) t_target.col(j) = targets.col(j).reshaped(2, k).rowwise().mean();

    const Eigen::MatrixXd t_err = t - t_target;
    const Eigen::MatrixXd d_err = d - targets;
    const Scalar inv_n = 1.0 / static_cast<Scalar>(n);
    const Scalar inv_k = 1.0 / static_cast<Scalar>(k);
    const Scalar value =
        inv_n * (cfg.w_translation * t_err.squaredNorm() + cfg.w_displacement * inv_k * d_err.squaredNorm());
    if (grad == nullptr) return value;

    *grad = p.zeros_like();
    const Eigen::MatrixXd dt = (2.0 * cfg.w_translation * inv_n) * t_err;
    const Eigen::MatrixXd dd = (2.0 * cfg.w_displacement * inv_n * inv_k) * d_err;
    grad->translation_weights = dt * top.transpose();
    grad->translation_bias = dt.rowwise().sum();
    grad->displacement_weights = dd * top.transpose();
    grad->displacement_bias = dd.rowwise().sum();
    Eigen::MatrixXd delta = p.translation_weights.transpose() * dt + p.displacement_weights.transpose() * dd;
    for (std::size_t l = depth; l-- > 0;) {
        // ReLU gate: the activation is positive exactly where the pre-activation was.
        delta = delta.cwiseProduct((acts[l + 1].array() > 0.0).cast<Scalar>().matrix());
        grad->trunk_weights[l] = delta * acts[l].transpose();
        grad->trunk_biases[l] = delta.rowwise().sum();
        if (l > 0) delta = p.trunk_weights[l].transpose() * delta;
    }
    return value;
}

Gradients backward(const ModelParams& p, const Eigen::VectorXd& input, const Displacements& demo,
                   const TrainConfig& cfg) {
    if (input.size() != p.input_size() || demo.cols() != p.landmark_count()) {
        throw Error(ErrorCode::ShapeMismatch, "backward: observation or demonstrator does not match the model");
    }
    Gradients g;
    const Eigen::MatrixXd targets = demo.reshaped() / p.output_scale;
    batch_loss(p, input, targets, cfg, &g);
    // loss in pixels = output_scale^2 * loss in output units
    const Scalar s2 = p.output_scale * p.output_scale;
    g.assign(s2 * g.flatten());
    return g;
}

void adam_step(ModelParams& p, const Gradients& grads, AdamState& state, const TrainConfig& cfg) {
    const Eigen::VectorXd g = grads.flatten();
    Eigen::VectorXd theta = p.flatten();
    if (state.m.size() == 0) {
        state.m = Eigen::VectorXd::Zero(theta.size());
        state.v = Eigen::VectorXd::Zero(theta.size());
        state.step = 0;
    }
    if (g.size() != theta.size() || state.m.size() != theta.size()) {
        throw Error(ErrorCode::ShapeMismatch, "adam_step: gradient/state size does not match parameters");
    }
    ++state.step;
    state.m = cfg.adam_beta1 * state.m + (1.0 - cfg.adam_beta1) * g;
    state.v = cfg.adam_beta2 * state.v + (1.0 - cfg.adam_beta2) * g.cwiseAbs2();
    const Scalar c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<Scalar>(state.step));
    const Scalar c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<Scalar>(state.step));
    theta.array() -= cfg.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + cfg.adam_eps);
    p.assign(theta);
}

Sample make_sample(const Observation& obs, const Displacements& demo, std::string pair_id) {
    if (obs.landmark_count() != demo.cols()) {
        throw Error(ErrorCode::CountMismatch, "observation and demonstrator landmark counts differ");
    }
    return Sample{obs.flatten(), demo, std::move(pair_id)};
}

TrainResult train(const std::vector<Sample>& samples, const TrainConfig& cfg, Scalar output_scale) {
    cfg.validate();
    if (samples.empty()) throw Error(ErrorCode::EmptyDataset, "train: no samples");
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, 0xC0FFEE));
    rng.shuffle(order.begin(), order.end());
    const auto n = static_cast<double>(samples.size());
    std::size_t n_val = 0;
    if (samples.size() >= 2) {
        n_val = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(n * cfg.val_fraction)), 1,
                                        samples.size() - 1);
    }
    std::vector<Sample> val_set;
    std::vector<Sample> train_set;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_val ? val_set : train_set).push_back(samples[order[i]]);
    }
    return train(train_set, val_set, cfg, output_scale);
}

TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set, const TrainConfig& cfg,
                  Scalar output_scale) {
    cfg.validate();
    if (train_set.empty()) throw Error(ErrorCode::EmptyDataset, "train: empty training set");
    if (!(output_scale > 0)) throw Error(ErrorCode::InvalidArgument, "train: output_scale must be > 0");
    const Eigen::Index in = train_set.front().input.size();
    const Eigen::Index k = train_set.front().demo.cols();
    check_shapes(train_set, in, k);
    check_shapes(val_set, in, k);

    TrainResult result;
    result.params = init_model(in, k, cfg.hidden, cfg.seed, output_scale);
    ModelParams params = result.params;

    std::vector<std::size_t> train_idx(train_set.size());
    std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
    std::vector<std::size_t> val_idx(val_set.size());
    std::iota(val_idx.begin(), val_idx.end(), std::size_t{0});

    const Eigen::MatrixXd x_train = stack_inputs(train_set, train_idx);
    const Eigen::MatrixXd y_train = stack_targets(train_set, train_idx, output_scale);
    Eigen::MatrixXd x_val;
    Eigen::MatrixXd y_val;
    if (!val_set.empty()) {
        x_val = stack_inputs(val_set, val_idx);
        y_val = stack_targets(val_set, val_idx, output_scale);
    }

    auto evaluate = [&](int epoch) {
        EpochLoss e;
        e.epoch = epoch;
        e.train = batch_loss(params, x_train, y_train, cfg, nullptr);
        e.val = val_set.empty() ? e.train : batch_loss(params, x_val, y_val, cfg, nullptr);
        return e;
    };

    result.history.push_back(evaluate(0));
    Scalar best = result.history.back().val;
    int since_best = 0;
    AdamState state;
    Rng rng(derive_seed(cfg.seed, 0xBA7C4));
    Gradients grad;
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(train_idx.begin(), train_idx.end());
        for (std::size_t start = 0; start < train_idx.size(); start += batch) {
            const std::size_t stop = std::min(train_idx.size(), start + batch);
            const auto count = static_cast<Eigen::Index>(stop - start);
            Eigen::MatrixXd xb(in, count);
            Eigen::MatrixXd yb(2 * k, count);
            for (Eigen::Index j = 0; j < count; ++j) {
                const auto src = static_cast<Eigen::Index>(train_idx[start + static_cast<std::size_t>(j)]);
                xb.col(j) = x_train.col(src);
                yb.col(j) = y_train.col(src);
            }
            batch_loss(params, xb, yb, cfg, &grad);
            adam_step(params, grad, state, cfg);
        }
        result.history.push_back(evaluate(epoch));
        if (result.history.back().val < best) {
            best = result.history.back().val;
            result.params = params;
            result.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return result;
}

} // namespace fundreg
