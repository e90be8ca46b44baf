#include "fundreg/model.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace fundreg;

namespace {

Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n, double scale = 1) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal() * scale;
    return v;
}

Displacements random_demo(Rng& rng, Eigen::Index k, double scale = 5) {
    Displacements d(2, k);
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = rng.normal() * scale;
    return d;
}

// Perturbs biases so ReLU kinks are unlikely at the evaluation point.
ModelParams jittered_model(Eigen::Index in, Eigen::Index k, const std::vector<int>& hidden, std::uint64_t seed,
                           double scale = 1) {
    ModelParams p = init_model(in, k, hidden, seed, scale);
    Rng rng(seed + 1000);
    for (auto& b : p.trunk_biases) b = random_vector(rng, b.size(), 0.1);
    p.translation_bias = random_vector(rng, 2, 0.1);
    p.displacement_bias = random_vector(rng, 2 * k, 0.1);
    return p;
}

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

Eigen::VectorXd numeric_gradient(ModelParams p, const Eigen::VectorXd& x, const Displacements& demo,
                                 const TrainConfig& cfg, double h) {
    const Eigen::VectorXd theta = p.flatten();
    Eigen::VectorXd g(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Eigen::VectorXd t = theta;
        t(i) += h;
        p.assign(t);
        const double up = loss(forward(p, x), demo, cfg);
        t(i) = theta(i) - h;
        p.assign(t);
        const double down = loss(forward(p, x), demo, cfg);
        g(i) = (up - down) / (2 * h);
    }
    return g;
}

std::vector<Sample> linear_samples(std::uint64_t seed, int n, Eigen::Index in, Eigen::Index k) {
    Rng rng(seed);
    Eigen::MatrixXd a(2 * k, in);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.normal();
    std::vector<Sample> out;
    for (int s = 0; s < n; ++s) {
        Sample smp;
        smp.input = random_vector(rng, in);
        smp.demo = (a * smp.input).reshaped(2, k);
        smp.pair_id = "p" + std::to_string(s);
        out.push_back(smp);
    }
    return out;
}

} // namespace

TEST_CASE("init_model shapes") {
    const ModelParams p = init_model(20, 3, {8, 4}, 1);
    CHECK_EQ(p.layer_sizes(), std::vector<Eigen::Index>{20, 8, 4, 2, 6});
    CHECK_EQ(p.input_size(), 20);
    CHECK_EQ(p.landmark_count(), 3);
    CHECK_EQ(p.parameter_count(), 20 * 8 + 8 + 8 * 4 + 4 + 4 * 2 + 2 + 4 * 6 + 6);
    CHECK_EQ(p.flatten().size(), p.parameter_count());

    const ModelParams flat = init_model(5, 1, {}, 1);
    CHECK(flat.trunk_weights.empty());
    CHECK_EQ(flat.translation_weights.cols(), 5);
    CHECK_EQ(flat.displacement_weights.rows(), 2);
    CHECK_ERROR_CODE(init_model(0, 1, {}, 1), ErrorCode::InvalidArgument);
}

TEST_CASE("init_model is seeded and zero mean") {
    CHECK_EQ(init_model(30, 4, {16}, 7).flatten(), init_model(30, 4, {16}, 7).flatten());
    CHECK_NE(init_model(30, 4, {16}, 7).flatten(), init_model(30, 4, {16}, 8).flatten());

    const ModelParams p = init_model(200, 10, {100}, 3);
    const Eigen::MatrixXd& w = p.trunk_weights[0];
    const double bound = std::sqrt(6.0 / 300.0);
    CHECK_LE(w.cwiseAbs().maxCoeff(), bound);
    // Uniform(-b, b): std b / sqrt(3); mean within 3 standard errors.
    const double se = bound / std::sqrt(3.0) / std::sqrt(static_cast<double>(w.size()));
    CHECK_LT(std::abs(w.mean()), 3 * se);
    CHECK_EQ(p.trunk_biases[0], Eigen::VectorXd::Zero(100));
}

TEST_CASE("flatten and assign round trip") {
    ModelParams p = init_model(6, 2, {5, 3}, 11);
    const Eigen::VectorXd theta = p.flatten();
    ModelParams z = p.zeros_like();
    CHECK_EQ(z.flatten(), Eigen::VectorXd::Zero(theta.size()));
    z.assign(theta);
    CHECK_EQ(z.flatten(), theta);
    CHECK_EQ(z.trunk_weights[1], p.trunk_weights[1]);
}

TEST_CASE("forward with zero weights is zero") {
    const ModelParams p = init_model(10, 4, {6}, 1).zeros_like();
    const Prediction out = forward(p, Eigen::VectorXd::Ones(10));
    CHECK_EQ(out.translation, Vec2::Zero());
    CHECK_EQ(out.displacements, Displacements::Zero(2, 4));
}

TEST_CASE("forward linear case by hand") {
    ModelParams p = init_model(2, 1, {}, 1, 2.0);
    p.translation_weights << 1, 2, 3, 4;
    p.translation_bias << 0.5, -0.5;
    p.displacement_weights << -1, 0, 0, 1;
    p.displacement_bias << 1, 1;
    const Prediction out = forward(p, Eigen::Vector2d(1, 1));
    CHECK_EQ(out.translation, Vec2(2 * 3.5, 2 * 6.5));
    CHECK_EQ(out.displacements.col(0), Vec2(0, 4));
}

TEST_CASE("forward ReLU gate and head scaling") {
    ModelParams p = init_model(1, 1, {1}, 1);
    p.trunk_weights[0] << 1;
    p.trunk_biases[0] << 0;
    p.translation_weights << 1, 1;
    p.displacement_weights << 2, 3;
    CHECK_EQ(forward(p, Eigen::VectorXd::Constant(1, -5)).translation, Vec2::Zero());
    CHECK_EQ(forward(p, Eigen::VectorXd::Constant(1, 2)).displacements.col(0), Vec2(4, 6));

    Rng rng(2);
    ModelParams q = init_model(12, 3, {8}, 5);
    const Eigen::VectorXd x = random_vector(rng, 12);
    const Prediction base = forward(q, x);
    q.displacement_weights *= 2;
    q.displacement_bias *= 2;
    const Prediction twice = forward(q, x);
    CHECK_LT((twice.displacements - 2 * base.displacements).cwiseAbs().maxCoeff(), 1e-12);
    CHECK_EQ(twice.translation, base.translation);
    CHECK_ERROR_CODE(forward(q, Eigen::VectorXd::Zero(11)), ErrorCode::ShapeMismatch);
}

TEST_CASE("loss examples") {
    TrainConfig cfg;
    cfg.w_translation = 1;
    cfg.w_displacement = 0;
    Prediction pred;
    pred.translation = Vec2(3, 4);
    pred.displacements = Displacements::Zero(2, 2);
    CHECK_EQ(loss(pred, Displacements::Zero(2, 2), cfg), 25.0);

    cfg.w_translation = 0;
    cfg.w_displacement = 1;
    Displacements demo(2, 2);
    demo << 1, 0, 0, 2;
    // (1 + 4) / 2
    CHECK_EQ(loss(pred, demo, cfg), 2.5);

    cfg = TrainConfig{};
    pred.translation = demo.rowwise().mean();
    pred.displacements = demo;
    CHECK_EQ(loss(pred, demo, cfg), 0.0);
    CHECK_ERROR_CODE(loss(pred, Displacements::Zero(2, 3), cfg), ErrorCode::CountMismatch);
}

TEST_CASE("backward matches central differences") {
    TrainConfig cfg;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const ModelParams p = jittered_model(12, 3, {7, 5}, seed, 1.5);
        const Eigen::VectorXd x = random_vector(rng, 12);
        const Displacements demo = random_demo(rng, 3);
        const Eigen::VectorXd g = backward(p, x, demo, cfg).flatten();
        CHECK_LT(relative_error(g, numeric_gradient(p, x, demo, cfg, 1e-5)), 1e-6);
    }
}

TEST_CASE("backward at an exact fit is zero and scales with the displacement weight") {
    ModelParams p = jittered_model(6, 2, {4}, 3);
    Rng rng(3);
    const Eigen::VectorXd x = random_vector(rng, 6);
    const Prediction out = forward(p, x);
    Displacements demo = out.displacements;
    TrainConfig cfg;
    cfg.w_translation = 0;
    CHECK_LT(backward(p, x, demo, cfg).flatten().cwiseAbs().maxCoeff(), 1e-12);

    demo.array() += 1.0;
    const Eigen::VectorXd g1 = backward(p, x, demo, cfg).flatten();
    cfg.w_displacement *= 2;
    const Eigen::VectorXd g2 = backward(p, x, demo, cfg).flatten();
    CHECK_LT((g2 - 2 * g1).cwiseAbs().maxCoeff(), 1e-12);
}

TEST_CASE("batch_loss is the mean of per-sample losses in output units") {
    Rng rng(9);
    const ModelParams p = jittered_model(5, 2, {6}, 9, 4.0);
    TrainConfig cfg;
    Eigen::MatrixXd xs(5, 7);
    Eigen::MatrixXd ys(4, 7);
    double expected = 0;
    Eigen::VectorXd grad_sum = Eigen::VectorXd::Zero(p.parameter_count());
    for (Eigen::Index j = 0; j < 7; ++j) {
        xs.col(j) = random_vector(rng, 5);
        const Displacements demo = random_demo(rng, 2);
        ys.col(j) = demo.reshaped() / 4.0;
        expected += loss(forward(p, Eigen::VectorXd(xs.col(j))), demo, cfg) / 16.0;
        grad_sum += backward(p, xs.col(j), demo, cfg).flatten() / 16.0;
    }
    Gradients g;
    CHECK_NEAR(batch_loss(p, xs, ys, cfg, &g), expected / 7, 1e-12);
    CHECK_LT((g.flatten() - grad_sum / 7).cwiseAbs().maxCoeff(), 1e-10);
}

TEST_CASE("adam first step and zero gradient") {
    TrainConfig cfg;
    cfg.lr = 0.01;
    ModelParams p = init_model(4, 1, {3}, 2);
    const Eigen::VectorXd theta = p.flatten();

    AdamState state;
    adam_step(p, p.zeros_like(), state, cfg);
    CHECK_EQ(p.flatten(), theta);
    CHECK_EQ(state.step, 1);

    Rng rng(1);
    Gradients g = p.zeros_like();
    // Bounded away from zero so eps stays negligible next to |g|.
    Eigen::VectorXd raw = random_vector(rng, theta.size());
    raw = raw.array().sign() * (raw.array().abs() + 0.1);
    g.assign(raw);
    AdamState fresh;
    ModelParams q = init_model(4, 1, {3}, 2);
    adam_step(q, g, fresh, cfg);
    const Eigen::VectorXd step = q.flatten() - theta;
    const Eigen::VectorXd expected = -cfg.lr * g.flatten().array().sign().matrix();
    CHECK_LT((step - expected).cwiseAbs().maxCoeff(), cfg.lr * 1e-6);
}

TEST_CASE("adam is deterministic") {
    TrainConfig cfg;
    Rng rng(5);
    ModelParams a = init_model(4, 2, {3}, 2);
    ModelParams b = a;
    AdamState sa;
    AdamState sb;
    for (int i = 0; i < 5; ++i) {
        Gradients g = a.zeros_like();
        g.assign(random_vector(rng, a.parameter_count()));
        adam_step(a, g, sa, cfg);
        adam_step(b, g, sb, cfg);
    }
    CHECK_EQ(a.flatten(), b.flatten());
}

TEST_CASE("train fits a realizable linear map") {
    TrainConfig cfg;
    cfg.hidden = {};
    cfg.lr = 0.05;
    cfg.epochs = 400;
    cfg.patience = 400;
    cfg.batch_size = 16;
    const auto samples = linear_samples(4, 64, 6, 2);
    const TrainResult r = train(samples, {}, cfg);
    CHECK_LT(r.history.back().train, 1e-6);
    CHECK_LT(r.history.back().train, r.history.front().train);
    for (const auto& s : samples) {
        CHECK_LT((forward(r.params, s.input).displacements - s.demo).cwiseAbs().maxCoeff(), 1e-2);
    }
}

TEST_CASE("train with zero learning rate leaves the loss flat") {
    TrainConfig cfg;
    cfg.hidden = {4};
    cfg.lr = 0;
    cfg.epochs = 5;
    cfg.patience = 2;
    const auto samples = linear_samples(1, 20, 5, 2);
    const TrainResult r = train(samples, cfg);
    REQUIRE_GE(r.history.size(), 2);
    for (const auto& e : r.history) CHECK_EQ(e.train, r.history.front().train);
    // Patience runs out after 2 epochs without improvement.
    CHECK_EQ(r.history.size(), 3);
    CHECK_EQ(r.best_epoch, 0);
    CHECK_EQ(r.params.flatten(), init_model(5, 2, {4}, cfg.seed).flatten());
}

TEST_CASE("train is deterministic and validates input") {
    TrainConfig cfg;
    cfg.hidden = {8};
    cfg.epochs = 3;
    const auto samples = linear_samples(2, 30, 5, 2);
    CHECK_EQ(train(samples, cfg).params.flatten(), train(samples, cfg).params.flatten());

    CHECK_ERROR_CODE(train(std::vector<Sample>{}, cfg), ErrorCode::EmptyDataset);
    auto bad = samples;
    bad[3].input = Eigen::VectorXd::Zero(4);
    CHECK_ERROR_CODE(train(bad, cfg), ErrorCode::InconsistentShapes);
    bad = samples;
    bad[5].demo = Displacements::Zero(2, 3);
    CHECK_ERROR_CODE(train(bad, cfg), ErrorCode::InconsistentShapes);
    TrainConfig neg = cfg;
    neg.lr = -1;
    CHECK_ERROR_CODE(train(samples, neg), ErrorCode::InvalidArgument);
}

TEST_CASE("train reports the best validation epoch") {
    TrainConfig cfg;
    cfg.hidden = {8};
    cfg.epochs = 30;
    cfg.patience = 5;
    cfg.lr = 0.01;
    const auto samples = linear_samples(8, 80, 5, 2);
    const TrainResult r = train(samples, cfg);
    double best = r.history.front().val;
    int best_epoch = 0;
    for (const auto& e : r.history) {
        if (e.val < best) {
            best = e.val;
            best_epoch = e.epoch;
        }
    }
    CHECK_EQ(r.best_epoch, best_epoch);
    CHECK_LT(best, r.history.front().val);
}

TEST_CASE("make_sample checks landmark counts") {
    Observation obs;
    obs.patch_size = 2;
    obs.patches = Eigen::VectorXd::Zero(2 * 3 * 4);
    obs.norm_points = LandmarkSet::Zero(2, 3);
    const Sample s = make_sample(obs, Displacements::Ones(2, 3), "a");
    CHECK_EQ(s.input.size(), observation_length(3, 2));
    CHECK_EQ(s.pair_id, "a");
    CHECK_ERROR_CODE(make_sample(obs, Displacements::Ones(2, 2), "a"), ErrorCode::CountMismatch);
}

TEST_CASE("checkpoint round trip is bit exact") {
    const auto dir = test::temp_dir("ckpt");
    Checkpoint c;
    c.params = jittered_model(9, 3, {5, 4}, 17, 64.0);
    c.obs = ObsConfig{3, 2.5, 0};
    c.branch = Branch::HistEqLoG;
    save_checkpoint(c, dir / "m.json");
    const Checkpoint back = load_checkpoint(dir / "m.json");
    CHECK_EQ(back.params.flatten(), c.params.flatten());
    CHECK_EQ(back.params.layer_sizes(), c.params.layer_sizes());
    CHECK_EQ(back.params.output_scale, 64.0);
    CHECK_EQ(back.obs.patch_size, 3);
    CHECK_EQ(back.obs.spacing, 2.5);
    CHECK_EQ(back.branch, Branch::HistEqLoG);

    Rng rng(1);
    const Eigen::VectorXd x = random_vector(rng, 9);
    CHECK_EQ(forward(back.params, x).displacements, forward(c.params, x).displacements);

    CHECK_NOTHROW(check_compatible(back, ObsConfig{3, 2.5, 0}));
    CHECK_ERROR_CODE(check_compatible(back, ObsConfig{4, 2.5, 0}), ErrorCode::ConfigMismatch);
    CHECK_ERROR_CODE(check_compatible(back, ObsConfig{3, 3, 0}), ErrorCode::ConfigMismatch);
    CHECK_ERROR_CODE(load_checkpoint(dir / "absent.json"), ErrorCode::MissingFile);
    std::ofstream(dir / "junk.json") << "{not json";
    CHECK_ERROR_CODE(load_checkpoint(dir / "junk.json"), ErrorCode::CorruptFile);
}
