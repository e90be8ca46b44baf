#include "fundreg/registration.hpp"

#include "fundreg/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <ostream>
#include <set>

namespace fundreg {

namespace {

using nlohmann::json;

struct PairData {
    GrayImage pre_source;
    GrayImage pre_target;
    std::vector<std::vector<Sample>> samples;   // per observation config
};

// Unaugmented pair plus cfg.augment.copies augmented copies, encoded for every config.
void build_samples(const ImagePair& pair, std::size_t index, const EvalConfig& cfg,
                   const std::vector<ObsConfig>& grid, PairData& out) {
    out.samples.assign(grid.size(), {});
    const Displacements demo = demonstrator(pair);
    for (std::size_t o = 0; o < grid.size(); ++o) {
        out.samples[o].push_back(
            make_sample(encode(pair.source_landmarks, out.pre_source, out.pre_target, grid[o]), demo, pair.id));
    }
    AugmentConfig aug = cfg.augment;
    aug.seed = derive_seed(cfg.seed, index);
    const ImagePair standard = standardized_pair(pair);
    for (int i = 0; i < aug.copies; ++i) {
        const AugmentedPair copy = augment_copy(standard, aug, i);
        const GrayImage src = preprocess(copy.pair.source, cfg.preprocess);
        const GrayImage tgt = preprocess(copy.pair.target, cfg.preprocess);
        const Displacements copy_demo = demonstrator(copy.pair);
        for (std::size_t o = 0; o < grid.size(); ++o) {
            out.samples[o].push_back(
                make_sample(encode(copy.pair.source_landmarks, src, tgt, grid[o]), copy_demo, pair.id));
        }
    }
}

json stats_json(const ColumnStats& s) { return json{{"mean", s.mean}, {"std", s.std}}; }

json config_to_json(const EvalConfig& c) {
    const auto& p = c.preprocess;
    return json{
        {"observation", {{"C", c.obs.patch_size}, {"S", c.obs.spacing}, {"fill", c.obs.fill}}},
        {"preprocess",
         {{"branch", std::string(to_string(p.branch))},
          {"gray_mode", p.gray_mode == GrayMode::GreenChannel ? "GreenChannel" : "Luma"},
          {"hist_bins", p.hist_bins},
          {"log_sigma", p.log_sigma},
          {"guided", {{"radius", p.guided.radius}, {"eps", p.guided.eps}}},
          {"frangi",
           {{"scales", p.frangi.scales},
            {"beta", p.frangi.beta},
            {"c", p.frangi.c ? json(*p.frangi.c) : json("adaptive")},
            {"polarity", p.frangi.polarity == Polarity::DarkOnBright ? "DarkOnBright" : "BrightOnDark"}}}}},
        {"augment",
         {{"copies", c.augment.copies},
          {"brightness", c.augment.brightness},
          {"contrast", {c.augment.contrast_lo, c.augment.contrast_hi}},
          {"rot_deg", c.augment.affine.rot_deg},
          {"scale", {c.augment.affine.scale_lo, c.augment.affine.scale_hi}},
          {"shear", c.augment.affine.shear},
          {"trans", c.augment.affine.trans}}},
        {"train",
         {{"lr", c.train.lr},
          {"adam_beta1", c.train.adam_beta1},
          {"adam_beta2", c.train.adam_beta2},
          {"adam_eps", c.train.adam_eps},
          {"epochs", c.train.epochs},
          {"patience", c.train.patience},
          {"batch_size", c.train.batch_size},
          {"w_translation", c.train.w_translation},
          {"w_displacement", c.train.w_displacement},
          {"val_fraction", c.train.val_fraction},
          {"hidden", c.train.hidden},
          {"seed", c.train.seed}}},
        {"transform_model", std::string(to_string(c.model))},
        {"seed", c.seed},
    };
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rest(std::vector<std::size_t> rest,
                                                                         const TrainConfig& train, Rng& rng) {
    rng.shuffle(rest.begin(), rest.end());
    std::size_t n_val = 0;
    if (rest.size() >= 2) {
        const auto wanted = static_cast<std::size_t>(std::llround(static_cast<double>(rest.size()) * train.val_fraction));
        n_val = std::clamp<std::size_t>(wanted, 1, rest.size() - 1);
    }
    std::vector<std::size_t> val(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> tr(rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
    std::sort(val.begin(), val.end());
    std::sort(tr.begin(), tr.end());
    return {tr, val};
}

} // namespace

Scalar recovery_pct(Scalar tre_initial, Scalar tre_final) {
    return tre_initial > 0 ? 100.0 * (1.0 - tre_final / tre_initial) : 0.0;
}

ColumnStats column_stats(const std::vector<Scalar>& values) {
    ColumnStats s;
    if (values.empty()) return s;
    const auto n = static_cast<Scalar>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() > 1) {
        Scalar ss = 0;
        for (Scalar v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / (n - 1));
    }
    return s;
}

void summarize(EvalReport& report) {
    report.per_category.clear();
    std::map<std::string, std::vector<const ReportRow*>> groups;
    for (const auto& r : report.rows) {
        groups[std::string(to_string(r.category))].push_back(&r);
        groups["All"].push_back(&r);
    }
    for (const auto& [name, rows] : groups) {
        auto column = [&](Scalar ReportRow::*field) {
            std::vector<Scalar> v;
            for (const auto* r : rows) v.push_back(r->*field);
            return column_stats(v);
        };
        CategoryStats cs;
        cs.count = rows.size();
        cs.tre_initial = column(&ReportRow::tre_initial);
        cs.tre_final = column(&ReportRow::tre_final);
        cs.tre_raw = column(&ReportRow::tre_raw);
        cs.recovery_pct = column(&ReportRow::recovery_pct);
        report.per_category[name] = cs;
    }
}

std::vector<Fold> plan_leave_one_out(std::size_t n_pairs, const TrainConfig& train, std::uint64_t seed) {
    std::vector<Fold> folds;
    for (std::size_t f = 0; f < n_pairs; ++f) {
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < n_pairs; ++i) {
            if (i != f) rest.push_back(i);
        }
        Rng rng(derive_seed(seed, f));
        auto [tr, val] = split_rest(std::move(rest), train, rng);
        folds.push_back(Fold{{f}, std::move(tr), std::move(val)});
    }
    return folds;
}

Fold plan_holdout(std::size_t n_pairs, const std::vector<std::size_t>& test, const TrainConfig& train,
                  std::uint64_t seed) {
    const std::set<std::size_t> held(test.begin(), test.end());
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        if (held.count(i) == 0) rest.push_back(i);
    }
    Rng rng(derive_seed(seed, 0));
    auto [tr, val] = split_rest(std::move(rest), train, rng);
    return Fold{test, std::move(tr), std::move(val)};
}

void assert_disjoint(const std::vector<ImagePair>& dataset, const Fold& fold) {
    std::set<std::string> test_ids;
    for (auto i : fold.test) test_ids.insert(dataset.at(i).id);
    for (const auto* part : {&fold.train, &fold.val}) {
        for (auto i : *part) {
            if (test_ids.count(dataset.at(i).id) != 0) {
                throw Error(ErrorCode::LeakageDetected, "test pair '" + dataset[i].id + "' also used for training");
            }
        }
    }
}

std::vector<EvalReport> run_folds(const std::vector<ImagePair>& dataset, const std::vector<Fold>& folds,
                                  const EvalConfig& cfg, const std::vector<ObsConfig>& obs_grid,
                                  const std::string& protocol) {
    if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "evaluation dataset is empty");
    if (obs_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty observation grid");
    for (const auto& o : obs_grid) o.validate();
    cfg.train.validate();
    cfg.augment.validate();
    for (const auto& p : dataset) check_pair(p);
    for (const auto& f : folds) {
        if (f.train.empty()) throw Error(ErrorCode::DatasetTooSmall, "fold without training pairs");
        assert_disjoint(dataset, f);
    }

    std::vector<bool> needs_samples(dataset.size(), false);
    for (const auto& f : folds) {
        for (auto i : f.train) needs_samples[i] = true;
        for (auto i : f.val) needs_samples[i] = true;
    }
    std::vector<PairData> data(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        data[i].pre_source = preprocess(dataset[i].source, cfg.preprocess);
        data[i].pre_target = preprocess(dataset[i].target, cfg.preprocess);
        if (needs_samples[i]) build_samples(dataset[i], i, cfg, obs_grid, data[i]);
    }

    const Scalar output_scale = output_scale_for(data.front().pre_source.cols());
    std::vector<EvalReport> reports;
    for (std::size_t o = 0; o < obs_grid.size(); ++o) {
        EvalReport report;
        report.protocol = protocol;
        report.config = cfg;
        report.config.obs = obs_grid[o];
        for (std::size_t f = 0; f < folds.size(); ++f) {
            const Fold& fold = folds[f];
            std::vector<Sample> train_set;
            std::vector<Sample> val_set;
            for (auto i : fold.train) train_set.insert(train_set.end(), data[i].samples[o].begin(), data[i].samples[o].end());
            for (auto i : fold.val) val_set.insert(val_set.end(), data[i].samples[o].begin(), data[i].samples[o].end());
            TrainConfig tc = cfg.train;
            tc.seed = derive_seed(cfg.train.seed, f);
            const TrainResult trained = train(train_set, val_set, tc, output_scale);
            for (auto i : fold.test) {
                const ImagePair& pair = dataset[i];
                const RegistrationResult r =
                    register_landmarks(trained.params, pair.source_landmarks, pair.target_landmarks,
                                       data[i].pre_source, data[i].pre_target, obs_grid[o], cfg.model);
                report.rows.push_back(ReportRow{pair.id, pair.category, obs_grid[o].patch_size, obs_grid[o].spacing,
                                                cfg.preprocess.branch, r.tre_initial, r.tre_final, r.tre_raw,
                                                recovery_pct(r.tre_initial, r.tre_final)});
            }
        }
        summarize(report);
        reports.push_back(std::move(report));
    }
    return reports;
}

EvalReport run_folds(const std::vector<ImagePair>& dataset, const std::vector<Fold>& folds, const EvalConfig& cfg,
                     const std::string& protocol) {
    return run_folds(dataset, folds, cfg, std::vector<ObsConfig>{cfg.obs}, protocol).front();
}

std::vector<Sample> pair_samples(const ImagePair& pair, std::size_t index, const EvalConfig& cfg) {
    check_pair(pair);
    PairData d;
    d.pre_source = preprocess(pair.source, cfg.preprocess);
    d.pre_target = preprocess(pair.target, cfg.preprocess);
    build_samples(pair, index, cfg, {cfg.obs}, d);
    return std::move(d.samples.front());
}

Scalar output_scale_for(Eigen::Index width) { return static_cast<Scalar>(width) / 4.0; }

TrainResult train_on_pairs(const std::vector<ImagePair>& dataset, const EvalConfig& cfg) {
    if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "training dataset is empty");
    cfg.obs.validate();
    cfg.train.validate();
    cfg.augment.validate();
    const Fold fold = plan_holdout(dataset.size(), {}, cfg.train, cfg.seed);
    std::vector<Sample> train_set;
    std::vector<Sample> val_set;
    for (auto i : fold.train) {
        auto s = pair_samples(dataset[i], i, cfg);
        train_set.insert(train_set.end(), s.begin(), s.end());
    }
    for (auto i : fold.val) {
        auto s = pair_samples(dataset[i], i, cfg);
        val_set.insert(val_set.end(), s.begin(), s.end());
    }
    const GrayImage& first = std::holds_alternative<GrayImage>(dataset.front().source)
                                 ? std::get<GrayImage>(dataset.front().source)
                                 : std::get<RgbImage>(dataset.front().source).green;
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.train.seed, 0);
    return train(train_set, val_set, tc, output_scale_for(first.cols()));
}

EvalReport leave_one_out(const std::vector<ImagePair>& dataset, const EvalConfig& cfg) {
    if (dataset.size() < 2) {
        throw Error(ErrorCode::DatasetTooSmall, "leave-one-out needs >= 2 pairs, got " + std::to_string(dataset.size()));
    }
    return run_folds(dataset, plan_leave_one_out(dataset.size(), cfg.train, cfg.seed), cfg, "leave-one-out");
}

std::vector<EvalReport> sweep_hyperparams(const std::vector<ImagePair>& dataset, const std::vector<int>& c_values,
                                          const std::vector<Scalar>& s_values, const EvalConfig& cfg) {
    if (c_values.empty() || s_values.empty()) throw Error(ErrorCode::InvalidArgument, "empty C or S grid");
    if (dataset.size() < 2) {
        throw Error(ErrorCode::DatasetTooSmall, "leave-one-out needs >= 2 pairs, got " + std::to_string(dataset.size()));
    }
    std::vector<ObsConfig> grid;
    for (int c : c_values) {
        for (Scalar s : s_values) {
            ObsConfig o = cfg.obs;
            o.patch_size = c;
            o.spacing = s;
            grid.push_back(o);
        }
    }
    return run_folds(dataset, plan_leave_one_out(dataset.size(), cfg.train, cfg.seed), cfg, grid, "leave-one-out");
}

std::string config_json(const EvalConfig& cfg) { return config_to_json(cfg).dump(); }

void write_report_tsv(const EvalReport& report, std::ostream& out) {
    out << "# protocol: " << report.protocol << '\n';
    out << "# config: " << config_json(report.config) << '\n';
    out << "id\tcategory\tC\tS\tbranch\ttre_initial\ttre_final\ttre_raw\trecovery_pct\n";
    for (const auto& r : report.rows) {
        out << r.id << '\t' << to_string(r.category) << '\t' << r.patch_size << '\t' << format_number(r.spacing)
            << '\t' << to_string(r.branch) << '\t' << format_number(r.tre_initial) << '\t'
            << format_number(r.tre_final) << '\t' << format_number(r.tre_raw) << '\t'
            << format_number(r.recovery_pct) << '\n';
    }
}

void write_report_json(const EvalReport& report, std::ostream& out) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"id", r.id},
                        {"category", std::string(to_string(r.category))},
                        {"C", r.patch_size},
                        {"S", r.spacing},
                        {"branch", std::string(to_string(r.branch))},
                        {"tre_initial", r.tre_initial},
                        {"tre_final", r.tre_final},
                        {"tre_raw", r.tre_raw},
                        {"recovery_pct", r.recovery_pct}});
    }
    json cats = json::object();
    for (const auto& [name, s] : report.per_category) {
        cats[name] = {{"count", s.count},
                      {"tre_initial", stats_json(s.tre_initial)},
                      {"tre_final", stats_json(s.tre_final)},
                      {"tre_raw", stats_json(s.tre_raw)},
                      {"recovery_pct", stats_json(s.recovery_pct)}};
    }
    const json doc{{"protocol", report.protocol},
                   {"config", config_to_json(report.config)},
                   {"per_pair", rows},
                   {"per_category", cats}};
    out << doc.dump(2) << '\n';
}

} // namespace fundreg
