#include "fundreg/model.hpp"

#include <json.hpp>

#include <fstream>

namespace fundreg {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "fundreg-checkpoint";
constexpr int kVersion = 1;

json matrix_to_json(const Eigen::MatrixXd& m) {
    return json{{"rows", m.rows()},
                {"cols", m.cols()},
                {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw Error(ErrorCode::CorruptFile, "checkpoint matrix has inconsistent shape");
    }
    return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const ModelParams& p = ckpt.params;
    json trunk = json::array();
    for (std::size_t l = 0; l < p.trunk_weights.size(); ++l) {
        trunk.push_back({{"weights", matrix_to_json(p.trunk_weights[l])},
                         {"bias", matrix_to_json(p.trunk_biases[l])}});
    }
    const json doc{
        {"format", kFormat},
        {"version", kVersion},
        {"layer_sizes", p.layer_sizes()},
        {"output_scale", p.output_scale},
        {"observation", {{"C", ckpt.obs.patch_size}, {"S", ckpt.obs.spacing}, {"fill", ckpt.obs.fill}}},
        {"branch", std::string(to_string(ckpt.branch))},
        {"trunk", trunk},
        {"translation_head",
         {{"weights", matrix_to_json(p.translation_weights)}, {"bias", matrix_to_json(p.translation_bias)}}},
        {"displacement_head",
         {{"weights", matrix_to_json(p.displacement_weights)}, {"bias", matrix_to_json(p.displacement_bias)}}},
    };
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write checkpoint " + path.string());
    out << doc.dump(1) << '\n';
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, path.string());
    Checkpoint ckpt;
    try {
        const json doc = json::parse(in);
        if (doc.at("format") != kFormat) throw Error(ErrorCode::UnsupportedFormat, path.string());
        if (doc.at("version").get<int>() != kVersion) {
            throw Error(ErrorCode::UnsupportedFormat, path.string() + ": checkpoint version " +
                                                          doc.at("version").dump());
        }
        ModelParams& p = ckpt.params;
        p.output_scale = doc.at("output_scale").get<double>();
        for (const auto& layer : doc.at("trunk")) {
            p.trunk_weights.push_back(matrix_from_json(layer.at("weights")));
            p.trunk_biases.push_back(matrix_from_json(layer.at("bias")));
        }
        p.translation_weights = matrix_from_json(doc.at("translation_head").at("weights"));
        p.translation_bias = matrix_from_json(doc.at("translation_head").at("bias"));
        p.displacement_weights = matrix_from_json(doc.at("displacement_head").at("weights"));
        p.displacement_bias = matrix_from_json(doc.at("displacement_head").at("bias"));
        const auto& obs = doc.at("observation");
        ckpt.obs.patch_size = obs.at("C").get<int>();
        ckpt.obs.spacing = obs.at("S").get<double>();
        ckpt.obs.fill = obs.at("fill").get<double>();
        ckpt.branch = branch_from_string(doc.at("branch").get<std::string>());
        if (doc.at("layer_sizes").get<std::vector<Eigen::Index>>() != p.layer_sizes()) {
            throw Error(ErrorCode::CorruptFile, path.string() + ": layer_sizes disagree with stored weights");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptFile, path.string() + ": " + e.what());
    }
    return ckpt;
}

void check_compatible(const Checkpoint& ckpt, const ObsConfig& obs) {
    if (ckpt.obs.patch_size != obs.patch_size || ckpt.obs.spacing != obs.spacing) {
        throw Error(ErrorCode::ConfigMismatch,
                    "checkpoint was trained with C=" + std::to_string(ckpt.obs.patch_size) +
                        " S=" + format_number(ckpt.obs.spacing) + ", requested C=" +
                        std::to_string(obs.patch_size) + " S=" + format_number(obs.spacing));
    }
}

} // namespace fundreg
