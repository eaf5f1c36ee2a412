#include "cfield/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <cmath>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "cfield/config_io.hpp"
#include "cfield/error.hpp"

namespace cfield {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* ext) {
    std::filesystem::path p = stem;
    p += ext;
    return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& stem, const FieldParams& params, const CheckpointInfo& info) {
    using nlohmann::ordered_json;
    const auto names = layer_names(params.config());
    ordered_json layers = ordered_json::array();
    for (std::size_t i = 0; i < params.layers().size(); ++i) {
        const DenseLayer& l = params.layers()[i];
        layers.push_back({{"name", names[i]}, {"rows", l.weight.rows()}, {"cols", l.weight.cols()}});
    }
    ordered_json head;
    head["format_version"] = kCheckpointFormatVersion;
    head["dtype"] = "float32_le";
    head["layout"] = "per layer: weight row-major (rows x cols), then bias (rows)";
    head["parameter_count"] = params.parameter_count();
    head["field"] = ordered_json::parse(to_json(params.config()));
    head["layers"] = layers;
    head["width"] = info.width;
    head["height"] = info.height;
    head["near"] = info.bounds.near;
    head["far"] = info.bounds.far;
    head["samples_per_ray"] = info.samples_per_ray;
    if (info.background) {
        head["background"] = {(*info.background)[0], (*info.background)[1], (*info.background)[2]};
    }

    const Eigen::VectorXd flat = params.flatten();
    std::vector<float> values(static_cast<std::size_t>(flat.size()));
    for (Eigen::Index i = 0; i < flat.size(); ++i) values[static_cast<std::size_t>(i)] = static_cast<float>(flat[i]);

    const auto json_path = with_suffix(stem, ".json");
    const auto bin_path = with_suffix(stem, ".bin");
    {
        std::ofstream f(json_path, std::ios::binary);
        if (!f) throw IoError("cannot write " + json_path.string());
        f << head.dump(2) << "\n";
    }
    std::ofstream f(bin_path, std::ios::binary);
    if (!f) throw IoError("cannot write " + bin_path.string());
    f.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (!f) throw IoError("failed writing " + bin_path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& stem) {
    const auto json_path = with_suffix(stem, ".json");
    const auto bin_path = with_suffix(stem, ".bin");
    std::ifstream jf(json_path);
    if (!jf) throw IoError("cannot open checkpoint header " + json_path.string());
    nlohmann::json head;
    try {
        head = nlohmann::json::parse(jf);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed checkpoint header " + json_path.string() + ": " + e.what());
    }
    Checkpoint ck;
    FieldConfig config;
    try {
        if (head.at("format_version").get<int>() != kCheckpointFormatVersion) {
            throw IoError("unsupported checkpoint format_version in " + json_path.string());
        }
        config = field_config_from_json(head.at("field").dump());
        ck.info.width = head.at("width").get<int>();
        ck.info.height = head.at("height").get<int>();
        ck.info.bounds.near = head.at("near").get<double>();
        ck.info.bounds.far = head.at("far").get<double>();
        ck.info.samples_per_ray = head.at("samples_per_ray").get<int>();
        if (head.contains("background")) {
            const auto& b = head["background"];
            ck.info.background = Vec3(b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("checkpoint header " + json_path.string() + ": " + e.what());
    }
    config.validate();
    ck.params = FieldParams(config);
    const std::size_t expected = ck.params.parameter_count();
    if (head.at("parameter_count").get<std::size_t>() != expected) {
        throw IoError("checkpoint header " + json_path.string() + " disagrees with its field config");
    }

    std::ifstream bf(bin_path, std::ios::binary);
    if (!bf) throw IoError("cannot open checkpoint data " + bin_path.string());
    const std::vector<char> bytes((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());
    if (bytes.size() != expected * sizeof(float)) {
        throw IoError("checkpoint data " + bin_path.string() + " has " + std::to_string(bytes.size()) +
                      " bytes, expected " + std::to_string(expected * sizeof(float)));
    }
    std::vector<float> values(expected);
    std::memcpy(values.data(), bytes.data(), bytes.size());
    Eigen::VectorXd flat(static_cast<Eigen::Index>(expected));
    for (std::size_t i = 0; i < expected; ++i) flat[static_cast<Eigen::Index>(i)] = values[i];
    if (!flat.allFinite()) throw IoError("checkpoint data " + bin_path.string() + " holds non-finite values");
    ck.params.assign(flat);
    return ck;
}

}  // namespace cfield
