#include "cfield/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cfield/error.hpp"
#include "cfield/image_io.hpp"

namespace cfield {

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw ConfigError("unknown split '" + s + "' (expected train or test)");
}

std::vector<const PosedFrame*> Dataset::split(Split which) const {
    std::vector<const PosedFrame*> out;
    for (const auto& f : frames) {
        if (f.split == which) {
            out.push_back(&f);
        }
    }
    return out;
}

int Dataset::width() const { return frames.empty() ? 0 : frames.front().camera.width(); }
int Dataset::height() const { return frames.empty() ? 0 : frames.front().camera.height(); }

namespace {

using nlohmann::ordered_json;

template <typename T>
T field(const ordered_json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) {
        throw IoError(where + ": missing field '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(where + ": field '" + key + "' has the wrong type (" + e.what() + ")");
    }
}

Vec3 vec3_from(const ordered_json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) {
        throw IoError(where + ": expected a 3-element array");
    }
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

DepthMap load_depth(const std::filesystem::path& path, int w, int h) {
    if (!std::filesystem::exists(path)) {
        throw IoError("dataset: depth file '" + path.string() + "' does not exist");
    }
    DepthMap d = read_depth_pfm(path);
    if (d.width() != w || d.height() != h) {
        throw IoError("dataset: depth file '" + path.string() + "' is " + std::to_string(d.width()) + "x" +
                      std::to_string(d.height()) + ", expected " + std::to_string(w) + "x" + std::to_string(h));
    }
    return d;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir) {
    const auto json_path = dir / "dataset.json";
    std::ifstream in(json_path);
    if (!in) {
        throw IoError("dataset: cannot open '" + json_path.string() + "'");
    }
    ordered_json root;
    try {
        root = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError("dataset: malformed JSON in '" + json_path.string() + "': " + e.what());
    }
    const std::string where = json_path.string();
    Intrinsics k;
    k.width = field<int>(root, "width", where);
    k.height = field<int>(root, "height", where);
    if (!root.contains("intrinsics")) {
        throw IoError(where + ": missing field 'intrinsics'");
    }
    const auto& kj = root["intrinsics"];
    k.fx = field<double>(kj, "fx", where + " intrinsics");
    k.fy = field<double>(kj, "fy", where + " intrinsics");
    k.cx = field<double>(kj, "cx", where + " intrinsics");
    k.cy = field<double>(kj, "cy", where + " intrinsics");
    try {
        k.validate();
    } catch (const DomainError& e) {
        throw IoError(where + ": " + e.what());
    }

    Dataset ds;
    ds.bounds.near = root.value("near", ds.bounds.near);
    ds.bounds.far = root.value("far", ds.bounds.far);
    try {
        ds.bounds.validate();
    } catch (const DomainError& e) {
        throw IoError(where + ": " + e.what());
    }
    if (root.contains("background")) {
        ds.background = vec3_from(root["background"], where + " background");
    }
    if (!root.contains("frames") || !root["frames"].is_array()) {
        throw IoError(where + ": missing 'frames' array");
    }
    int index = 0;
    for (const auto& fj : root["frames"]) {
        const std::string fwhere = where + " frame " + std::to_string(index++);
        PosedFrame frame;
        frame.name = fj.value("name", "frame_" + std::to_string(index - 1));
        const auto image_path = dir / field<std::string>(fj, "image", fwhere);
        if (!std::filesystem::exists(image_path)) {
            throw IoError("dataset: image file '" + image_path.string() + "' does not exist");
        }
        frame.image = read_png(image_path);
        if (frame.image.width() != k.width || frame.image.height() != k.height) {
            throw IoError("dataset: image '" + image_path.string() + "' is " + std::to_string(frame.image.width()) +
                          "x" + std::to_string(frame.image.height()) + ", expected " + std::to_string(k.width) + "x" +
                          std::to_string(k.height));
        }
        if (fj.contains("depth") && !fj["depth"].is_null()) {
            frame.depth = load_depth(dir / fj["depth"].get<std::string>(), k.width, k.height);
        }
        if (fj.contains("oracle_depth") && !fj["oracle_depth"].is_null()) {
            frame.oracle_depth = load_depth(dir / fj["oracle_depth"].get<std::string>(), k.width, k.height);
        }
        const auto m = field<std::vector<double>>(fj, "camera_to_world", fwhere);
        if (m.size() != 16) {
            throw IoError(fwhere + ": camera_to_world must have 16 entries");
        }
        Mat4 c2w;
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                c2w(r, c) = m[static_cast<std::size_t>(4 * r + c)];
            }
        }
        try {
            frame.camera = Camera{k, Pose(c2w)};
            frame.split = parse_split(field<std::string>(fj, "split", fwhere));
        } catch (const std::invalid_argument& e) {
            throw IoError(fwhere + ": " + e.what());
        }
        ds.frames.push_back(std::move(frame));
    }
    return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
    if (dataset.frames.empty()) {
        throw DomainError("save_dataset: no frames");
    }
    std::filesystem::create_directories(dir);
    const Intrinsics& k = dataset.frames.front().camera.intrinsics;
    ordered_json root;
    root["width"] = k.width;
    root["height"] = k.height;
    root["intrinsics"] = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}};
    root["near"] = dataset.bounds.near;
    root["far"] = dataset.bounds.far;
    if (dataset.background) {
        root["background"] = {(*dataset.background)[0], (*dataset.background)[1], (*dataset.background)[2]};
    }
    root["frames"] = ordered_json::array();
    for (const auto& f : dataset.frames) {
        if (!(f.camera.intrinsics == k)) {
            throw DomainError("save_dataset: all frames must share intrinsics");
        }
        ordered_json fj;
        fj["name"] = f.name;
        fj["image"] = f.name + ".png";
        write_png(dir / (f.name + ".png"), f.image);
        if (f.depth) {
            fj["depth"] = f.name + "_depth.pfm";
            write_depth_pfm(dir / (f.name + "_depth.pfm"), *f.depth);
        }
        if (f.oracle_depth) {
            fj["oracle_depth"] = f.name + "_oracle_depth.pfm";
            write_depth_pfm(dir / (f.name + "_oracle_depth.pfm"), *f.oracle_depth);
        }
        std::vector<double> m;
        const Mat4& c2w = f.camera.pose.camera_to_world();
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                m.push_back(c2w(r, c));
            }
        }
        fj["camera_to_world"] = m;
        fj["split"] = to_string(f.split);
        root["frames"].push_back(fj);
    }
    std::ofstream out(dir / "dataset.json");
    if (!out) {
        throw IoError("save_dataset: cannot write '" + (dir / "dataset.json").string() + "'");
    }
    out << root.dump(2) << '\n';
}

}  // namespace cfield
