#include "cfield/config_io.hpp"

#include <set>

#include <json.hpp>

#include "cfield/error.hpp"

namespace cfield {
namespace {

using nlohmann::ordered_json;

ordered_json field_json(const FieldConfig& c) {
    ordered_json j;
    j["hidden_layers"] = c.hidden_layers;
    j["hidden_width"] = c.hidden_width;
    j["color_width"] = c.color_width;
    j["density_activation"] = to_string(c.density_activation);
    j["bias_init"] = to_string(c.bias_init);
    j["position_frequencies"] = c.encoding.position_frequencies;
    j["direction_frequencies"] = c.encoding.direction_frequencies;
    j["include_input"] = c.encoding.include_input;
    j["skip_connection_layer"] = c.skip_connection_layer ? ordered_json(*c.skip_connection_layer) : ordered_json(nullptr);
    j["position_scale"] = c.position_scale;
    return j;
}

template <typename T>
void read(const ordered_json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config key '") + key + "': " + e.what());
        }
    }
}

void reject_unknown(const ordered_json& j, const std::set<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.contains(it.key())) {
            throw ConfigError("unknown " + where + " config key '" + it.key() + "'");
        }
    }
}

FieldConfig apply_field(const ordered_json& j, FieldConfig c) {
    if (!j.is_object()) {
        throw ConfigError("field config must be a JSON object");
    }
    reject_unknown(j,
                   {"hidden_layers", "hidden_width", "color_width", "density_activation", "bias_init",
                    "position_frequencies", "direction_frequencies", "include_input", "skip_connection_layer",
                    "position_scale"},
                   "field");
    read(j, "hidden_layers", c.hidden_layers);
    read(j, "hidden_width", c.hidden_width);
    read(j, "color_width", c.color_width);
    std::string s;
    if (j.contains("density_activation")) {
        read(j, "density_activation", s);
        c.density_activation = parse_density_activation(s);
    }
    if (j.contains("bias_init")) {
        read(j, "bias_init", s);
        c.bias_init = parse_bias_init(s);
    }
    read(j, "position_frequencies", c.encoding.position_frequencies);
    read(j, "direction_frequencies", c.encoding.direction_frequencies);
    read(j, "include_input", c.encoding.include_input);
    if (j.contains("skip_connection_layer")) {
        if (j["skip_connection_layer"].is_null()) {
            c.skip_connection_layer.reset();
        } else {
            int k = 0;
            read(j, "skip_connection_layer", k);
            c.skip_connection_layer = k;
        }
    }
    read(j, "position_scale", c.position_scale);
    return c;
}

ordered_json parse(const std::string& text) {
    try {
        return ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("malformed config JSON: ") + e.what());
    }
}

}  // namespace

std::string to_json(const FieldConfig& config) { return field_json(config).dump(2); }

std::string to_json(const TrainConfig& c) {
    ordered_json j;
    j["iterations"] = c.iterations;
    j["rays_per_batch"] = c.rays_per_batch;
    j["patches_per_batch"] = c.patches_per_batch;
    j["learning_rate"] = c.learning_rate;
    j["lr_decay"] = c.lr_decay;
    j["optimizer"] = {{"kind", to_string(c.optimizer.kind)},
                      {"beta1", c.optimizer.beta1},
                      {"beta2", c.optimizer.beta2},
                      {"epsilon", c.optimizer.epsilon}};
    j["alpha"] = c.mask_config.alpha;
    j["portion"] = c.mask_config.portion;
    j["lambda"] = c.loss_weights.lambda_offmask;
    j["beta_depth"] = c.loss_weights.beta_depth;
    j["patch_size"] = c.loss_weights.patch_size;
    j["mode"] = to_string(c.mode);
    j["seed"] = c.seed;
    j["field"] = field_json(c.field);
    j["samples_per_ray"] = c.sampling.samples_per_ray;
    j["stratified"] = c.sampling.stratified;
    j["eval_samples_per_ray"] = c.eval_samples_per_ray;
    j["eval_every"] = c.eval_every;
    j["log_every"] = c.log_every;
    j["eval_max_frames"] = c.eval_max_frames;
    j["threads"] = c.threads;
    j["precision"] = to_string(c.precision);
    j["composite_background"] = c.composite_background;
    return j.dump(2);
}

FieldConfig field_config_from_json(const std::string& json, FieldConfig base) { return apply_field(parse(json), base); }

TrainConfig train_config_from_json(const std::string& json, TrainConfig c) {
    const ordered_json j = parse(json);
    if (!j.is_object()) {
        throw ConfigError("train config must be a JSON object");
    }
    reject_unknown(j,
                   {"iterations", "rays_per_batch", "patches_per_batch", "learning_rate", "lr_decay", "optimizer",
                    "alpha", "portion", "lambda", "beta_depth", "patch_size", "mode", "seed", "field",
                    "samples_per_ray", "stratified", "eval_samples_per_ray", "eval_every", "log_every",
                    "eval_max_frames", "threads", "precision", "composite_background"},
                   "train");
    read(j, "iterations", c.iterations);
    read(j, "rays_per_batch", c.rays_per_batch);
    read(j, "patches_per_batch", c.patches_per_batch);
    read(j, "learning_rate", c.learning_rate);
    read(j, "lr_decay", c.lr_decay);
    if (j.contains("optimizer")) {
        const auto& o = j["optimizer"];
        reject_unknown(o, {"kind", "beta1", "beta2", "epsilon"}, "optimizer");
        std::string kind;
        if (o.contains("kind")) {
            read(o, "kind", kind);
            c.optimizer.kind = parse_optimizer(kind);
        }
        read(o, "beta1", c.optimizer.beta1);
        read(o, "beta2", c.optimizer.beta2);
        read(o, "epsilon", c.optimizer.epsilon);
    }
    read(j, "alpha", c.mask_config.alpha);
    read(j, "portion", c.mask_config.portion);
    read(j, "lambda", c.loss_weights.lambda_offmask);
    read(j, "beta_depth", c.loss_weights.beta_depth);
    read(j, "patch_size", c.loss_weights.patch_size);
    if (j.contains("mode")) {
        std::string m;
        read(j, "mode", m);
        c.mode = parse_train_mode(m);
    }
    read(j, "seed", c.seed);
    if (j.contains("field")) {
        c.field = apply_field(j["field"], c.field);
    }
    read(j, "samples_per_ray", c.sampling.samples_per_ray);
    read(j, "stratified", c.sampling.stratified);
    read(j, "eval_samples_per_ray", c.eval_samples_per_ray);
    read(j, "eval_every", c.eval_every);
    read(j, "log_every", c.log_every);
    read(j, "eval_max_frames", c.eval_max_frames);
    read(j, "threads", c.threads);
    if (j.contains("precision")) {
        std::string p;
        read(j, "precision", p);
        c.precision = parse_precision(p);
    }
    read(j, "composite_background", c.composite_background);
    return c;
}

}  // namespace cfield
