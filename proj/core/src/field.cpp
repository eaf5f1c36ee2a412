#include "cfield/field.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "cfield/error.hpp"

namespace cfield {

std::string to_string(DensityActivation a) { return a == DensityActivation::relu ? "relu" : "softplus"; }
std::string to_string(BiasInit b) { return b == BiasInit::zeros ? "zeros" : "uniform01"; }

DensityActivation parse_density_activation(const std::string& s) {
    if (s == "relu") return DensityActivation::relu;
    if (s == "softplus") return DensityActivation::softplus;
    throw ConfigError("unknown density activation '" + s + "' (expected relu or softplus)");
}

BiasInit parse_bias_init(const std::string& s) {
    if (s == "zeros") return BiasInit::zeros;
    if (s == "uniform01") return BiasInit::uniform01;
    throw ConfigError("unknown bias init '" + s + "' (expected zeros or uniform01)");
}

std::string to_string(Precision p) { return p == Precision::float32 ? "float32" : "float64"; }

Precision parse_precision(const std::string& s) {
    if (s == "float32") return Precision::float32;
    if (s == "float64") return Precision::float64;
    throw ConfigError("unknown precision '" + s + "' (expected float32 or float64)");
}

void FieldConfig::validate() const {
    if (hidden_layers < 1 || hidden_width < 1 || color_width < 1) {
        throw DomainError("field config: layer counts and widths must be at least 1");
    }
    encoding.validate();
    if (skip_connection_layer && (*skip_connection_layer < 1 || *skip_connection_layer >= hidden_layers)) {
        throw DomainError("field config: skip connection layer must be in [1, hidden_layers)");
    }
    if (!(position_scale > 0.0) || !std::isfinite(position_scale)) {
        throw DomainError("field config: position_scale must be positive");
    }
}

int FieldConfig::position_features() const {
    return encoded_size(encoding.position_frequencies, encoding.include_input);
}

int FieldConfig::direction_features() const {
    return encoded_size(encoding.direction_frequencies, encoding.include_input);
}

std::vector<std::string> layer_names(const FieldConfig& config) {
    std::vector<std::string> names;
    for (int k = 0; k < config.hidden_layers; ++k) {
        names.push_back("trunk_" + std::to_string(k));
    }
    names.insert(names.end(), {"density", "feature", "color", "rgb"});
    return names;
}

namespace {

struct LayerShape {
    int out;
    int in;
};

std::vector<LayerShape> layer_shapes(const FieldConfig& c) {
    std::vector<LayerShape> shapes;
    const int ex = c.position_features();
    const int w = c.hidden_width;
    for (int k = 0; k < c.hidden_layers; ++k) {
        int in = k == 0 ? ex : w;
        if (k > 0 && c.skip_connection_layer == k) {
            in += ex;
        }
        shapes.push_back({w, in});
    }
    shapes.push_back({1, w});
    shapes.push_back({w, w});
    shapes.push_back({c.color_width, w + c.direction_features()});
    shapes.push_back({3, c.color_width});
    return shapes;
}

std::vector<DenseLayer> zero_layers(const FieldConfig& c) {
    std::vector<DenseLayer> layers;
    for (const auto& s : layer_shapes(c)) {
        layers.push_back({Eigen::MatrixXd::Zero(s.out, s.in), Eigen::VectorXd::Zero(s.out)});
    }
    return layers;
}

}  // namespace

void FieldGradients::set_zero() {
    for (auto& l : layers) {
        l.weight.setZero();
        l.bias.setZero();
    }
}

FieldGradients& FieldGradients::operator+=(const FieldGradients& other) {
    if (other.layers.size() != layers.size()) {
        throw DomainError("gradients: layer count mismatch");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        layers[i].weight += other.layers[i].weight;
        layers[i].bias += other.layers[i].bias;
    }
    return *this;
}

namespace {

Eigen::VectorXd flatten_layers(const std::vector<DenseLayer>& layers) {
    Eigen::Index n = 0;
    for (const auto& l : layers) {
        n += l.weight.size() + l.bias.size();
    }
    Eigen::VectorXd flat(n);
    Eigen::Index i = 0;
    for (const auto& l : layers) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
                flat[i++] = l.weight(r, c);
            }
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
            flat[i++] = l.bias[r];
        }
    }
    return flat;
}

}  // namespace

Eigen::VectorXd FieldGradients::flatten() const { return flatten_layers(layers); }

FieldParams::FieldParams(const FieldConfig& config) : config_(config) {
    config_.validate();
    layers_ = zero_layers(config_);
    gradients_.layers = zero_layers(config_);
}

FieldGradients FieldParams::make_gradients() const {
    FieldGradients g;
    g.layers = zero_layers(config_);
    return g;
}

std::size_t FieldParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) {
        n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    }
    return n;
}

Eigen::VectorXd FieldParams::flatten() const { return flatten_layers(layers_); }

void FieldParams::assign(const Eigen::VectorXd& flat) {
    if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
        throw DomainError("FieldParams::assign: expected " + std::to_string(parameter_count()) + " values, got " +
                          std::to_string(flat.size()));
    }
    Eigen::Index i = 0;
    for (auto& l : layers_) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
                l.weight(r, c) = flat[i++];
            }
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
            l.bias[r] = flat[i++];
        }
    }
}

bool FieldParams::all_finite() const {
    for (const auto& l : layers_) {
        if (!l.weight.allFinite() || !l.bias.allFinite()) {
            return false;
        }
    }
    return true;
}

FieldParams init_params(const FieldConfig& config, std::uint64_t seed) {
    FieldParams params(config);
    std::mt19937_64 rng(seed);
    const double tiny = std::nextafter(0.0, 1.0);
    std::uniform_real_distribution<double> bias_dist(tiny, 1.0);
    for (auto& l : params.layers()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.weight.cols()));
        std::uniform_real_distribution<double> weight_dist(-bound, bound);
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
                l.weight(r, c) = weight_dist(rng);
            }
        }
        if (config.bias_init == BiasInit::uniform01) {
            for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
                l.bias[r] = bias_dist(rng);
            }
        }
    }
    return params;
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

namespace {

template <typename Scalar>
Scalar softplus_t(Scalar x) {
    return x > Scalar(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar sigmoid_t(Scalar x) {
    if (x >= Scalar(0)) {
        return Scalar(1) / (Scalar(1) + std::exp(-x));
    }
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

template <typename Derived>
void relu_inplace(Eigen::MatrixBase<Derived>& m) {
    m = m.cwiseMax(typename Derived::Scalar(0));
}

// grads += update (cast to double).
template <typename Scalar>
void accumulate(Eigen::Ref<Eigen::MatrixXd> target, const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& update) {
    if constexpr (std::is_same_v<Scalar, double>) {
        target += update;
    } else {
        target += update.template cast<double>();
    }
}

}  // namespace

template <typename Scalar>
FieldNetwork<Scalar>::FieldNetwork(const FieldParams& params) : config_(params.config()) {
    if (params.layers().empty()) {
        throw StateError("FieldNetwork: parameters are not initialized");
    }
    if (!params.all_finite()) {
        throw StateError("FieldNetwork: parameters contain non-finite values");
    }
    layers_.reserve(params.layers().size());
    for (const auto& l : params.layers()) {
        layers_.push_back({l.weight.template cast<Scalar>(), l.bias.template cast<Scalar>()});
    }
}

template <typename Scalar>
void FieldNetwork<Scalar>::forward(const Points& positions, const Points& directions, FieldTape<Scalar>& tape,
                                   Matrix& density, Matrix& rgb) const {
    const Eigen::Index batch = positions.cols();
    if (directions.cols() != batch) {
        throw DomainError("FieldNetwork::forward: positions and directions differ in batch size");
    }
    const FieldConfig& c = config_;
    const int hidden = c.hidden_layers;
    const int width = c.hidden_width;
    tape.recorded = false;
    tape.batch = batch;

    const Points scaled = positions * static_cast<Scalar>(c.position_scale);
    encode_batch<Scalar>(scaled, c.encoding.position_frequencies, c.encoding.include_input, tape.encoded_position);
    encode_batch<Scalar>(directions, c.encoding.direction_frequencies, c.encoding.include_input,
                         tape.encoded_direction);

    tape.trunk.resize(static_cast<std::size_t>(hidden));
    for (int k = 0; k < hidden; ++k) {
        const Layer& l = layers_[static_cast<std::size_t>(k)];
        Matrix& out = tape.trunk[static_cast<std::size_t>(k)];
        if (k == 0) {
            out.noalias() = l.weight * tape.encoded_position;
        } else {
            const Matrix& prev = tape.trunk[static_cast<std::size_t>(k - 1)];
            out.noalias() = l.weight.leftCols(width) * prev;
            if (c.skip_connection_layer == k) {
                out.noalias() += l.weight.rightCols(l.weight.cols() - width) * tape.encoded_position;
            }
        }
        out.colwise() += l.bias;
        relu_inplace(out);
    }
    const Matrix& h = tape.trunk.back();

    const Layer& dens = layers_[static_cast<std::size_t>(hidden)];
    tape.density_pre.noalias() = dens.weight * h;
    tape.density_pre.colwise() += dens.bias;
    density.resize(1, batch);
    if (c.density_activation == DensityActivation::relu) {
        density = tape.density_pre.cwiseMax(Scalar(0));
    } else {
        density = tape.density_pre.unaryExpr([](Scalar x) { return softplus_t(x); });
    }

    const Layer& feat = layers_[static_cast<std::size_t>(hidden + 1)];
    tape.feature.noalias() = feat.weight * h;
    tape.feature.colwise() += feat.bias;

    const Layer& col = layers_[static_cast<std::size_t>(hidden + 2)];
    tape.color_hidden.noalias() = col.weight.leftCols(width) * tape.feature;
    tape.color_hidden.noalias() += col.weight.rightCols(col.weight.cols() - width) * tape.encoded_direction;
    tape.color_hidden.colwise() += col.bias;
    relu_inplace(tape.color_hidden);

    const Layer& out = layers_[static_cast<std::size_t>(hidden + 3)];
    tape.rgb.noalias() = out.weight * tape.color_hidden;
    tape.rgb.colwise() += out.bias;
    tape.rgb = tape.rgb.unaryExpr([](Scalar x) { return sigmoid_t(x); });
    rgb = tape.rgb;
    tape.recorded = true;
}

template <typename Scalar>
void FieldNetwork<Scalar>::backward(const FieldTape<Scalar>& tape, const Matrix& density_grad, const Matrix& rgb_grad,
                                    FieldGradients& grads) const {
    if (!tape.recorded) {
        throw StateError("FieldNetwork::backward: no forward pass recorded");
    }
    const Eigen::Index batch = tape.batch;
    if (density_grad.rows() != 1 || density_grad.cols() != batch || rgb_grad.rows() != 3 || rgb_grad.cols() != batch) {
        throw StateError("FieldNetwork::backward: upstream gradient shape does not match the recorded batch");
    }
    if (grads.layers.size() != layers_.size()) {
        throw DomainError("FieldNetwork::backward: gradient buffer has the wrong layer count");
    }
    const FieldConfig& c = config_;
    const int hidden = c.hidden_layers;
    const int width = c.hidden_width;
    const Matrix& h = tape.trunk.back();
    const auto layer_grad = [&](int i) -> DenseLayer& { return grads.layers[static_cast<std::size_t>(i)]; };
    const auto layer = [&](int i) -> const Layer& { return layers_[static_cast<std::size_t>(i)]; };

    // rgb = sigmoid(z)
    Matrix dz = rgb_grad.cwiseProduct(tape.rgb.cwiseProduct((Matrix::Ones(3, batch) - tape.rgb)));
    accumulate<Scalar>(layer_grad(hidden + 3).weight, dz * tape.color_hidden.transpose());
    layer_grad(hidden + 3).bias += dz.rowwise().sum().template cast<double>();

    Matrix dcolor = layer(hidden + 3).weight.transpose() * dz;
    dcolor = dcolor.cwiseProduct((tape.color_hidden.array() > Scalar(0)).template cast<Scalar>().matrix());
    {
        Matrix gw(layer(hidden + 2).weight.rows(), layer(hidden + 2).weight.cols());
        gw.leftCols(width).noalias() = dcolor * tape.feature.transpose();
        gw.rightCols(gw.cols() - width).noalias() = dcolor * tape.encoded_direction.transpose();
        accumulate<Scalar>(layer_grad(hidden + 2).weight, gw);
        layer_grad(hidden + 2).bias += dcolor.rowwise().sum().template cast<double>();
    }
    const Matrix dfeature = layer(hidden + 2).weight.leftCols(width).transpose() * dcolor;

    accumulate<Scalar>(layer_grad(hidden + 1).weight, dfeature * h.transpose());
    layer_grad(hidden + 1).bias += dfeature.rowwise().sum().template cast<double>();
    Matrix dh = layer(hidden + 1).weight.transpose() * dfeature;

    Matrix ddensity(1, batch);
    if (c.density_activation == DensityActivation::relu) {
        ddensity = density_grad.cwiseProduct((tape.density_pre.array() > Scalar(0)).template cast<Scalar>().matrix());
    } else {
        ddensity = density_grad.cwiseProduct(tape.density_pre.unaryExpr([](Scalar x) { return sigmoid_t(x); }));
    }
    accumulate<Scalar>(layer_grad(hidden).weight, ddensity * h.transpose());
    layer_grad(hidden).bias += ddensity.rowwise().sum().template cast<double>();
    dh.noalias() += layer(hidden).weight.transpose() * ddensity;

    for (int k = hidden - 1; k >= 0; --k) {
        const Matrix& out = tape.trunk[static_cast<std::size_t>(k)];
        dh = dh.cwiseProduct((out.array() > Scalar(0)).template cast<Scalar>().matrix());
        DenseLayer& g = layer_grad(k);
        g.bias += dh.rowwise().sum().template cast<double>();
        if (k == 0) {
            accumulate<Scalar>(g.weight, dh * tape.encoded_position.transpose());
            break;
        }
        const Matrix& prev = tape.trunk[static_cast<std::size_t>(k - 1)];
        const Layer& l = layer(k);
        if (c.skip_connection_layer == k) {
            Matrix gw(l.weight.rows(), l.weight.cols());
            gw.leftCols(width).noalias() = dh * prev.transpose();
            gw.rightCols(gw.cols() - width).noalias() = dh * tape.encoded_position.transpose();
            accumulate<Scalar>(g.weight, gw);
        } else {
            accumulate<Scalar>(g.weight, dh * prev.transpose());
        }
        Matrix next = l.weight.leftCols(width).transpose() * dh;
        dh.swap(next);
    }
}

template class FieldNetwork<float>;
template class FieldNetwork<double>;

FieldSample evaluate(const FieldParams& params, const Vec3& x, const Vec3& d) {
    const FieldNetwork<double> net(params);
    FieldTape<double> tape;
    Eigen::MatrixXd density;
    Eigen::MatrixXd rgb;
    net.forward(x, d, tape, density, rgb);
    return {density(0, 0), rgb.col(0)};
}

void backward(FieldParams& params, const FieldTape<double>& tape, const Eigen::MatrixXd& density_grad,
              const Eigen::MatrixXd& rgb_grad) {
    const FieldNetwork<double> net(params);
    net.backward(tape, density_grad, rgb_grad, params.gradients());
}

}  // namespace cfield
