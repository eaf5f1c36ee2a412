#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cfield/encoding.hpp"
#include "cfield/grid.hpp"

namespace cfield {

enum class DensityActivation { relu, softplus };
enum class BiasInit { zeros, uniform01 };
// Arithmetic used for batched network evaluation. Parameters, gradients and
// compositing are always double.
enum class Precision { float32, float64 };

std::string to_string(DensityActivation a);
std::string to_string(BiasInit b);
DensityActivation parse_density_activation(const std::string& s);
BiasInit parse_bias_init(const std::string& s);
std::string to_string(Precision p);
Precision parse_precision(const std::string& s);

// NeRF-style layout: `hidden_layers` relu layers of `hidden_width` on the
// encoded position (the encoded position is re-fed at the skip layer), a
// density head, a linear feature layer, then one relu layer of
// `color_width` on [feature, encoded direction] and a sigmoid RGB head.
struct FieldConfig {
    int hidden_layers = 4;
    int hidden_width = 128;
    int color_width = 64;
    DensityActivation density_activation = DensityActivation::relu;
    BiasInit bias_init = BiasInit::uniform01;
    EncodingConfig encoding;
    std::optional<int> skip_connection_layer = 2;
    // World positions are multiplied by this before encoding.
    double position_scale = 1.0;

    void validate() const;
    int position_features() const;
    int direction_features() const;
    bool operator==(const FieldConfig&) const = default;
};

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
};

// Layer order: trunk_0 .. trunk_{H-1}, density, feature, color, rgb.
std::vector<std::string> layer_names(const FieldConfig& config);

struct FieldGradients {
    std::vector<DenseLayer> layers;

    void set_zero();
    FieldGradients& operator+=(const FieldGradients& other);
    // Same order as FieldParams::flatten().
    Eigen::VectorXd flatten() const;
};

class FieldParams {
public:
    FieldParams() = default;
    // All weights and biases zero.
    explicit FieldParams(const FieldConfig& config);

    const FieldConfig& config() const { return config_; }
    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }
    FieldGradients& gradients() { return gradients_; }
    const FieldGradients& gradients() const { return gradients_; }

    // A zero gradient buffer shaped like this parameter set.
    FieldGradients make_gradients() const;
    void zero_gradients() { gradients_.set_zero(); }

    std::size_t parameter_count() const;
    // Per layer: weight in row-major order, then bias.
    Eigen::VectorXd flatten() const;
    void assign(const Eigen::VectorXd& flat);
    bool all_finite() const;

private:
    FieldConfig config_;
    std::vector<DenseLayer> layers_;
    FieldGradients gradients_;
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero or U(0, 1)
// depending on config.bias_init.
FieldParams init_params(const FieldConfig& config, std::uint64_t seed);

struct FieldSample {
    double density = 0.0;
    Vec3 color = Vec3::Zero();
};

// Intermediate activations recorded by a forward pass; consumed by backward.
template <typename Scalar>
struct FieldTape {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    bool recorded = false;
    Eigen::Index batch = 0;
    Matrix encoded_position;
    Matrix encoded_direction;
    std::vector<Matrix> trunk;  // post-relu outputs
    Matrix density_pre;         // 1 x B
    Matrix feature;
    Matrix color_hidden;  // post-relu
    Matrix rgb;           // post-sigmoid
};

// A snapshot of FieldParams converted to Scalar for batched evaluation.
template <typename Scalar>
class FieldNetwork {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Points = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

    // Throws StateError if any parameter is non-finite.
    explicit FieldNetwork(const FieldParams& params);

    const FieldConfig& config() const { return config_; }

    // positions, directions: 3 x B. Writes density (1 x B) and rgb (3 x B).
    void forward(const Points& positions, const Points& directions, FieldTape<Scalar>& tape, Matrix& density,
                 Matrix& rgb) const;

    // Adds d(loss)/d(theta) for upstream d(loss)/d(density) and d(loss)/d(rgb)
    // into `grads`. Throws StateError if `tape` holds no forward pass or
    // the shapes disagree.
    void backward(const FieldTape<Scalar>& tape, const Matrix& density_grad, const Matrix& rgb_grad,
                  FieldGradients& grads) const;

private:
    struct Layer {
        Matrix weight;
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bias;
    };

    FieldConfig config_;
    std::vector<Layer> layers_;
};

extern template class FieldNetwork<float>;
extern template class FieldNetwork<double>;

// Single-point forward pass in double precision.
FieldSample evaluate(const FieldParams& params, const Vec3& x, const Vec3& d);

// Accumulates into params.gradients().
void backward(FieldParams& params, const FieldTape<double>& tape, const Eigen::MatrixXd& density_grad,
              const Eigen::MatrixXd& rgb_grad);

double softplus(double x);

}  // namespace cfield
