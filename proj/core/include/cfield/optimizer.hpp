#pragma once

#include <string>

#include <Eigen/Core>

namespace cfield {

enum class OptimizerKind { sgd, adam };

std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& s);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// First-order optimizer over a flat parameter vector.
class Optimizer {
public:
    Optimizer(OptimizerConfig config, Eigen::Index size);

    // params -= step(grad) with learning rate `lr`.
    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);

    long steps() const { return steps_; }

private:
    OptimizerConfig config_;
    Eigen::VectorXd m_;
    Eigen::VectorXd v_;
    long steps_ = 0;
};

}  // namespace cfield
