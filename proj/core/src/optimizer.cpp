#include "cfield/optimizer.hpp"

#include <cmath>

#include "cfield/error.hpp"

namespace cfield {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

Optimizer::Optimizer(OptimizerConfig config, Eigen::Index size)
    : config_(config), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {
    if (config.kind == OptimizerKind::adam &&
        !(config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 && config.beta2 < 1.0 && config.epsilon > 0.0)) {
        throw ConfigError("adam: require 0 <= beta1, beta2 < 1 and epsilon > 0");
    }
}

void Optimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw DomainError("optimizer: parameter/gradient size mismatch");
    }
    ++steps_;
    if (config_.kind == OptimizerKind::sgd) {
        params -= lr * grad;
        return;
    }
    m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
    v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.epsilon);
}

}  // namespace cfield
