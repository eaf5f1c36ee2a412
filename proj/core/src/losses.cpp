#include "cfield/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <json.hpp>

#include "cfield/error.hpp"

namespace cfield {

void LossWeights::validate() const {
    if (!(lambda_offmask >= 0.0 && lambda_offmask <= 1.0)) {
        throw DomainError("loss weights: lambda must lie in [0, 1]");
    }
    if (!(beta_depth >= 0.0) || !std::isfinite(beta_depth)) {
        throw DomainError("loss weights: beta_depth must be nonnegative");
    }
    if (patch_size < 2) {
        throw DomainError("loss weights: patch_size must be at least 2");
    }
}

ColorLoss photometric_loss(std::span<const Vec3> predicted, std::span<const Vec3> target) {
    if (predicted.size() != target.size() || predicted.empty()) {
        throw DomainError("photometric_loss: predicted and target must be equally sized and non-empty");
    }
    const double inv = 1.0 / static_cast<double>(predicted.size());
    ColorLoss out;
    out.gradient.resize(predicted.size());
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const Vec3 r = predicted[i] - target[i];
        out.value += r.squaredNorm();
        out.gradient[i] = 2.0 * inv * r;
    }
    out.value *= inv;
    return out;
}

MaskedColorLoss masked_photometric_loss(std::span<const Vec3> predicted, std::span<const Vec3> target,
                                        std::span<const std::uint8_t> in_mask, const LossWeights& weights) {
    if (predicted.size() != target.size() || predicted.size() != in_mask.size() || predicted.empty()) {
        throw DomainError("masked_photometric_loss: inputs must be equally sized and non-empty");
    }
    weights.validate();
    const auto in_count = static_cast<std::size_t>(std::count_if(in_mask.begin(), in_mask.end(), [](std::uint8_t m) { return m != 0; }));
    const std::size_t off_count = predicted.size() - in_count;
    const double in_scale = in_count > 0 ? 1.0 / static_cast<double>(in_count) : 0.0;
    const double off_scale = off_count > 0 ? weights.lambda_offmask / static_cast<double>(off_count) : 0.0;

    MaskedColorLoss out;
    out.in_mask_count = in_count;
    out.gradient.resize(predicted.size());
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const Vec3 r = predicted[i] - target[i];
        const double scale = in_mask[i] != 0 ? in_scale : off_scale;
        if (in_mask[i] != 0) {
            out.in_mask_term += in_scale * r.squaredNorm();
        } else {
            out.off_mask_term += off_scale * r.squaredNorm();
        }
        out.gradient[i] = 2.0 * scale * r;
    }
    out.value = out.in_mask_term + out.off_mask_term;
    return out;
}

DepthLoss scale_invariant_depth_loss(std::span<const double> predicted, std::span<const double> reference) {
    if (predicted.size() != reference.size() || predicted.empty()) {
        throw DomainError("scale_invariant_depth_loss: patches must be equally sized and non-empty");
    }
    const std::size_t n = predicted.size();
    std::vector<double> diff(n);
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (!(predicted[k] > 0.0) || !(reference[k] > 0.0) || !std::isfinite(predicted[k]) ||
            !std::isfinite(reference[k])) {
            throw DomainError("scale_invariant_depth_loss: depths must be positive and finite");
        }
        diff[k] = std::log(predicted[k]) - std::log(reference[k]);
        mean += diff[k];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    mean *= inv_n;

    DepthLoss out;
    std::vector<double> residual(n);
    for (std::size_t k = 0; k < n; ++k) {
        residual[k] = diff[k] - mean;
        out.value += residual[k] * residual[k];
    }
    out.value *= 0.5 * inv_n;

    // Reverse pass: dD/dresidual_k = residual_k / N; residual_k depends on
    // diff_k directly and on every diff_j through the mean.
    double residual_grad_sum = 0.0;
    std::vector<double> residual_grad(n);
    for (std::size_t k = 0; k < n; ++k) {
        residual_grad[k] = residual[k] * inv_n;
        residual_grad_sum += residual_grad[k];
    }
    out.gradient.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double diff_grad = residual_grad[k] - residual_grad_sum * inv_n;
        out.gradient[k] = diff_grad / predicted[k];
    }
    return out;
}

void PropositionCheckConfig::validate() const {
    if (!(epsilon_c > 0.0) || !(epsilon_s > 0.0)) {
        throw DomainError("proposition check: thresholds must be positive");
    }
    if (trials < 0) {
        throw DomainError("proposition check: trials must be nonnegative");
    }
}

std::string BoundCheckReport::to_json() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["epsilon"] = epsilon;
    j["trials"] = trials;
    j["violations"] = violations;
    j["worst_margin"] = trials > 0 ? nlohmann::ordered_json(worst_margin) : nlohmann::ordered_json(nullptr);
    j["passed"] = passed();
    return j.dump(2);
}

double appearance_bound_margin(const Vec3& pred_a, const Vec3& pred_b, const Vec3& label_a, const Vec3& label_b,
                               double epsilon_c) {
    const double lhs = (pred_a - label_a).squaredNorm() + (pred_b - label_b).squaredNorm();
    const double rhs = 0.25 * (pred_a - pred_b).squaredNorm() - 0.5 * epsilon_c;
    return lhs - rhs;
}

double geometry_bound_margin(double pred_a, double pred_b, double label_a, double label_b, double epsilon_s) {
    const double lhs = (pred_a - label_a) * (pred_a - label_a) + (pred_b - label_b) * (pred_b - label_b);
    const double rhs = 0.25 * (pred_a - pred_b) * (pred_a - pred_b) - 0.5 * epsilon_s;
    return lhs - rhs;
}

namespace {

void record(BoundCheckReport& report, double margin) {
    report.worst_margin = report.trials == 0 ? margin : std::min(report.worst_margin, margin);
    if (margin < -kBoundSlack) {
        ++report.violations;
    }
    ++report.trials;
}

}  // namespace

BoundCheckReport check_appearance_bound(const PropositionCheckConfig& config, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double radius = std::sqrt(config.epsilon_c);
    std::uniform_real_distribution<double> offset(-radius, radius);
    auto random_color = [&] { return Vec3(unit(rng), unit(rng), unit(rng)); };

    BoundCheckReport report;
    report.name = "appearance";
    report.epsilon = config.epsilon_c;
    while (report.trials < config.trials) {
        const Vec3 label_a = random_color();
        const Vec3 label_b = label_a + Vec3(offset(rng), offset(rng), offset(rng));
        if ((label_b - label_a).squaredNorm() > config.epsilon_c || label_b.minCoeff() < 0.0 || label_b.maxCoeff() > 1.0) {
            continue;
        }
        record(report, appearance_bound_margin(random_color(), random_color(), label_a, label_b, config.epsilon_c));
    }
    return report;
}

BoundCheckReport check_geometry_bound(const PropositionCheckConfig& config, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> depth(0.5, 8.0);
    const double radius = std::sqrt(config.epsilon_s);
    std::uniform_real_distribution<double> offset(-radius, radius);

    BoundCheckReport report;
    report.name = "geometry";
    report.epsilon = config.epsilon_s;
    while (report.trials < config.trials) {
        const double label_a = depth(rng);
        const double label_b = label_a + offset(rng);
        if (!(label_b > 0.0)) {
            continue;
        }
        record(report, geometry_bound_margin(depth(rng), depth(rng), label_a, label_b, config.epsilon_s));
    }
    return report;
}

}  // namespace cfield
