#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cfield/grid.hpp"

namespace cfield {

struct LossWeights {
    // Weight of the off-mask photometric term.
    double lambda_offmask = 0.1;
    // Weight of the scale-invariant patch depth term.
    double beta_depth = 0.1;
    int patch_size = 8;

    void validate() const;
};

struct ColorLoss {
    double value = 0.0;
    std::vector<Vec3> gradient;  // d(value)/d(predicted[i])
};

// Mean over rays of ||pred - target||^2.
ColorLoss photometric_loss(std::span<const Vec3> predicted, std::span<const Vec3> target);

struct MaskedColorLoss {
    double value = 0.0;
    double in_mask_term = 0.0;   // mean squared error over in-mask rays
    double off_mask_term = 0.0;  // lambda * mean squared error over off-mask rays
    std::size_t in_mask_count = 0;
    std::vector<Vec3> gradient;
};

// In-mask mean squared error plus lambda times the off-mask mean squared
// error. Each group is normalized by its own size; an empty group adds 0.
MaskedColorLoss masked_photometric_loss(std::span<const Vec3> predicted, std::span<const Vec3> target,
                                        std::span<const std::uint8_t> in_mask, const LossWeights& weights);

struct DepthLoss {
    double value = 0.0;
    std::vector<double> gradient;  // d(value)/d(predicted[i])
};

// Scale-invariant log-depth error over one patch of N depths:
// (1 / 2N) sum_k (log p_k - log r_k + (1/N) sum_j (log r_j - log p_j))^2.
// Throws DomainError on nonpositive depths or mismatched sizes.
DepthLoss scale_invariant_depth_loss(std::span<const double> predicted, std::span<const double> reference);

struct PropositionCheckConfig {
    double epsilon_c = 0.05;
    double epsilon_s = 0.05;
    int trials = 100000;

    void validate() const;
};

struct BoundCheckReport {
    std::string name;
    int trials = 0;
    int violations = 0;
    // min over trials of (lhs - rhs); nonnegative when the bound holds.
    double worst_margin = 0.0;
    double epsilon = 0.0;

    bool passed() const { return violations == 0; }
    std::string to_json() const;
};

// Absolute slack allowed on the bound comparisons.
inline constexpr double kBoundSlack = 1e-12;

// Two-view color bound: for colors with ||C_a - C_b||^2 <= eps_c,
// ||P_a - C_a||^2 + ||P_b - C_b||^2 >= ||P_a - P_b||^2 / 4 - eps_c / 2.
double appearance_bound_margin(const Vec3& pred_a, const Vec3& pred_b, const Vec3& label_a, const Vec3& label_b,
                               double epsilon_c);
// Scalar depth analogue with eps_s.
double geometry_bound_margin(double pred_a, double pred_b, double label_a, double label_b, double epsilon_s);

// Random trials drawn to satisfy the label-consistency precondition.
BoundCheckReport check_appearance_bound(const PropositionCheckConfig& config, std::uint64_t seed);
BoundCheckReport check_geometry_bound(const PropositionCheckConfig& config, std::uint64_t seed);

}  // namespace cfield
