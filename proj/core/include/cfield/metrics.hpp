#pragma once

#include <limits>
#include <string>
#include <vector>

#include "cfield/grid.hpp"

namespace cfield {

// 10 log10(1 / MSE) over all pixels and channels; +infinity for identical
// images. Throws DomainError on dimension mismatch.
double psnr(const Image& a, const Image& b);

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

// Gaussian-window SSIM per channel, averaged over all valid (fully inside)
// window positions and the three channels. Throws DomainError when the
// images differ in size or are smaller than the window.
double ssim(const Image& a, const Image& b, const SsimParams& params = {});

struct ImageMetrics {
    std::string name;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct MetricReport {
    std::vector<ImageMetrics> images;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;

    // Mean PSNR is +inf as soon as one image matches its reference exactly.
    static MetricReport from_images(std::vector<ImageMetrics> images);
    // LPIPS is reported as "not computed" so column layout stays fixed.
    std::string to_json() const;
    std::string to_csv() const;
};

MetricReport evaluate_images(const std::vector<Image>& rendered, const std::vector<Image>& reference,
                             const std::vector<std::string>& names);

}  // namespace cfield
