#include "cfield/metrics.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "cfield/error.hpp"

namespace cfield {

double psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b) || a.empty()) {
        throw DomainError("psnr: images must be non-empty and equally sized");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += (a[i] - b[i]).squaredNorm();
    }
    const double mse = sum / (3.0 * static_cast<double>(a.size()));
    if (mse == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(size));
    const double center = 0.5 * (size - 1);
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - center;
        k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (auto& v : k) {
        v /= sum;
    }
    return k;
}

// Valid-mode separable filtering of a single-channel plane.
Grid<double> filter_valid(const Grid<double>& plane, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int ow = plane.width() - n + 1;
    const int oh = plane.height() - n + 1;
    Grid<double> horiz(ow, plane.height());
    for (int y = 0; y < plane.height(); ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                s += k[static_cast<std::size_t>(i)] * plane(x + i, y);
            }
            horiz(x, y) = s;
        }
    }
    Grid<double> out(ow, oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                s += k[static_cast<std::size_t>(i)] * horiz(x, y + i);
            }
            out(x, y) = s;
        }
    }
    return out;
}

}  // namespace

double ssim(const Image& a, const Image& b, const SsimParams& params) {
    if (!a.same_shape(b)) {
        throw DomainError("ssim: images must be equally sized");
    }
    if (a.width() < params.window || a.height() < params.window) {
        throw DomainError("ssim: image is smaller than the " + std::to_string(params.window) + "x" +
                          std::to_string(params.window) + " window");
    }
    const auto kernel = gaussian_kernel(params.window, params.sigma);
    const double c1 = (params.k1 * params.dynamic_range) * (params.k1 * params.dynamic_range);
    const double c2 = (params.k2 * params.dynamic_range) * (params.k2 * params.dynamic_range);

    double total = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < 3; ++c) {
        Grid<double> pa(a.width(), a.height());
        Grid<double> pb(a.width(), a.height());
        Grid<double> paa(a.width(), a.height());
        Grid<double> pbb(a.width(), a.height());
        Grid<double> pab(a.width(), a.height());
        for (std::size_t i = 0; i < a.size(); ++i) {
            pa[i] = a[i][c];
            pb[i] = b[i][c];
            paa[i] = pa[i] * pa[i];
            pbb[i] = pb[i] * pb[i];
            pab[i] = pa[i] * pb[i];
        }
        const auto mu_a = filter_valid(pa, kernel);
        const auto mu_b = filter_valid(pb, kernel);
        const auto e_aa = filter_valid(paa, kernel);
        const auto e_bb = filter_valid(pbb, kernel);
        const auto e_ab = filter_valid(pab, kernel);
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double ma = mu_a[i];
            const double mb = mu_b[i];
            const double va = e_aa[i] - ma * ma;
            const double vb = e_bb[i] - mb * mb;
            const double cov = e_ab[i] - ma * mb;
            const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

MetricReport MetricReport::from_images(std::vector<ImageMetrics> images) {
    MetricReport r;
    r.images = std::move(images);
    if (r.images.empty()) {
        return r;
    }
    for (const auto& m : r.images) {
        r.mean_psnr += m.psnr;
        r.mean_ssim += m.ssim;
    }
    r.mean_psnr /= static_cast<double>(r.images.size());
    r.mean_ssim /= static_cast<double>(r.images.size());
    return r;
}

namespace {

nlohmann::ordered_json psnr_json(double v) {
    if (std::isinf(v)) {
        return "inf";
    }
    return v;
}

}  // namespace

std::string MetricReport::to_json() const {
    nlohmann::ordered_json j;
    j["mean"] = {{"psnr", psnr_json(mean_psnr)}, {"ssim", mean_ssim}, {"lpips", "not computed"}};
    j["images"] = nlohmann::ordered_json::array();
    for (const auto& m : images) {
        j["images"].push_back({{"name", m.name}, {"psnr", psnr_json(m.psnr)}, {"ssim", m.ssim}, {"lpips", "not computed"}});
    }
    return j.dump(2);
}

std::string MetricReport::to_csv() const {
    std::ostringstream out;
    out.precision(10);
    out << "name,psnr,ssim,lpips\n";
    for (const auto& m : images) {
        out << m.name << ',' << m.psnr << ',' << m.ssim << ",not computed\n";
    }
    out << "mean," << mean_psnr << ',' << mean_ssim << ",not computed\n";
    return out.str();
}

MetricReport evaluate_images(const std::vector<Image>& rendered, const std::vector<Image>& reference,
                             const std::vector<std::string>& names) {
    if (rendered.size() != reference.size() || rendered.size() != names.size()) {
        throw DomainError("evaluate_images: rendered, reference and names must have equal length");
    }
    std::vector<ImageMetrics> rows;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        if (!rendered[i].same_shape(reference[i])) {
            throw DomainError("evaluate_images: '" + names[i] + "' is " + std::to_string(rendered[i].width()) + "x" +
                              std::to_string(rendered[i].height()) + " but its reference is " +
                              std::to_string(reference[i].width()) + "x" + std::to_string(reference[i].height()));
        }
        rows.push_back({names[i], psnr(rendered[i], reference[i]), ssim(rendered[i], reference[i])});
    }
    return MetricReport::from_images(std::move(rows));
}

}  // namespace cfield
