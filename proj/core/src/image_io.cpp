#include "cfield/image_io.hpp"

#include <png.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cfield/error.hpp"

namespace cfield {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f != nullptr) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) {
        throw IoError("cannot open '" + path.string() + "': " + std::strerror(errno));
    }
    return f;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp message) {
    auto* buffer = static_cast<std::string*>(png_get_error_ptr(png));
    if (buffer != nullptr) {
        *buffer = message;
    }
    png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

// Writes rows of `channels` 8-bit samples.
void write_png_rows(const std::filesystem::path& path, int width, int height, int channels,
                    const std::vector<std::uint8_t>& pixels) {
    FilePtr file = open_file(path, "wb");
    std::string err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
    if (png == nullptr) {
        throw IoError("png: cannot allocate writer");
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png: cannot allocate info");
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
        rows[static_cast<std::size_t>(y)] =
            const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width * channels);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png: failed writing '" + path.string() + "': " + err);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Decodes to 8-bit samples with `channels` = 1 (gray) or 3 (RGB).
std::vector<std::uint8_t> read_png_rows(const std::filesystem::path& path, int channels, int& width,
                                        int& height) {
    FilePtr file = open_file(path, "rb");
    std::array<unsigned char, 8> sig{};
    if (std::fread(sig.data(), 1, sig.size(), file.get()) != sig.size() || png_sig_cmp(sig.data(), 0, 8) != 0) {
        throw IoError("'" + path.string() + "' is not a PNG file");
    }
    std::string err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
    if (png == nullptr) {
        throw IoError("png: cannot allocate reader");
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png: cannot allocate info");
    }
    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png: failed reading '" + path.string() + "': " + err);
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_byte color_type = png_get_color_type(png, info);
    const png_byte bit_depth = png_get_bit_depth(png, info);
    if (bit_depth == 16) {
        png_set_strip_16(png);
    }
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if ((color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) && bit_depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) {
        png_set_tRNS_to_alpha(png);
    }
    png_set_strip_alpha(png);
    const bool source_gray = (color_type & PNG_COLOR_MASK_COLOR) == 0;
    if (channels == 3 && source_gray) {
        png_set_gray_to_rgb(png);
    } else if (channels == 1 && !source_gray) {
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    png_read_update_info(png, info);

    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    if (rowbytes != static_cast<std::size_t>(width) * static_cast<std::size_t>(channels)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png: unexpected row layout in '" + path.string() + "'");
    }
    pixels.resize(rowbytes * static_cast<std::size_t>(height));
    rows.resize(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
        rows[static_cast<std::size_t>(y)] = pixels.data() + rowbytes * static_cast<std::size_t>(y);
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return pixels;
}

std::uint8_t to_byte(double value) {
    return static_cast<std::uint8_t>(std::lround(quantize_8bit(value) * 255.0));
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& image) {
    if (image.empty()) {
        throw DomainError("write_png: empty image");
    }
    std::vector<std::uint8_t> pixels(image.size() * 3);
    for (std::size_t i = 0; i < image.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
            pixels[3 * i + static_cast<std::size_t>(c)] = to_byte(image[i][c]);
        }
    }
    write_png_rows(path, image.width(), image.height(), 3, pixels);
}

Image read_png(const std::filesystem::path& path) {
    int w = 0;
    int h = 0;
    const auto pixels = read_png_rows(path, 3, w, h);
    Image image(w, h);
    for (std::size_t i = 0; i < image.size(); ++i) {
        image[i] = Vec3(pixels[3 * i], pixels[3 * i + 1], pixels[3 * i + 2]) / 255.0;
    }
    return image;
}

void write_gray_png(const std::filesystem::path& path, const Grid<std::uint8_t>& gray) {
    if (gray.empty()) {
        throw DomainError("write_gray_png: empty image");
    }
    write_png_rows(path, gray.width(), gray.height(), 1, gray.values());
}

Grid<std::uint8_t> read_gray_png(const std::filesystem::path& path) {
    int w = 0;
    int h = 0;
    auto pixels = read_png_rows(path, 1, w, h);
    Grid<std::uint8_t> gray(w, h);
    gray.values() = std::move(pixels);
    return gray;
}

void write_pfm(const std::filesystem::path& path, const Grid<float>& values) {
    static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out << "Pf\n" << values.width() << ' ' << values.height() << "\n-1.0\n";
    std::vector<std::uint32_t> row(static_cast<std::size_t>(values.width()));
    for (int y = values.height() - 1; y >= 0; --y) {
        for (int x = 0; x < values.width(); ++x) {
            std::uint32_t bits = std::bit_cast<std::uint32_t>(values(x, y));
            if constexpr (std::endian::native == std::endian::big) {
                bits = __builtin_bswap32(bits);
            }
            row[static_cast<std::size_t>(x)] = bits;
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    }
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

Grid<float> read_pfm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    std::string magic;
    int width = 0;
    int height = 0;
    double scale = 0.0;
    in >> magic >> width >> height >> scale;
    if (!in || magic != "Pf") {
        throw IoError("'" + path.string() + "' is not a grayscale PFM file");
    }
    if (width <= 0 || height <= 0 || scale == 0.0) {
        throw IoError("'" + path.string() + "': invalid PFM header");
    }
    in.get();  // single whitespace byte after the scale
    const bool little = scale < 0.0;
    Grid<float> values(width, height);
    std::vector<std::uint32_t> row(static_cast<std::size_t>(width));
    for (int y = height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
        if (!in) {
            throw IoError("'" + path.string() + "': truncated PFM data");
        }
        for (int x = 0; x < width; ++x) {
            std::uint32_t bits = row[static_cast<std::size_t>(x)];
            if (little != (std::endian::native == std::endian::little)) {
                bits = __builtin_bswap32(bits);
            }
            values(x, y) = std::bit_cast<float>(bits);
        }
    }
    return values;
}

void write_depth_pfm(const std::filesystem::path& path, const DepthMap& depth) {
    Grid<float> values(depth.width(), depth.height());
    for (int y = 0; y < depth.height(); ++y) {
        for (int x = 0; x < depth.width(); ++x) {
            values(x, y) = depth.valid(x, y) ? depth.at(x, y) : std::numeric_limits<float>::infinity();
        }
    }
    write_pfm(path, values);
}

DepthMap read_depth_pfm(const std::filesystem::path& path) {
    const Grid<float> values = read_pfm(path);
    DepthMap depth(values.width(), values.height());
    for (int y = 0; y < values.height(); ++y) {
        for (int x = 0; x < values.width(); ++x) {
            const float v = values(x, y);
            if (std::isfinite(v) && v > 0.0f) {
                depth.set(x, y, v);
            }
        }
    }
    return depth;
}

}  // namespace cfield
