#include "xaimeter/png_io.hpp"

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

#include <png.h>

#include "xaimeter/errors.hpp"

namespace xaimeter {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_handler(png_structp png, png_const_charp msg) {
    // recorded message is rethrown after longjmp unwinds libpng
    auto* err = static_cast<std::string*>(png_get_error_ptr(png));
    if (err) *err = msg ? msg : "libpng error";
    longjmp(png_jmpbuf(png), 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::string error;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::string error;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

struct DecodedPng {
    std::size_t width = 0;
    std::size_t height = 0;
    int channels = 0;   // 1 (gray) or 3 (rgb)
    int bit_depth = 0;  // 8 or 16
    std::vector<std::uint16_t> samples;  // row-major, channel-interleaved
};

DecodedPng decode_png(const std::filesystem::path& path, bool want_gray) {
    FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file) throw IoError("cannot open " + path.string());

    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &r.error, png_error_handler,
                                   png_warning_handler);
    if (!r.png) throw IoError("png_create_read_struct failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw IoError("png_create_info_struct failed");

    DecodedPng out;
    std::vector<png_bytep> row_ptrs;
    std::vector<unsigned char> buffer;

    if (setjmp(png_jmpbuf(r.png))) {
        throw CorruptFileError(path.string() + ": " + r.error);
    }

    png_init_io(r.png, file.get());
    png_read_info(r.png, r.info);

    const png_uint_32 width = png_get_image_width(r.png, r.info);
    const png_uint_32 height = png_get_image_height(r.png, r.info);
    int bit_depth = png_get_bit_depth(r.png, r.info);
    int color_type = png_get_color_type(r.png, r.info);

    if (want_gray) {
        if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_GRAY_ALPHA) {
            throw ValueError(path.string() + ": expected a grayscale PNG");
        }
        if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
        if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(r.png);
    } else {
        if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
        if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
            if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
            png_set_gray_to_rgb(r.png);
        }
        if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
        if (bit_depth == 16) png_set_strip_16(r.png);
        png_set_strip_alpha(r.png);
    }
    png_read_update_info(r.png, r.info);

    bit_depth = png_get_bit_depth(r.png, r.info);
    const int channels = png_get_channels(r.png, r.info);
    const std::size_t rowbytes = png_get_rowbytes(r.png, r.info);

    buffer.resize(rowbytes * height);
    row_ptrs.resize(height);
    for (png_uint_32 i = 0; i < height; ++i) row_ptrs[i] = buffer.data() + i * rowbytes;
    png_read_image(r.png, row_ptrs.data());
    png_read_end(r.png, nullptr);

    out.width = width;
    out.height = height;
    out.channels = channels;
    out.bit_depth = bit_depth;
    out.samples.resize(static_cast<std::size_t>(width) * height * channels);
    if (bit_depth == 16) {
        for (std::size_t i = 0; i < out.samples.size(); ++i) {
            out.samples[i] = static_cast<std::uint16_t>((buffer[i * 2] << 8) | buffer[i * 2 + 1]);
        }
    } else {
        for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] = buffer[i];
    }
    return out;
}

}  // namespace

Image read_image_png(const std::filesystem::path& path) {
    DecodedPng png = decode_png(path, /*want_gray=*/false);
    if (png.channels != 3 || png.bit_depth != 8) {
        throw CorruptFileError(path.string() + ": unexpected decoded format");
    }
    Tensor t({png.height, png.width, 3});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(png.samples[i]);
    return Image::from_tensor(std::move(t));
}

void write_image_png(const std::filesystem::path& path, const Image& image) {
    FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file) throw IoError("cannot open " + path.string() + " for writing");

    PngWriter w;
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &w.error, png_error_handler,
                                    png_warning_handler);
    if (!w.png) throw IoError("png_create_write_struct failed");
    w.info = png_create_info_struct(w.png);
    if (!w.info) throw IoError("png_create_info_struct failed");

    const std::size_t h = image.height(), wd = image.width();
    std::vector<unsigned char> buffer(h * wd * 3);
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        buffer[i] = static_cast<unsigned char>(image.flat()[i]);
    }
    std::vector<png_bytep> rows(h);
    for (std::size_t i = 0; i < h; ++i) rows[i] = buffer.data() + i * wd * 3;

    if (setjmp(png_jmpbuf(w.png))) {
        throw IoError(path.string() + ": " + w.error);
    }
    png_init_io(w.png, file.get());
    png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(wd), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    png_write_image(w.png, rows.data());
    png_write_end(w.png, nullptr);
}

Tensor read_gray_png(const std::filesystem::path& path) {
    DecodedPng png = decode_png(path, /*want_gray=*/true);
    Tensor t({png.height, png.width});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(png.samples[i]);
    return t;
}

void write_gray16_png(const std::filesystem::path& path, const Tensor& hw, double lo,
                      double hi) {
    if (hw.rank() != 2) throw ShapeError("write_gray16_png: expects a 2-d tensor");
    FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file) throw IoError("cannot open " + path.string() + " for writing");

    PngWriter w;
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &w.error, png_error_handler,
                                    png_warning_handler);
    if (!w.png) throw IoError("png_create_write_struct failed");
    w.info = png_create_info_struct(w.png);
    if (!w.info) throw IoError("png_create_info_struct failed");

    const std::size_t h = hw.shape()[0], wd = hw.shape()[1];
    const double range = hi - lo;
    std::vector<unsigned char> buffer(h * wd * 2);
    for (std::size_t i = 0; i < hw.size(); ++i) {
        double scaled = range > 0.0 ? (hw[i] - lo) / range : 0.0;
        scaled = std::clamp(scaled, 0.0, 1.0);
        const auto v = static_cast<std::uint16_t>(std::lround(scaled * 65535.0));
        buffer[i * 2] = static_cast<unsigned char>(v >> 8);  // network byte order
        buffer[i * 2 + 1] = static_cast<unsigned char>(v & 0xff);
    }
    std::vector<png_bytep> rows(h);
    for (std::size_t i = 0; i < h; ++i) rows[i] = buffer.data() + i * wd * 2;

    if (setjmp(png_jmpbuf(w.png)))
        throw IoError(path.string() + ": " + w.error);
    png_init_io(w.png, file.get());
    png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(wd), static_cast<png_uint_32>(h), 16,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    png_write_image(w.png, rows.data());
    png_write_end(w.png, nullptr);
}

}  // namespace xaimeter
