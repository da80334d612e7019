// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#include "iqc/image.hpp"

#include "iqc/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#ifdef IQC_HAVE_PNG
#include <png.h>
#endif
#ifdef IQC_HAVE_JPEG
#include <csetjmp>
#include <jpeglib.h>
#endif

namespace iqc {

void validate_image(const ErpImage& img)
{
    require_arg(img.width > 0 && img.height > 0, "image dimensions must be positive");
    require_arg(img.channels == 1 || img.channels == 3,
                "image must have 1 or 3 channels");
    require_arg(img.pixels.size() == static_cast<std::size_t>(img.width) * img.height * img.channels,
                "pixel buffer size does not match dimensions");
    if (img.width != 2 * img.height)
        warn("raster is " + std::to_string(img.width) + "x" + std::to_string(img.height)
             + ", not 2:1 equirectangular");
}

ErpImage make_image(int width, int height, int channels, float fill)
{
    ErpImage img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.pixels.assign(static_cast<std::size_t>(width) * height * channels, fill);
    validate_image(img);
    return img;
}

ErpImage to_luma(const ErpImage& img)
{
    if (img.channels == 1)
        return img;
    require_arg(img.channels == 3, "luma conversion needs 1 or 3 channels");
    ErpImage out;
    out.width = img.width;
    out.height = img.height;
    out.channels = 1;
    out.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    const std::size_t n = out.pixels.size();
    for (std::size_t i = 0; i < n; ++i) {
        const float* p = &img.pixels[i * 3];
        out.pixels[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    }
    return out;
}

namespace {

constexpr char kErpfMagic[4] = {'E', 'R', 'P', 'F'};

void write_u32(std::ostream& os, std::uint32_t v)
{
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is)
{
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8)
           | (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

ErpImage read_erpf(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    require_state(is.good(), "cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    require_state(is.good() && std::memcmp(magic, kErpfMagic, 4) == 0,
                  path + ": not an ERPF file");
    const std::uint32_t w = read_u32(is);
    const std::uint32_t h = read_u32(is);
    const std::uint32_t c = read_u32(is);
    require_state(is.good(), path + ": truncated header");
    require_state(w > 0 && h > 0 && (c == 1 || c == 3), path + ": bad ERPF dimensions");
    ErpImage img;
    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    img.channels = static_cast<int>(c);
    img.pixels.resize(static_cast<std::size_t>(w) * h * c);
    static_assert(sizeof(float) == 4);
    is.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size() * sizeof(float)));
    require_state(is.gcount() == static_cast<std::streamsize>(img.pixels.size() * sizeof(float)),
                  path + ": truncated pixel data");
    validate_image(img);
    return img;
}

void write_erpf(const ErpImage& img, const std::string& path)
{
    validate_image(img);
    std::ofstream os(path, std::ios::binary);
    require_state(os.good(), "cannot write " + path);
    os.write(kErpfMagic, 4);
    write_u32(os, static_cast<std::uint32_t>(img.width));
    write_u32(os, static_cast<std::uint32_t>(img.height));
    write_u32(os, static_cast<std::uint32_t>(img.channels));
    os.write(reinterpret_cast<const char*>(img.pixels.data()),
             static_cast<std::streamsize>(img.pixels.size() * sizeof(float)));
    require_state(os.good(), "short write to " + path);
}

#ifdef IQC_HAVE_PNG
namespace {

ErpImage read_png_file(const std::string& path)
{
    FILE* fp = std::fopen(path.c_str(), "rb");
    require_state(fp != nullptr, "cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error(path + ": PNG decode failed");
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int c = static_cast<int>(png_get_channels(png, info));
    require_state(c == 1 || c == 3, path + ": unsupported PNG channel count");
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * c);
    ErpImage img;
    img.width = w;
    img.height = h;
    img.channels = c;
    img.pixels.resize(static_cast<std::size_t>(w) * h * c);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (std::size_t i = 0; i < row.size(); ++i)
            img.pixels[static_cast<std::size_t>(y) * row.size() + i] = row[i] / 255.0f;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    validate_image(img);
    return img;
}

} // namespace
#endif

#ifdef IQC_HAVE_JPEG
namespace {

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo)
{
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

ErpImage read_jpeg_file(const std::string& path)
{
    FILE* fp = std::fopen(path.c_str(), "rb");
    require_state(fp != nullptr, "cannot open " + path);
    jpeg_decompress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        std::fclose(fp);
        throw std::runtime_error(path + ": JPEG decode failed");
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, fp);
    jpeg_read_header(&cinfo, TRUE);
    jpeg_start_decompress(&cinfo);
    const int w = static_cast<int>(cinfo.output_width);
    const int h = static_cast<int>(cinfo.output_height);
    const int c = cinfo.output_components;
    require_state(c == 1 || c == 3, path + ": unsupported JPEG channel count");
    ErpImage img;
    img.width = w;
    img.height = h;
    img.channels = c;
    img.pixels.resize(static_cast<std::size_t>(w) * h * c);
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * c);
    unsigned char* rowp = row.data();
    while (cinfo.output_scanline < cinfo.output_height) {
        const int y = static_cast<int>(cinfo.output_scanline);
        jpeg_read_scanlines(&cinfo, &rowp, 1);
        for (std::size_t i = 0; i < row.size(); ++i)
            img.pixels[static_cast<std::size_t>(y) * row.size() + i] = row[i] / 255.0f;
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    std::fclose(fp);
    validate_image(img);
    return img;
}

} // namespace
#endif

ErpImage load_image(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    require_state(is.good(), "cannot open " + path);
    unsigned char magic[4] = {0, 0, 0, 0};
    is.read(reinterpret_cast<char*>(magic), 4);
    is.close();
    if (std::memcmp(magic, kErpfMagic, 4) == 0)
        return read_erpf(path);
    if (magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G') {
#ifdef IQC_HAVE_PNG
        return read_png_file(path);
#else
        throw std::runtime_error("PNG support not compiled in");
#endif
    }
    if (magic[0] == 0xff && magic[1] == 0xd8) {
#ifdef IQC_HAVE_JPEG
        return read_jpeg_file(path);
#else
        throw std::runtime_error("JPEG support not compiled in");
#endif
    }
    throw std::runtime_error(path + ": unrecognized image format");
}

void write_png(const ErpImage& img, const std::string& path)
{
#ifdef IQC_HAVE_PNG
    validate_image(img);
    FILE* fp = std::fopen(path.c_str(), "wb");
    require_state(fp != nullptr, "cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error(path + ": PNG encode failed");
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            const float v = img.pixels[static_cast<std::size_t>(y) * row.size() + i];
            row[i] = static_cast<unsigned char>(
                std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
#else
    (void)img;
    (void)path;
    throw std::runtime_error("PNG support not compiled in");
#endif
}

} // namespace iqc
