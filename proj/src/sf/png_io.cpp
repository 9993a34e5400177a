#include "sf/png_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "sf/common.hpp"

namespace sf {

namespace {

const unsigned char kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

std::uint32_t get_u32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
           std::uint32_t(p[3]);
}

void append_chunk(std::vector<unsigned char>& out, const char type[4],
                  const std::vector<unsigned char>& payload) {
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const std::uint32_t crc = static_cast<std::uint32_t>(
        ::crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start)));
    put_u32(out, crc);
}

void write_png(const std::string& path, int width, int height, int bit_depth, int color_type,
               const std::vector<unsigned char>& raw_rows) {
    std::vector<unsigned char> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(width));
    put_u32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(static_cast<unsigned char>(bit_depth));
    ihdr.push_back(static_cast<unsigned char>(color_type));
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace

    uLongf bound = compressBound(static_cast<uLong>(raw_rows.size()));
    std::vector<unsigned char> idat(bound);
    require(compress2(idat.data(), &bound, raw_rows.data(), static_cast<uLong>(raw_rows.size()), 6) ==
                Z_OK,
            "png: deflate failed");
    idat.resize(bound);

    std::vector<unsigned char> out;
    out.insert(out.end(), kSignature, kSignature + 8);
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", idat);
    append_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(f.good(), "png: cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    require(f.good(), "png: write failed: " + path);
}

struct PngData {
    int width = 0, height = 0, bit_depth = 0, color_type = 0;
    std::vector<unsigned char> pixels;  // unfiltered scanlines, no filter bytes
};

int channels_for(int color_type) {
    switch (color_type) {
        case 0: return 1;
        case 2: return 3;
        case 4: return 2;
        case 6: return 4;
        default: return -1;
    }
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

PngData read_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "png: cannot open: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    require(bytes.size() > 8 && std::memcmp(bytes.data(), kSignature, 8) == 0,
            "png: bad signature: " + path);

    PngData png;
    std::vector<unsigned char> idat;
    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = get_u32(&bytes[pos]);
        require(pos + 12 + len <= bytes.size(), "png: truncated chunk: " + path);
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        const unsigned char* payload = &bytes[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            require(len == 13, "png: bad IHDR");
            png.width = static_cast<int>(get_u32(payload));
            png.height = static_cast<int>(get_u32(payload + 4));
            png.bit_depth = payload[8];
            png.color_type = payload[9];
            require(payload[10] == 0 && payload[11] == 0 && payload[12] == 0,
                    "png: unsupported compression/filter/interlace");
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    require(png.width > 0 && png.height > 0, "png: missing IHDR: " + path);
    const int ch = channels_for(png.color_type);
    require(ch > 0, "png: unsupported color type");
    const int bytes_pp = ch * (png.bit_depth / 8);
    require(png.bit_depth == 8 || png.bit_depth == 16, "png: unsupported bit depth");

    const std::size_t stride = static_cast<std::size_t>(png.width) * bytes_pp;
    std::vector<unsigned char> raw((stride + 1) * png.height);
    uLongf raw_len = static_cast<uLongf>(raw.size());
    require(uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) == Z_OK &&
                raw_len == raw.size(),
            "png: inflate failed: " + path);

    png.pixels.assign(stride * png.height, 0);
    std::vector<unsigned char> prev(stride, 0);
    for (int y = 0; y < png.height; ++y) {
        const unsigned char filter = raw[(stride + 1) * y];
        const unsigned char* src = &raw[(stride + 1) * y + 1];
        unsigned char* dst = &png.pixels[stride * y];
        for (std::size_t i = 0; i < stride; ++i) {
            const int a = i >= static_cast<std::size_t>(bytes_pp) ? dst[i - bytes_pp] : 0;
            const int b = prev[i];
            const int c = i >= static_cast<std::size_t>(bytes_pp) ? prev[i - bytes_pp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw Error("png: unknown filter type");
            }
            dst[i] = static_cast<unsigned char>(v & 0xff);
        }
        std::memcpy(prev.data(), dst, stride);
    }
    return png;
}

}  // namespace

void write_png_rgb8(const std::string& path, const Tensor& image) {
    require(image.c == 3, "write_png_rgb8: image must have 3 channels");
    std::vector<unsigned char> rows;
    rows.reserve((static_cast<std::size_t>(image.w) * 3 + 1) * image.h);
    for (int y = 0; y < image.h; ++y) {
        rows.push_back(0);  // filter: none
        for (int x = 0; x < image.w; ++x)
            for (int ch = 0; ch < 3; ++ch) {
                double v = image.at(y, x, ch);
                v = std::min(1.0, std::max(0.0, v));
                rows.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
            }
    }
    write_png(path, image.w, image.h, 8, 2, rows);
}

Tensor read_png_rgb8(const std::string& path) {
    const PngData png = read_png(path);
    require(png.color_type == 2 && png.bit_depth == 8, "read_png_rgb8: not an 8-bit RGB png: " + path);
    Tensor img = Tensor::hwc(png.height, png.width, 3);
    for (int y = 0; y < png.height; ++y)
        for (int x = 0; x < png.width; ++x)
            for (int ch = 0; ch < 3; ++ch)
                img.at(y, x, ch) =
                    png.pixels[(static_cast<std::size_t>(y) * png.width + x) * 3 + ch] / 255.0;
    return img;
}

void write_png_gray16(const std::string& path, int width, int height,
                      const std::vector<std::uint16_t>& samples) {
    require(samples.size() == static_cast<std::size_t>(width) * height, "write_png_gray16: size mismatch");
    std::vector<unsigned char> rows;
    rows.reserve((static_cast<std::size_t>(width) * 2 + 1) * height);
    for (int y = 0; y < height; ++y) {
        rows.push_back(0);
        for (int x = 0; x < width; ++x) {
            const std::uint16_t v = samples[static_cast<std::size_t>(y) * width + x];
            rows.push_back(static_cast<unsigned char>(v >> 8));
            rows.push_back(static_cast<unsigned char>(v & 0xff));
        }
    }
    write_png(path, width, height, 16, 0, rows);
}

std::vector<std::uint16_t> read_png_gray16(const std::string& path, int& width, int& height) {
    const PngData png = read_png(path);
    require(png.color_type == 0 && png.bit_depth == 16,
            "read_png_gray16: not a 16-bit grayscale png: " + path);
    width = png.width;
    height = png.height;
    std::vector<std::uint16_t> samples(static_cast<std::size_t>(width) * height);
    for (std::size_t i = 0; i < samples.size(); ++i)
        samples[i] = static_cast<std::uint16_t>((png.pixels[2 * i] << 8) | png.pixels[2 * i + 1]);
    return samples;
}

void write_depth_png(const std::string& path, const Tensor& depth_m, const Tensor* validity) {
    require(depth_m.c == 1, "write_depth_png: depth must be single channel");
    std::vector<std::uint16_t> mm(static_cast<std::size_t>(depth_m.w) * depth_m.h, 0);
    for (int y = 0; y < depth_m.h; ++y)
        for (int x = 0; x < depth_m.w; ++x) {
            if (validity && validity->at(y, x, 0) == 0.0) continue;
            const double v = depth_m.at(y, x, 0) * 1000.0;
            if (v <= 0.0) continue;
            long r = std::lround(v);
            if (r < 1) r = 1;
            if (r > 65535) r = 65535;
            mm[static_cast<std::size_t>(y) * depth_m.w + x] = static_cast<std::uint16_t>(r);
        }
    write_png_gray16(path, depth_m.w, depth_m.h, mm);
}

void read_depth_png(const std::string& path, Tensor& depth_m, Tensor& validity) {
    int w = 0, h = 0;
    const std::vector<std::uint16_t> mm = read_png_gray16(path, w, h);
    depth_m = Tensor::hwc(h, w, 1);
    validity = Tensor::hwc(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::uint16_t v = mm[static_cast<std::size_t>(y) * w + x];
            if (v == 0) continue;
            depth_m.at(y, x, 0) = v / 1000.0;
            validity.at(y, x, 0) = 1.0;
        }
}

}  // namespace sf
