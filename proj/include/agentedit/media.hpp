#pragma once

#include "agentedit/digest.hpp"
#include "agentedit/error.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace agentedit {

// Interleaved 8-bit RGB raster.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> rgb;

    Image() = default;
    Image(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), rgb(static_cast<std::size_t>(h) * w * 3, fill)
    {
    }

    std::size_t offset(int y, int x) const noexcept
    {
        return (static_cast<std::size_t>(y) * width + x) * 3;
    }

    std::string digest() const
    {
        std::string header = std::to_string(height) + "x" + std::to_string(width) + ":";
        return sha256_hex(header + std::string(rgb.begin(), rgb.end()));
    }

    friend bool operator==(const Image&, const Image&) = default;
};

// A reference to an image asset. Local rasters carry their pixels; remote
// candidates (search results) are known by uri only.
struct ImageRef {
    std::string uri;
    int height = 0;
    int width = 0;
    std::shared_ptr<const Image> pixels;

    std::string digest() const { return pixels ? pixels->digest() : sha256_hex(uri); }
};

inline ImageRef make_local_ref(std::string uri, Image image)
{
    ImageRef ref;
    ref.uri = std::move(uri);
    ref.height = image.height;
    ref.width = image.width;
    ref.pixels = std::make_shared<const Image>(std::move(image));
    return ref;
}

struct VideoHandle {
    std::string path;
    int frames = 0;
    int height = 0;
    int width = 0;
    double fps = 24.0;

    void check() const
    {
        if (frames < 1 || height < 1 || width < 1) {
            fail(ErrorCode::InvalidRequest, "video '" + path + "' needs positive frame count and dimensions");
        }
    }

    friend bool operator==(const VideoHandle&, const VideoHandle&) = default;
};

inline nlohmann::ordered_json video_to_json(const VideoHandle& v)
{
    return {{"path", v.path}, {"frames", v.frames}, {"height", v.height}, {"width", v.width}, {"fps", v.fps}};
}

inline VideoHandle video_from_json(const nlohmann::json& doc)
{
    VideoHandle v;
    try {
        v.path = doc.at("path").get<std::string>();
        v.frames = doc.value("frames", 81);
        v.height = doc.value("height", 480);
        v.width = doc.value("width", 832);
        v.fps = doc.value("fps", 24.0);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::MalformedDocument, std::string("video handle: ") + e.what());
    }
    return v;
}

// Frame indices handed to the planner: one per second, at least two.
inline std::vector<int> agent_frame_indices(const VideoHandle& video)
{
    std::vector<int> idx;
    int step = std::max(1, static_cast<int>(std::lround(video.fps)));
    for (int i = 0; i < video.frames; i += step) idx.push_back(i);
    if (idx.size() < 2 && video.frames >= 2) idx = {0, video.frames - 1};
    return idx;
}

class FrameSource {
public:
    virtual ~FrameSource() = default;
    virtual Image frame(const VideoHandle& video, int index) const = 0;
};

// Deterministic pseudo-content keyed on (path, index). Stands in for decoded
// frames when the handle does not point at extracted frames on disk.
class SyntheticFrameSource : public FrameSource {
public:
    Image frame(const VideoHandle& video, int index) const override
    {
        if (index < 0 || index >= video.frames) {
            fail(ErrorCode::IndexOutOfRange, "frame " + std::to_string(index) + " of " + video.path);
        }
        Image img(video.height, video.width);
        const std::uint64_t seed = fnv1a64(video.path) ^ (0x9e3779b97f4a7c15ull * (index + 1));
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                std::uint64_t v = seed + 0x632be59bd9b4e019ull * (static_cast<std::uint64_t>(y) * 131 + x);
                v ^= v >> 29;
                const auto o = img.offset(y, x);
                img.rgb[o] = static_cast<std::uint8_t>(v);
                img.rgb[o + 1] = static_cast<std::uint8_t>(v >> 8);
                img.rgb[o + 2] = static_cast<std::uint8_t>(v >> 16);
            }
        }
        return img;
    }
};

inline Image read_ppm(const std::filesystem::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + file.string());
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    in.get();
    if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) {
        fail(ErrorCode::IoError, "unsupported ppm " + file.string());
    }
    Image img(h, w);
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (!in) fail(ErrorCode::IoError, "truncated ppm " + file.string());
    return img;
}

inline void write_ppm(const std::filesystem::path& file, const Image& img)
{
    std::ofstream out(file, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + file.string());
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
}

// Reads <dir>/frame_00000.ppm style extracted frames.
class PpmDirectoryFrameSource : public FrameSource {
public:
    Image frame(const VideoHandle& video, int index) const override
    {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%05d.ppm", index);
        return read_ppm(std::filesystem::path(video.path) / name);
    }
};

class DefaultFrameSource : public FrameSource {
public:
    Image frame(const VideoHandle& video, int index) const override
    {
        std::error_code ec;
        if (std::filesystem::is_directory(video.path, ec)) return ppm_.frame(video, index);
        return synthetic_.frame(video, index);
    }

private:
    PpmDirectoryFrameSource ppm_;
    SyntheticFrameSource synthetic_;
};

inline std::string base64_encode(const std::string& bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

inline std::string encode_png(const Image& img)
{
    auto put_u32 = [](std::string& s, std::uint32_t v) {
        s.push_back(static_cast<char>(v >> 24));
        s.push_back(static_cast<char>(v >> 16));
        s.push_back(static_cast<char>(v >> 8));
        s.push_back(static_cast<char>(v));
    };
    auto chunk = [&](std::string& out, const char* type, const std::string& data) {
        put_u32(out, static_cast<std::uint32_t>(data.size()));
        std::string body(type, 4);
        body += data;
        out += body;
        put_u32(out, static_cast<std::uint32_t>(
                         crc32(0, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
    };

    std::string raw;
    raw.reserve(static_cast<std::size_t>(img.height) * (img.width * 3 + 1));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back('\0');
        const auto* row = img.rgb.data() + img.offset(y, 0);
        raw.append(reinterpret_cast<const char*>(row), static_cast<std::size_t>(img.width) * 3);
    }
    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::string z(zlen, '\0');
    compress2(reinterpret_cast<Bytef*>(z.data()), &zlen, reinterpret_cast<const Bytef*>(raw.data()),
              static_cast<uLong>(raw.size()), 6);
    z.resize(zlen);

    std::string ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(img.width));
    put_u32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr += std::string("\x08\x02\x00\x00\x00", 5); // 8-bit RGB

    std::string png("\x89PNG\r\n\x1a\n", 8);
    chunk(png, "IHDR", ihdr);
    chunk(png, "IDAT", z);
    chunk(png, "IEND", "");
    return png;
}

inline std::string png_data_url(const Image& img)
{
    return "data:image/png;base64," + base64_encode(encode_png(img));
}

} // namespace agentedit
