#include "amr/wav.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "amr/core.hpp"

namespace amr {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le32(const unsigned char *p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char *p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::ostream &out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                static_cast<char>((v >> 16) & 0xff),
                                static_cast<char>((v >> 24) & 0xff)};
    out.write(b.data(), 4);
}

void put16(std::ostream &out, std::uint16_t v) {
    const std::array<char, 2> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    out.write(b.data(), 2);
}

struct Layout {
    WavInfo info;
    std::streamoff data_offset = 0;
};

Layout parse_layout(std::ifstream &in, const std::filesystem::path &path) {
    unsigned char riff[12];
    if (!in.read(reinterpret_cast<char *>(riff), 12) || std::memcmp(riff, "RIFF", 4) != 0 ||
        std::memcmp(riff + 8, "WAVE", 4) != 0) {
        throw IoError(path.string() + ": not a RIFF/WAVE file");
    }
    Layout layout;
    bool have_fmt = false;
    std::uint16_t format = 0;
    std::uint16_t block_align = 0;
    while (true) {
        unsigned char header[8];
        if (!in.read(reinterpret_cast<char *>(header), 8)) {
            throw IoError(path.string() + ": no data chunk");
        }
        const std::uint32_t size = le32(header + 4);
        if (std::memcmp(header, "fmt ", 4) == 0) {
            std::vector<unsigned char> fmt(size);
            if (size < 16 || !in.read(reinterpret_cast<char *>(fmt.data()), size)) {
                throw IoError(path.string() + ": truncated fmt chunk");
            }
            format = le16(fmt.data());
            layout.info.channels = le16(fmt.data() + 2);
            layout.info.sample_rate = static_cast<int>(le32(fmt.data() + 4));
            block_align = le16(fmt.data() + 12);
            layout.info.bits_per_sample = le16(fmt.data() + 14);
            if (format == kFormatExtensible && size >= 26) {
                format = le16(fmt.data() + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(header, "data", 4) == 0) {
            if (!have_fmt) {
                throw IoError(path.string() + ": data chunk before fmt chunk");
            }
            layout.data_offset = in.tellg();
            if (layout.info.channels <= 0 || block_align == 0) {
                throw IoError(path.string() + ": invalid channel layout");
            }
            layout.info.frames = size / block_align;
            break;
        } else {
            in.seekg(size + (size & 1u), std::ios::cur);
            continue;
        }
        if (size & 1u) {
            in.seekg(1, std::ios::cur);
        }
    }
    const int bits = layout.info.bits_per_sample;
    if (format == kFormatFloat && (bits == 32 || bits == 64)) {
        layout.info.is_float = true;
    } else if (format == kFormatPcm && (bits == 8 || bits == 16 || bits == 24 || bits == 32)) {
        layout.info.is_float = false;
    } else {
        throw IoError(path.string() + ": unsupported WAV encoding (format " +
                      std::to_string(format) + ", " + std::to_string(bits) + " bits)");
    }
    if (block_align != layout.info.channels * (bits / 8)) {
        throw IoError(path.string() + ": inconsistent block alignment");
    }
    return layout;
}

double decode_sample(const unsigned char *p, const WavInfo &info) {
    switch (info.bits_per_sample) {
    case 8:
        return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16:
        return static_cast<std::int16_t>(le16(p)) / 32768.0;
    case 24: {
        std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
        if (v & 0x800000) v -= 0x1000000;
        return v / 8388608.0;
    }
    case 32:
        if (info.is_float) {
            return std::bit_cast<float>(le32(p));
        }
        return static_cast<std::int32_t>(le32(p)) / 2147483648.0;
    case 64: {
        const std::uint64_t v =
            static_cast<std::uint64_t>(le32(p)) | (static_cast<std::uint64_t>(le32(p + 4)) << 32);
        return std::bit_cast<double>(v);
    }
    default:
        return 0.0;
    }
}

} // namespace

WavInfo read_wav_info(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return parse_layout(in, path).info;
}

std::vector<float> read_wav(const std::filesystem::path &path, std::size_t offset,
                            std::size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    const Layout layout = parse_layout(in, path);
    const WavInfo &info = layout.info;
    if (offset > info.frames) {
        throw IoError(path.string() + ": read offset past end of audio");
    }
    const std::size_t frames = std::min(count, info.frames - offset);
    const std::size_t frame_bytes =
        static_cast<std::size_t>(info.channels) * (info.bits_per_sample / 8);
    in.seekg(layout.data_offset + static_cast<std::streamoff>(offset * frame_bytes));
    std::vector<unsigned char> raw(frames * frame_bytes);
    if (!in.read(reinterpret_cast<char *>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
        throw IoError(path.string() + ": truncated data chunk");
    }
    std::vector<float> out(frames);
    const std::size_t width = info.bits_per_sample / 8;
    for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (int c = 0; c < info.channels; ++c) {
            acc += decode_sample(raw.data() + f * frame_bytes + c * width, info);
        }
        out[f] = static_cast<float>(acc / info.channels);
    }
    return out;
}

void write_wav(const std::filesystem::path &path, std::span<const float> samples,
               int sample_rate) {
    if (sample_rate <= 0) {
        throw InvalidArgument("sample rate must be positive");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 4);
    // RIFF header + fmt (18) + fact (4) + data
    out.write("RIFF", 4);
    put32(out, 4 + (8 + 18) + (8 + 4) + (8 + data_bytes));
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put32(out, 18);
    put16(out, kFormatFloat);
    put16(out, 1);
    put32(out, static_cast<std::uint32_t>(sample_rate));
    put32(out, static_cast<std::uint32_t>(sample_rate) * 4);
    put16(out, 4);
    put16(out, 32);
    put16(out, 0);
    out.write("fact", 4);
    put32(out, 4);
    put32(out, static_cast<std::uint32_t>(samples.size()));
    out.write("data", 4);
    put32(out, data_bytes);
    for (float s : samples) {
        put32(out, std::bit_cast<std::uint32_t>(s));
    }
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

} // namespace amr
