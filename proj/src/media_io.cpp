#include "mmfuse/media_io.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mmfuse/error.hpp"

namespace mmfuse {

namespace {

std::string read_token(std::istream &in) {
    std::string tok;
    char c;
    while (in.get(c)) {
        if (c == '#') {
            std::string ignored;
            std::getline(in, ignored);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(c);
    }
    return tok;
}

void put_u32(std::ostream &out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::ostream &out, std::uint16_t v) {
    out.put(static_cast<char>(v & 0xff));
    out.put(static_cast<char>((v >> 8) & 0xff));
}

std::uint32_t get_u32(const unsigned char *p) {
    return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char *p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

} // namespace

PixelGrid read_pgm(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    if (read_token(in) != "P5") throw IoError(path.string() + ": not a binary PGM (P5)");
    const int width = std::stoi(read_token(in));
    const int height = std::stoi(read_token(in));
    const int maxval = std::stoi(read_token(in));
    if (width <= 0 || height <= 0) throw IoError(path.string() + ": bad dimensions");
    if (maxval != 255) throw IoError(path.string() + ": only maxval 255 is supported");

    PixelGrid px(height, width);
    in.read(reinterpret_cast<char *>(px.data()), static_cast<std::streamsize>(px.size()));
    if (in.gcount() != static_cast<std::streamsize>(px.size())) throw IoError(path.string() + ": truncated pixel data");
    return px;
}

void write_pgm(const std::filesystem::path &path, const PixelGrid &pixels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P5\n" << pixels.cols() << ' ' << pixels.rows() << "\n255\n";
    out.write(reinterpret_cast<const char *>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

Eigen::VectorXd quantize_pcm16(const Eigen::VectorXd &samples) {
    return samples.unaryExpr([](double x) { return std::round(std::clamp(x, -1.0, 1.0) * 32767.0) / 32767.0; });
}

void write_wav(const std::filesystem::path &path, const Eigen::VectorXd &samples, int sample_rate) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    out.write("RIFF", 4);
    put_u32(out, 36 + data_bytes);
    out.write("WAVEfmt ", 8);
    put_u32(out, 16);
    put_u16(out, 1); // PCM
    put_u16(out, 1); // mono
    put_u32(out, static_cast<std::uint32_t>(sample_rate));
    put_u32(out, static_cast<std::uint32_t>(sample_rate * 2));
    put_u16(out, 2);
    put_u16(out, 16);
    out.write("data", 4);
    put_u32(out, data_bytes);
    for (Eigen::Index i = 0; i < samples.size(); ++i) {
        const auto k = static_cast<std::int16_t>(std::lround(std::clamp(samples[i], -1.0, 1.0) * 32767.0));
        put_u16(out, static_cast<std::uint16_t>(k));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

AudioClip read_wav(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
        std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE")
        throw IoError(path.string() + ": not a RIFF/WAVE file");

    int channels = 0, bits = 0, format = 0;
    std::uint32_t rate = 0;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::string id(bytes.begin() + pos, bytes.begin() + pos + 4);
        const std::uint32_t size = get_u32(&bytes[pos + 4]);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size()) throw IoError(path.string() + ": truncated chunk " + id);
        if (id == "fmt ") {
            if (size < 16) throw IoError(path.string() + ": short fmt chunk");
            format = get_u16(&bytes[body]);
            channels = get_u16(&bytes[body + 2]);
            rate = get_u32(&bytes[body + 4]);
            bits = get_u16(&bytes[body + 14]);
        } else if (id == "data") {
            if (format != 1 || channels != 1 || bits != 16)
                throw IoError(path.string() + ": only 16-bit PCM mono is supported");
            AudioClip clip;
            clip.sample_rate = static_cast<int>(rate);
            clip.samples.resize(size / 2);
            for (std::uint32_t i = 0; i < size / 2; ++i) {
                const auto k = static_cast<std::int16_t>(get_u16(&bytes[body + 2 * i]));
                clip.samples[i] = std::max(-1.0, k / 32767.0);
            }
            return clip;
        }
        pos = body + size + (size & 1);
    }
    throw IoError(path.string() + ": no data chunk");
}

Manifest read_manifest(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw IoError("missing manifest: " + path.string());
    try {
        const auto j = nlohmann::json::parse(in);
        Manifest m;
        m.audio = j.value("audio", std::string("audio.wav"));
        m.fps = j.value("fps", 20.0);
        for (const auto &f : j.at("frames")) m.frames.push_back({f.at("file").get<std::string>(), f.at("timestamp_s").get<double>()});
        return m;
    } catch (const nlohmann::json::exception &e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_manifest(const std::filesystem::path &path, const Manifest &manifest) {
    nlohmann::json j;
    j["audio"] = manifest.audio;
    j["fps"] = manifest.fps;
    j["frames"] = nlohmann::json::array();
    for (const auto &f : manifest.frames) j["frames"].push_back({{"file", f.file}, {"timestamp_s", f.timestamp_s}});
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

PixelGrid rgb_to_gray(const PixelGrid &r, const PixelGrid &g, const PixelGrid &b) {
    if (r.rows() != g.rows() || r.rows() != b.rows() || r.cols() != g.cols() || r.cols() != b.cols())
        throw InvalidInput("rgb_to_gray: channel dimensions differ");
    const Image luma = 0.299 * r.cast<double>().array() + 0.587 * g.cast<double>().array() + 0.114 * b.cast<double>().array();
    return luma.round().max(0.0).min(255.0).cast<std::uint8_t>().matrix();
}

} // namespace mmfuse
