#include "vfiqa/video_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <utility>

namespace vfiqa {

std::string Rational::str() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
}

Rational Rational::parse(const std::string& text) {
    if (text.empty()) throw InvalidSpec("empty frame rate");
    const auto slash = text.find('/');
    try {
        if (slash != std::string::npos) {
            const long long n = std::stoll(text.substr(0, slash));
            const long long d = std::stoll(text.substr(slash + 1));
            if (n <= 0 || d <= 0) throw InvalidSpec("frame rate must be positive: " + text);
            return {n, d};
        }
        const auto dot = text.find('.');
        if (dot == std::string::npos) {
            const long long n = std::stoll(text);
            if (n <= 0) throw InvalidSpec("frame rate must be positive: " + text);
            return {n, 1};
        }
        // decimal: scale out the fractional digits
        const std::string digits = text.substr(0, dot) + text.substr(dot + 1);
        long long den = 1;
        for (std::size_t i = dot + 1; i < text.size(); ++i) den *= 10;
        const long long num = std::stoll(digits);
        if (num <= 0) throw InvalidSpec("frame rate must be positive: " + text);
        return {num, den};
    } catch (const std::invalid_argument&) {
        throw InvalidSpec("unparseable frame rate: " + text);
    } catch (const std::out_of_range&) {
        throw InvalidSpec("frame rate out of range: " + text);
    }
}

void VideoSpec::validate() const {
    if (width <= 0 || height <= 0)
        throw InvalidSpec("frame dimensions must be positive, got " + std::to_string(width) +
                          "x" + std::to_string(height));
    if (width % 2 != 0 || height % 2 != 0)
        throw InvalidSpec("4:2:0 subsampling requires even dimensions, got " +
                          std::to_string(width) + "x" + std::to_string(height));
    if (frame_rate.num <= 0 || frame_rate.den <= 0)
        throw InvalidSpec("frame rate must be positive");
}

class FrameSequence::Backend {
public:
    virtual ~Backend() = default;
    virtual const VideoSpec& spec() const = 0;
    virtual std::size_t frame_count() const = 0;
    virtual LumaFrame luma(std::size_t n) const = 0;
    virtual std::vector<std::uint8_t> frame_bytes(std::size_t n) const = 0;
};

namespace {

void check_index(std::size_t n, std::size_t count) {
    if (n >= count)
        throw IndexOutOfRange("frame index " + std::to_string(n) + " out of range [0, " +
                              std::to_string(count) + ")");
}

class MemoryBackend final : public FrameSequence::Backend {
public:
    MemoryBackend(VideoSpec spec, std::vector<std::vector<std::uint8_t>> frames)
        : spec_(spec), frames_(std::move(frames)) {}

    const VideoSpec& spec() const override { return spec_; }
    std::size_t frame_count() const override { return frames_.size(); }

    LumaFrame luma(std::size_t n) const override {
        check_index(n, frames_.size());
        const auto& f = frames_[n];
        return LumaFrame{spec_.width, spec_.height,
                         std::vector<std::uint8_t>(f.begin(), f.begin() + spec_.luma_size())};
    }

    std::vector<std::uint8_t> frame_bytes(std::size_t n) const override {
        check_index(n, frames_.size());
        return frames_[n];
    }

private:
    VideoSpec spec_;
    std::vector<std::vector<std::uint8_t>> frames_;
};

// Streams frames from disk on demand so long high-resolution sequences never
// need whole-file residency. Reads are serialized on a mutex.
class FileBackend final : public FrameSequence::Backend {
public:
    FileBackend(std::string path, VideoSpec spec, std::size_t count)
        : path_(std::move(path)), spec_(spec), count_(count) {
        stream_.open(path_, std::ios::binary);
        if (!stream_) throw IoError("cannot open " + path_);
    }

    const VideoSpec& spec() const override { return spec_; }
    std::size_t frame_count() const override { return count_; }

    LumaFrame luma(std::size_t n) const override {
        check_index(n, count_);
        LumaFrame frame{spec_.width, spec_.height,
                        std::vector<std::uint8_t>(spec_.luma_size())};
        read_at(n * spec_.frame_size(), frame.samples.data(), frame.samples.size());
        return frame;
    }

    std::vector<std::uint8_t> frame_bytes(std::size_t n) const override {
        check_index(n, count_);
        std::vector<std::uint8_t> bytes(spec_.frame_size());
        read_at(n * spec_.frame_size(), bytes.data(), bytes.size());
        return bytes;
    }

private:
    void read_at(std::size_t offset, std::uint8_t* dst, std::size_t len) const {
        std::lock_guard<std::mutex> lock(mutex_);
        stream_.clear();
        stream_.seekg(static_cast<std::streamoff>(offset));
        stream_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(len));
        if (stream_.gcount() != static_cast<std::streamsize>(len))
            throw IoError("short read from " + path_);
    }

    std::string path_;
    VideoSpec spec_;
    std::size_t count_;
    mutable std::ifstream stream_;
    mutable std::mutex mutex_;
};

} // namespace

const VideoSpec& FrameSequence::spec() const {
    if (!backend_) throw EmptySequence("sequence not initialised");
    return backend_->spec();
}

std::size_t FrameSequence::frame_count() const {
    return backend_ ? backend_->frame_count() : 0;
}

LumaFrame FrameSequence::luma(std::size_t n) const {
    if (!backend_) throw EmptySequence("sequence not initialised");
    return backend_->luma(n);
}

std::vector<std::uint8_t> FrameSequence::frame_bytes(std::size_t n) const {
    if (!backend_) throw EmptySequence("sequence not initialised");
    return backend_->frame_bytes(n);
}

FrameSequence FrameSequence::from_frames(const VideoSpec& spec,
                                         std::vector<std::vector<std::uint8_t>> frames) {
    spec.validate();
    if (frames.empty()) throw EmptySequence("cannot build a sequence with no frames");
    for (const auto& f : frames)
        if (f.size() != spec.frame_size())
            throw InvalidSpec("frame payload size " + std::to_string(f.size()) +
                              " does not match spec frame size " +
                              std::to_string(spec.frame_size()));
    return FrameSequence(std::make_shared<MemoryBackend>(spec, std::move(frames)));
}

FrameSequence FrameSequence::from_luma(const VideoSpec& spec,
                                       const std::vector<LumaFrame>& lumas) {
    spec.validate();
    if (lumas.empty()) throw EmptySequence("cannot build a sequence with no frames");
    std::vector<std::vector<std::uint8_t>> frames;
    frames.reserve(lumas.size());
    for (const auto& l : lumas) {
        if (l.width != spec.width || l.height != spec.height ||
            l.samples.size() != spec.luma_size())
            throw DimensionMismatch("luma plane does not match spec dimensions");
        std::vector<std::uint8_t> f(spec.frame_size(), 128);
        std::copy(l.samples.begin(), l.samples.end(), f.begin());
        frames.push_back(std::move(f));
    }
    return from_frames(spec, std::move(frames));
}

FrameSequence read_yuv420(const std::string& path, const VideoSpec& spec) {
    spec.validate();
    std::ifstream probe(path, std::ios::binary | std::ios::ate);
    if (!probe) throw IoError("cannot open " + path);
    const auto file_size = static_cast<std::size_t>(probe.tellg());
    probe.close();

    const std::size_t frame_size = spec.frame_size();
    const std::size_t remainder = file_size % frame_size;
    if (remainder != 0)
        throw TruncatedStream(path + ": size " + std::to_string(file_size) +
                              " is not a multiple of the " + std::to_string(frame_size) +
                              "-byte frame size (remainder " + std::to_string(remainder) + ")");
    const std::size_t count = file_size / frame_size;
    if (count == 0) throw EmptySequence(path + ": contains no complete frames");

    return FrameSequence(std::make_shared<FileBackend>(path, spec, count));
}

void write_yuv420(const FrameSequence& seq, const std::string& path) {
    if (!seq.valid() || seq.frame_count() == 0)
        throw EmptySequence("refusing to write an empty sequence");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (std::size_t n = 0; n < seq.frame_count(); ++n) {
        const auto bytes = seq.frame_bytes(n);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    if (!out) throw IoError("write failed for " + path);
}

LumaFrame luma(const FrameSequence& seq, std::size_t n) { return seq.luma(n); }

} // namespace vfiqa
