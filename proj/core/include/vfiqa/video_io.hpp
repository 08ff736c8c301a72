#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vfiqa/errors.hpp"

namespace vfiqa {

// Frame rate carried as an exact rational. Metadata only; no arithmetic in
// the metric path depends on it.
struct Rational {
    long long num = 30;
    long long den = 1;

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const;

    // Accepts "30", "29.97" and "30000/1001".
    static Rational parse(const std::string& text);

    bool operator==(const Rational&) const = default;
};

// Geometry of a raw I420 stream. Raw YUV has no header, so this always comes
// from the CLI or a manifest.
struct VideoSpec {
    int width = 0;
    int height = 0;
    Rational frame_rate{30, 1};
    // bit depth is fixed at 8

    std::size_t luma_size() const { return static_cast<std::size_t>(width) * height; }
    std::size_t chroma_size() const { return luma_size() / 4; }
    std::size_t frame_size() const { return luma_size() * 3 / 2; }

    // Throws InvalidSpec unless width/height are positive and even.
    void validate() const;
};

// A single 8-bit Y plane, row major.
struct LumaFrame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> samples;

    std::uint8_t at(int x, int y) const {
        return samples[static_cast<std::size_t>(y) * width + x];
    }
    std::size_t pixel_count() const { return samples.size(); }
};

// An ordered run of I420 frames sharing one VideoSpec. Cheap to copy; the
// backing store is shared and immutable. File-backed sequences fetch frames
// lazily (one frame at a time) and serialize the underlying reads, so
// concurrent access from scoring workers is safe.
class FrameSequence {
public:
    class Backend;

    FrameSequence() = default;

    const VideoSpec& spec() const;
    std::size_t frame_count() const;
    bool valid() const { return backend_ != nullptr; }

    // Y plane of frame n, untouched by chroma. Thread safe.
    LumaFrame luma(std::size_t n) const;

    // Full I420 payload of frame n (Y, then U, then V). Thread safe.
    std::vector<std::uint8_t> frame_bytes(std::size_t n) const;

    // Builds an in-memory sequence from complete I420 frame payloads.
    static FrameSequence from_frames(const VideoSpec& spec,
                                     std::vector<std::vector<std::uint8_t>> frames);

    // Builds an in-memory sequence from Y planes; chroma is flat 128.
    static FrameSequence from_luma(const VideoSpec& spec,
                                   const std::vector<LumaFrame>& lumas);

private:
    explicit FrameSequence(std::shared_ptr<const Backend> backend)
        : backend_(std::move(backend)) {}

    friend FrameSequence read_yuv420(const std::string& path, const VideoSpec& spec);

    std::shared_ptr<const Backend> backend_;
};

// Opens a raw planar YUV420 (I420) file. The file size must be an exact
// multiple of the frame size; otherwise TruncatedStream names the remainder.
FrameSequence read_yuv420(const std::string& path, const VideoSpec& spec);

// Writes the sequence back out as raw I420, bit-exactly.
void write_yuv420(const FrameSequence& seq, const std::string& path);

// Free-function spelling of FrameSequence::luma.
LumaFrame luma(const FrameSequence& seq, std::size_t n);

} // namespace vfiqa
