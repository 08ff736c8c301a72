#include "vfiqa/flow.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace vfiqa {

static_assert(std::endian::native == std::endian::little,
              "flo container is little-endian; byte swapping not implemented");

namespace {

constexpr float kFloTag = 202021.25f;

void require_finite_dims(const MotionField& field) {
    if (field.width <= 0 || field.height <= 0)
        throw InvalidSpec("motion field dimensions must be positive");
    const std::size_t n = static_cast<std::size_t>(field.width) * field.height;
    if (field.u.size() != n || field.v.size() != n)
        throw DimensionMismatch("motion field component size does not match its dimensions");
}

} // namespace

MotionField read_flo(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    in.seekg(0, std::ios::end);
    const std::int64_t file_size = in.tellg();
    in.seekg(0, std::ios::beg);
    if (file_size < 12) throw NotFloFile(path + ": too short for a flo header");

    float tag = 0.f;
    std::int32_t w = 0, h = 0;
    in.read(reinterpret_cast<char*>(&tag), 4);
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    if (!in) throw IoError("read failure on " + path);
    if (tag != kFloTag) throw NotFloFile(path + ": bad sanity tag");
    if (w <= 0 || h <= 0 || w > 1 << 16 || h > 1 << 16)
        throw NotFloFile(path + ": implausible dimensions " + std::to_string(w) + "x" +
                         std::to_string(h));

    const std::size_t pixels = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    const std::int64_t expected = 12 + static_cast<std::int64_t>(pixels) * 8;
    if (file_size != expected)
        throw TruncatedFlow(path + ": header promises " + std::to_string(expected) +
                            " bytes, file holds " + std::to_string(file_size));

    std::vector<float> raw(pixels * 2);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
    if (!in) throw IoError("read failure on " + path);

    MotionField field = MotionField::zeros(w, h);
    for (std::size_t i = 0; i < pixels; ++i) {
        const float u = raw[2 * i];
        const float v = raw[2 * i + 1];
        if (!std::isfinite(u) || !std::isfinite(v))
            throw NonFiniteFlow(path + ": non-finite value at pixel " + std::to_string(i));
        field.u[i] = u;
        field.v[i] = v;
    }
    return field;
}

void write_flo(const MotionField& field, const std::string& path) {
    require_finite_dims(field);
    const std::size_t pixels = field.pixel_count();
    std::vector<float> raw(pixels * 2);
    for (std::size_t i = 0; i < pixels; ++i) {
        if (!std::isfinite(field.u[i]) || !std::isfinite(field.v[i]))
            throw NonFiniteFlow("refusing to write non-finite flow value at pixel " +
                                std::to_string(i));
        raw[2 * i] = static_cast<float>(field.u[i]);
        raw[2 * i + 1] = static_cast<float>(field.v[i]);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const float tag = kFloTag;
    const std::int32_t w = field.width, h = field.height;
    out.write(reinterpret_cast<const char*>(&tag), 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * 4));
    if (!out) throw IoError("write failure on " + path);
}

std::string FloDirectorySource::flo_path(const std::string& dir, std::size_t pair_index) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.flo", pair_index);
    if (dir.empty()) return name;
    return dir.back() == '/' ? dir + name : dir + "/" + name;
}

MotionField FloDirectorySource::field(SequenceSide side, std::size_t pair_index,
                                      const LumaFrame& prev, const LumaFrame&) const {
    const std::string* dir = &distorted_dir_;
    if (side == SequenceSide::reference) {
        if (!reference_dir_)
            throw InvalidSpec("flow source '" + label_ +
                              "' has no reference-side directory configured");
        dir = &*reference_dir_;
    }
    MotionField f = read_flo(flo_path(*dir, pair_index));
    if (f.width != prev.width || f.height != prev.height)
        throw DimensionMismatch(flo_path(*dir, pair_index) + ": field is " +
                                std::to_string(f.width) + "x" + std::to_string(f.height) +
                                ", frames are " + std::to_string(prev.width) + "x" +
                                std::to_string(prev.height));
    return f;
}

} // namespace vfiqa
