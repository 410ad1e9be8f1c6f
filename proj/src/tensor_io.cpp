#include "cact/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

namespace cact {

namespace {

constexpr unsigned char kMagic[4] = {0x43, 0x54, 0x46, 0x31};  // "CTF1"

void put_u32_le(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) |
           (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const FeatureTensor& t) {
    if (t.ndim() == 0) throw ShapeError("write_tensor: tensor has no dims");
    if (t.ndim() > 255)
        throw ShapeError("write_tensor: ndim " + std::to_string(t.ndim()) +
                         " exceeds format limit 255");
    std::vector<unsigned char> buf;
    buf.reserve(5 + 4 * t.ndim() + 4 * t.size());
    buf.insert(buf.end(), kMagic, kMagic + 4);
    buf.push_back(static_cast<unsigned char>(t.ndim()));
    for (std::size_t d : t.dims) {
        if (d > std::numeric_limits<std::uint32_t>::max())
            throw ShapeError("write_tensor: extent " + std::to_string(d) +
                             " exceeds u32");
        put_u32_le(buf, static_cast<std::uint32_t>(d));
    }
    for (float v : t.data) put_u32_le(buf, std::bit_cast<std::uint32_t>(v));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot open for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
    if (!f) throw FormatError("write failed: " + path.string());
}

FeatureTensor read_tensor(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open: " + path.string());
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());

    auto fail = [&](std::size_t offset, const std::string& what) -> void {
        throw FormatError(path.string() + ": " + what + " (byte offset " +
                          std::to_string(offset) + ")");
    };

    if (buf.size() < 4) fail(buf.size(), "truncated before magic");
    if (std::memcmp(buf.data(), kMagic, 3) != 0) fail(0, "bad magic");
    if (buf[3] != kMagic[3])
        fail(3, "unsupported CTF version '" + std::string(1, char(buf[3])) +
                    "', expected '1'");
    if (buf.size() < 5) fail(4, "truncated before ndim");
    const std::size_t ndim = buf[4];
    if (ndim == 0) fail(4, "ndim must be >= 1");

    const std::size_t header = 5 + 4 * ndim;
    if (buf.size() < header)
        fail(buf.size(), "truncated in extents: expected " +
                             std::to_string(header) + " header bytes, got " +
                             std::to_string(buf.size()));
    std::vector<std::size_t> dims(ndim);
    std::size_t count = 1;
    for (std::size_t i = 0; i < ndim; ++i) {
        const std::uint32_t d = get_u32_le(buf.data() + 5 + 4 * i);
        if (d == 0) fail(5 + 4 * i, "zero extent");
        if (d > std::numeric_limits<std::size_t>::max() / count)
            fail(5 + 4 * i, "extent product overflow");
        dims[i] = d;
        count *= d;
    }

    const std::size_t expected = header + 4 * count;
    if (buf.size() != expected)
        fail(buf.size(), "payload size mismatch: expected " +
                             std::to_string(expected) + " bytes, got " +
                             std::to_string(buf.size()));

    std::vector<float> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        const float v =
            std::bit_cast<float>(get_u32_le(buf.data() + header + 4 * i));
        if (!std::isfinite(v))
            fail(header + 4 * i, "non-finite value at element " + std::to_string(i));
        data[i] = v;
    }
    return FeatureTensor(std::move(dims), std::move(data));
}

}  // namespace cact
