#include "inr4d/nifti.hpp"

#include "inr4d/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

namespace inr4d {

namespace {

constexpr int kHeaderSize = 348;
constexpr int kVoxOffset = 352;

// Byte offsets into the 348-byte NIfTI-1 header.
namespace off {
constexpr int sizeof_hdr = 0;
constexpr int dim = 40;
constexpr int datatype = 70;
constexpr int bitpix = 72;
constexpr int pixdim = 76;
constexpr int vox_offset = 108;
constexpr int scl_slope = 112;
constexpr int scl_inter = 116;
constexpr int xyzt_units = 123;
constexpr int descrip = 148;
constexpr int qform_code = 252;
constexpr int sform_code = 254;
constexpr int srow_x = 280;
constexpr int magic = 344;
} // namespace off

static_assert(std::endian::native == std::endian::little, "NIfTI writer assumes a little-endian host");

template <typename T>
T byteswap_value(T v) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

class HeaderView {
public:
    HeaderView(const unsigned char* raw, bool swapped) : raw_(raw), swapped_(swapped) {}

    template <typename T>
    T get(int offset) const {
        T v;
        std::memcpy(&v, raw_ + offset, sizeof(T));
        return swapped_ ? byteswap_value(v) : v;
    }

private:
    const unsigned char* raw_;
    bool swapped_;
};

template <typename T>
void put(std::vector<unsigned char>& buf, int offset, T v) {
    std::memcpy(buf.data() + offset, &v, sizeof(T));
}

struct GzCloser {
    void operator()(gzFile_s* f) const { gzclose(f); }
};
using GzHandle = std::unique_ptr<gzFile_s, GzCloser>;

// gzread is transparent for uncompressed files, so one path serves both.
std::vector<unsigned char> slurp(const std::filesystem::path& path) {
    require(std::filesystem::exists(path), "file not found: " + path.string());
    GzHandle f(gzopen(path.c_str(), "rb"));
    require(f != nullptr, "cannot open " + path.string());
    std::vector<unsigned char> out;
    std::vector<unsigned char> chunk(1 << 20);
    for (;;) {
        int n = gzread(f.get(), chunk.data(), static_cast<unsigned>(chunk.size()));
        if (n < 0) fail("corrupt file: " + path.string() + " (decompression failed)");
        if (n == 0) break;
        out.insert(out.end(), chunk.begin(), chunk.begin() + n);
    }
    return out;
}

bool has_gz_suffix(const std::filesystem::path& path) { return path.extension() == ".gz"; }

void spill(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const char* mode = has_gz_suffix(path) ? "wb6" : "wbT";
    GzHandle f(gzopen(path.c_str(), mode));
    require(f != nullptr, "I/O failure: cannot open " + path.string() + " for writing");
    std::size_t done = 0;
    while (done < bytes.size()) {
        auto n = static_cast<unsigned>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
        require(gzwrite(f.get(), bytes.data() + done, n) == static_cast<int>(n),
                "I/O failure: short write to " + path.string());
        done += n;
    }
    require(gzclose(f.release()) == Z_OK, "I/O failure: cannot finalize " + path.string());
}

int bytes_per_voxel(DType t) {
    switch (t) {
    case DType::UInt8: return 1;
    case DType::Int16: return 2;
    case DType::Float32: return 4;
    case DType::Float64: return 8;
    }
    return 0;
}

std::vector<unsigned char> encode(Dims dims, const Spacing& spacing, DType type, const void* payload,
                                  std::size_t payload_bytes) {
    std::vector<unsigned char> buf(kVoxOffset + payload_bytes, 0);
    put<std::int32_t>(buf, off::sizeof_hdr, kHeaderSize);
    const std::int16_t dim[8] = {3, static_cast<std::int16_t>(dims.nx), static_cast<std::int16_t>(dims.ny),
                                 static_cast<std::int16_t>(dims.nz), 1, 1, 1, 1};
    std::memcpy(buf.data() + off::dim, dim, sizeof dim);
    put<std::int16_t>(buf, off::datatype, static_cast<std::int16_t>(type));
    put<std::int16_t>(buf, off::bitpix, static_cast<std::int16_t>(8 * bytes_per_voxel(type)));
    const float pixdim[8] = {1.0f, static_cast<float>(spacing[0]), static_cast<float>(spacing[1]),
                             static_cast<float>(spacing[2]), 1.0f, 1.0f, 1.0f, 1.0f};
    std::memcpy(buf.data() + off::pixdim, pixdim, sizeof pixdim);
    put<float>(buf, off::vox_offset, static_cast<float>(kVoxOffset));
    put<float>(buf, off::scl_slope, 0.0f);
    put<float>(buf, off::scl_inter, 0.0f);
    buf[off::xyzt_units] = 2 | 8; // mm, seconds
    const char descrip[] = "inr4d";
    std::memcpy(buf.data() + off::descrip, descrip, sizeof descrip);
    put<std::int16_t>(buf, off::qform_code, 0);
    put<std::int16_t>(buf, off::sform_code, 1);
    for (int r = 0; r < 3; ++r) {
        float row[4] = {0.0f, 0.0f, 0.0f, 0.0f};
        row[r] = static_cast<float>(spacing[r]);
        std::memcpy(buf.data() + off::srow_x + 16 * r, row, sizeof row);
    }
    std::memcpy(buf.data() + off::magic, "n+1\0", 4);
    std::memcpy(buf.data() + kVoxOffset, payload, payload_bytes);
    return buf;
}

void check_writable(const Dims& dims) {
    require(dims.valid(), "invalid dims: zero-sized axis cannot be written");
    require(dims.nx <= 32767 && dims.ny <= 32767 && dims.nz <= 32767, "dims exceed NIfTI-1 int16 limit");
}

} // namespace

Volume3D read_nifti(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    require(bytes.size() >= kHeaderSize, "not NIfTI-1: " + path.string() + " is shorter than a header");

    std::int32_t hdr_size;
    std::memcpy(&hdr_size, bytes.data(), 4);
    bool swapped = false;
    if (hdr_size != kHeaderSize) {
        require(byteswap_value(hdr_size) == kHeaderSize, "not NIfTI-1: bad header size in " + path.string());
        swapped = true;
    }
    const HeaderView h(bytes.data(), swapped);

    const char* magic = reinterpret_cast<const char*>(bytes.data() + off::magic);
    if (std::memcmp(magic, "ni1\0", 4) == 0)
        fail("unsupported layout: two-file (.hdr/.img) NIfTI-1 in " + path.string());
    require(std::memcmp(magic, "n+1\0", 4) == 0, "not NIfTI-1: bad magic in " + path.string());

    std::int16_t dim[8];
    for (int i = 0; i < 8; ++i) dim[i] = h.get<std::int16_t>(off::dim + 2 * i);
    require(dim[0] == 3, "unsupported layout: dim[0] = " + std::to_string(dim[0]) + " (need 3 spatial dims)");
    require(dim[1] > 0 && dim[2] > 0 && dim[3] > 0, "unsupported layout: non-positive dim");

    const auto code = h.get<std::int16_t>(off::datatype);
    DType type;
    switch (code) {
    case 2: type = DType::UInt8; break;
    case 4: type = DType::Int16; break;
    case 16: type = DType::Float32; break;
    case 64: type = DType::Float64; break;
    default: fail("unsupported layout: datatype code " + std::to_string(code));
    }

    Spacing spacing;
    for (int i = 0; i < 3; ++i) {
        double s = std::fabs(static_cast<double>(h.get<float>(off::pixdim + 4 * (i + 1))));
        spacing[i] = (s > 0.0 && std::isfinite(s)) ? s : 1.0;
    }

    const Dims dims{dim[1], dim[2], dim[3]};
    const std::size_t n = dims.count();
    const auto vox_offset = static_cast<std::size_t>(h.get<float>(off::vox_offset));
    require(vox_offset >= kHeaderSize, "corrupt file: vox_offset inside header");
    const std::size_t need = vox_offset + n * static_cast<std::size_t>(bytes_per_voxel(type));
    require(bytes.size() >= need, "corrupt file: truncated payload in " + path.string() + " (have " +
                                      std::to_string(bytes.size()) + " bytes, need " + std::to_string(need) + ")");

    const float slope = h.get<float>(off::scl_slope);
    const float inter = h.get<float>(off::scl_inter);
    const bool scale = slope != 0.0f && std::isfinite(slope);

    Volume3D vol(dims, spacing);
    vol.dtype = type;
    const unsigned char* p = bytes.data() + vox_offset;
    auto load = [&]<typename T>(T) {
        for (std::size_t i = 0; i < n; ++i) {
            T v;
            std::memcpy(&v, p + i * sizeof(T), sizeof(T));
            if (swapped) v = byteswap_value(v);
            vol.data[i] = static_cast<double>(v);
        }
    };
    switch (type) {
    case DType::UInt8: load(std::uint8_t{}); break;
    case DType::Int16: load(std::int16_t{}); break;
    case DType::Float32: load(float{}); break;
    case DType::Float64: load(double{}); break;
    }
    if (scale) {
        const double s = slope;
        const double b = std::isfinite(inter) ? inter : 0.0;
        for (auto& v : vol.data) v = v * s + b;
    }
    return vol;
}

void write_nifti(const Volume3D& vol, const std::filesystem::path& path) {
    check_writable(vol.dims);
    vol.validate();
    std::vector<float> payload(vol.data.begin(), vol.data.end());
    spill(path, encode(vol.dims, vol.spacing, DType::Float32, payload.data(), payload.size() * sizeof(float)));
}

LabelVolume read_labels(const std::filesystem::path& path) {
    const Volume3D vol = read_nifti(path);
    LabelVolume out(vol.dims, vol.spacing);
    for (std::size_t i = 0; i < vol.data.size(); ++i) {
        const double v = vol.data[i];
        require(v >= 0.0 && v == std::round(v), "label file " + path.string() + " holds a non-integer or negative id");
        out.data[i] = static_cast<std::int32_t>(v);
    }
    return out;
}

void write_labels(const LabelVolume& labels, const std::filesystem::path& path) {
    check_writable(labels.dims);
    const auto max_id = labels.data.empty() ? 0 : *std::max_element(labels.data.begin(), labels.data.end());
    labels.validate(std::max<std::int32_t>(max_id, 0));
    if (max_id <= 255) {
        std::vector<std::uint8_t> payload(labels.data.begin(), labels.data.end());
        spill(path, encode(labels.dims, labels.spacing, DType::UInt8, payload.data(), payload.size()));
    } else {
        require(max_id <= 32767, "label id exceeds int16 range");
        std::vector<std::int16_t> payload(labels.data.begin(), labels.data.end());
        spill(path, encode(labels.dims, labels.spacing, DType::Int16, payload.data(), payload.size() * 2));
    }
}

} // namespace inr4d
