#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace inr4d {

/// Voxel counts along x, y, z.
struct Dims {
    int nx = 0;
    int ny = 0;
    int nz = 0;

    std::size_t count() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }
    int operator[](int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
    bool valid() const { return nx > 0 && ny > 0 && nz > 0; }
    bool operator==(const Dims&) const = default;
};

/// Millimetres per voxel along x, y, z.
using Spacing = std::array<double, 3>;

/// On-disk scalar type a volume was read from.
enum class DType : std::int16_t { UInt8 = 2, Int16 = 4, Float32 = 16, Float64 = 64 };

/// Linear voxel index, x fastest and z slowest.
inline std::size_t voxel_index(const Dims& d, int x, int y, int z) {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(d.nx) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(d.ny) * static_cast<std::size_t>(z));
}

struct Volume3D {
    Dims dims;
    Spacing spacing{1.0, 1.0, 1.0};
    std::vector<double> data;
    DType dtype = DType::Float32;

    Volume3D() = default;
    Volume3D(Dims d, Spacing s, double fill = 0.0);
    Volume3D(Dims d, Spacing s, std::vector<double> values);

    double& at(int x, int y, int z) { return data[voxel_index(dims, x, y, z)]; }
    double at(int x, int y, int z) const { return data[voxel_index(dims, x, y, z)]; }

    /// Throws when data length or spacing break the type's invariants.
    void validate() const;
};

/// Integer class map sharing the Volume3D geometry; 0 is background.
struct LabelVolume {
    Dims dims;
    Spacing spacing{1.0, 1.0, 1.0};
    std::vector<std::int32_t> data;

    LabelVolume() = default;
    LabelVolume(Dims d, Spacing s, std::int32_t fill = 0);

    std::int32_t& at(int x, int y, int z) { return data[voxel_index(dims, x, y, z)]; }
    std::int32_t at(int x, int y, int z) const { return data[voxel_index(dims, x, y, z)]; }

    /// Checks geometry and that every class id lies in [0, max_class].
    void validate(std::int32_t max_class) const;
};

/// Ordered series of co-registered volumes with their gestational ages.
struct Volume4D {
    std::vector<Volume3D> volumes;
    std::vector<double> times;
    /// (global_min, global_max) of the un-normalized series; (0, 1) means identity.
    std::pair<double, double> intensity_scale{0.0, 1.0};

    std::size_t size() const { return volumes.size(); }
    const Dims& dims() const { return volumes.front().dims; }
    const Spacing& spacing() const { return volumes.front().spacing; }

    /// Throws on heterogeneous geometry or non-increasing times.
    void validate() const;
};

/// Labels from thresholding: class 1 where intensity >= threshold.
LabelVolume threshold_labels(const Volume3D& vol, double threshold);

} // namespace inr4d
