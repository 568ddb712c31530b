#include "inr4d/volume.hpp"

#include "inr4d/error.hpp"

#include <string>

namespace inr4d {

namespace {

void check_geometry(const Dims& d, const Spacing& s) {
    require(d.valid(), "invalid dims: every axis needs at least one voxel");
    for (double v : s) require(v > 0.0, "invalid spacing: components must be positive");
}

} // namespace

Volume3D::Volume3D(Dims d, Spacing s, double fill) : dims(d), spacing(s) {
    check_geometry(d, s);
    data.assign(d.count(), fill);
}

Volume3D::Volume3D(Dims d, Spacing s, std::vector<double> values)
    : dims(d), spacing(s), data(std::move(values)) {
    validate();
}

void Volume3D::validate() const {
    check_geometry(dims, spacing);
    require(data.size() == dims.count(),
            "data length " + std::to_string(data.size()) + " does not match dims (" +
                std::to_string(dims.count()) + ")");
}

LabelVolume::LabelVolume(Dims d, Spacing s, std::int32_t fill) : dims(d), spacing(s) {
    check_geometry(d, s);
    data.assign(d.count(), fill);
}

void LabelVolume::validate(std::int32_t max_class) const {
    check_geometry(dims, spacing);
    require(data.size() == dims.count(), "label data length does not match dims");
    for (auto v : data)
        require(v >= 0 && v <= max_class, "label id " + std::to_string(v) + " outside [0, " +
                                              std::to_string(max_class) + "]");
}

void Volume4D::validate() const {
    require(!volumes.empty(), "empty series");
    require(volumes.size() == times.size(), "series has mismatched volume and time counts");
    for (const auto& v : volumes) {
        v.validate();
        require(v.dims == volumes.front().dims, "dim mismatch within series");
        require(v.spacing == volumes.front().spacing, "spacing mismatch within series");
    }
    for (std::size_t i = 1; i < times.size(); ++i)
        require(times[i] > times[i - 1], "series times must be strictly increasing");
}

LabelVolume threshold_labels(const Volume3D& vol, double threshold) {
    LabelVolume out(vol.dims, vol.spacing);
    for (std::size_t i = 0; i < vol.data.size(); ++i) out.data[i] = vol.data[i] >= threshold ? 1 : 0;
    return out;
}

} // namespace inr4d
