#pragma once

#include "inr4d/volume.hpp"

#include <filesystem>

namespace inr4d {

/// Reads a single-file NIfTI-1 volume (.nii or gzip-compressed .nii.gz).
///
/// Only 3D scalar images of type uint8, int16, float32 or float64 are
/// accepted. Dims and spacing come from dim[1..3] and pixdim[1..3];
/// scl_slope / scl_inter are applied when the slope is nonzero.
/// Byte-swapped (big-endian) headers are handled.
Volume3D read_nifti(const std::filesystem::path& path);

/// Writes a float32 single-file NIfTI-1. A ".gz" suffix selects gzip.
void write_nifti(const Volume3D& vol, const std::filesystem::path& path);

/// Label maps are stored as uint8 (or int16 when ids exceed 255).
LabelVolume read_labels(const std::filesystem::path& path);
void write_labels(const LabelVolume& labels, const std::filesystem::path& path);

} // namespace inr4d
