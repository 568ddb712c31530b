#pragma once

#include "inr4d/volume.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace inr4d {

struct ManifestEntry {
    std::filesystem::path path;
    double time_weeks = 0.0;
};

/// Parses `<path><TAB><time_weeks>` lines. Relative paths resolve against
/// the manifest's directory; blank lines and `#` comments are skipped.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);
void write_manifest(const std::filesystem::path& manifest, const std::vector<ManifestEntry>& entries);

/// Loads the listed volumes sorted by time. Needs at least two entries with
/// distinct times and identical geometry.
Volume4D load_series(std::vector<ManifestEntry> entries);

/// Maps every voxel affinely to [0, 1] using the series-wide min/max and
/// records that range in intensity_scale.
Volume4D normalize_intensity(const Volume4D& series);

double denormalize_value(double v, const std::pair<double, double>& scale);
Volume3D denormalize(const Volume3D& vol, const std::pair<double, double>& scale);

using Coord3 = std::array<double, 3>;

/// Normalized voxel-centre coordinates in data order. Each axis maps
/// affinely onto [-1, 1]; a single-voxel axis maps to 0.
std::vector<Coord3> coord_grid(const Dims& dims);
double axis_coord(int index, int n);

/// Affine map of gestational age onto [-1, 1] over [t_min, t_max].
struct TimeAxis {
    double t_min = 0.0;
    double t_max = 1.0;

    double normalize(double t) const;
    static TimeAxis of(const std::vector<double>& times);
};

} // namespace inr4d
