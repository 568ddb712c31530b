#pragma once

#include "inr4d/volume.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace inr4d {

double mse(const Volume3D& a, const Volume3D& b);
/// 10 log10(peak^2 / mse); +infinity when the volumes are identical.
double psnr(const Volume3D& a, const Volume3D& b, double peak);

/// Entropy focus criterion of one slice, normalized so that a constant
/// slice scores 1. Intensities enter through their magnitude and 0 ln 0 is
/// taken as 0. Returns nullopt for an all-zero (background) slice.
std::optional<double> efc_slice(std::span<const double> slice);

/// Mean efc_slice over the non-background slices perpendicular to
/// slice_axis (0 = x, 1 = y, 2 = z / axial).
double efc_volume(const Volume3D& vol, int slice_axis = 2);

/// 100 * 2|A n B| / (|A| + |B|) for the voxels labelled class_id; 100 when
/// both sets are empty.
double dice(const LabelVolume& a, const LabelVolume& b, std::int32_t class_id);

/// Per-voxel displacement in voxel units, pointing from the target grid
/// into the source grid.
struct DisplacementField {
    Dims dims;
    Spacing spacing{1.0, 1.0, 1.0};
    std::vector<std::array<double, 3>> vectors;

    static DisplacementField zero(const Dims& dims, const Spacing& spacing);
    void validate() const;
};

/// Nearest-neighbour pullback: output(v) = labels(round(v + field(v))),
/// background when the source position falls outside the grid.
LabelVolume warp_labels(const LabelVolume& labels, const DisplacementField& field);

/// Fields keyed by (m, m'): warps time point m into neighbour m'.
using FieldMap = std::map<std::pair<std::size_t, std::size_t>, DisplacementField>;

/// Temporal consistency of time point m: mean DICE between each neighbour
/// m' in {m-2, m-1, m+1, m+2} (those that exist) and labels[m] warped into
/// m' with fields[(m, m')].
double tc(const std::vector<LabelVolume>& labels, const FieldMap& fields, std::size_t m, std::int32_t class_id);

/// tc with zero displacement for every pair.
double tc_identity(const std::vector<LabelVolume>& labels, std::size_t m, std::int32_t class_id);

/// Indices of the TC neighbours of m among n time points.
std::vector<std::size_t> tc_neighbours(std::size_t m, std::size_t n);

/// Raw little-endian field file:
///   "DFLD" | u32 version (1) | i32 nx, ny, nz | f64 sx, sy, sz |
///   f32 (dx, dy, dz) per voxel in data order.
void write_field(const DisplacementField& field, const std::filesystem::path& path);
DisplacementField read_field(const std::filesystem::path& path);

struct MetricsReport {
    std::vector<double> times;
    std::vector<double> efc;
    std::map<std::int32_t, std::vector<double>> tc;   // class -> per time
    std::map<std::int32_t, std::vector<double>> dice; // class -> per time, vs reference labels
    std::vector<double> mse;                          // per time, vs reference series
    std::optional<double> global_mse;
    std::optional<double> global_psnr;
    double psnr_peak = 1.0;

    void validate() const;
};

/// Tab-separated table: a header row of time points then one row per
/// metric (EFC, TC per class, DICE per class, MSE), each with a trailing
/// mean column; global MSE / PSNR follow as two-column rows.
void write_report(const MetricsReport& report, const std::filesystem::path& path);
std::string format_report(const MetricsReport& report);

} // namespace inr4d
