#pragma once

#include "inr4d/volume.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace inr4d {

/// Growing two-compartment ellipsoid: an outer "brain" of tissue intensity
/// containing an inner "ventricle" of a brighter intensity. Radii grow
/// linearly in time (radius = r0 + r1 * u with u in [0, 1] across the
/// time range) and are scaled per axis by the axis ratios. Each boundary
/// falls off smoothly over edge_width voxels outside the compartment.
struct PhantomConfig {
    Dims dims{32, 32, 32};
    Spacing spacing{1.0, 1.0, 1.0};
    int n_times = 10;
    double t_start = 21.0;
    double t_end = 30.0;

    double outer_r0 = 10.0;
    double outer_r1 = 3.0;
    std::array<double, 3> outer_axes{1.0, 0.9, 0.8};
    double inner_r0 = 4.5;
    double inner_r1 = 3.0;
    std::array<double, 3> inner_axes{1.0, 0.75, 0.9};
    double edge_width = 1.5;

    double background_level = 0.0;
    double tissue_level = 0.5;
    double inner_level = 1.0;

    /// Std-dev (voxels) of the independent per-time inner radius error.
    double structural_jitter_sigma = 0.0;
    /// Std-dev of additive Gaussian voxel noise.
    double intensity_noise_sigma = 0.0;
    std::uint64_t seed = 0;

    std::vector<double> times() const;
    double outer_radius(double t) const;
    double inner_radius(double t) const;
    void validate() const;
};

struct PhantomSeries {
    std::vector<Volume3D> clean;
    std::vector<Volume3D> noisy;
    std::vector<LabelVolume> labels; // inner structure of the clean geometry, class 1
    std::vector<double> times;
    std::vector<double> inner_radius_noisy; // radius actually rendered in the noisy series
};

PhantomSeries generate(const PhantomConfig& cfg);

} // namespace inr4d
