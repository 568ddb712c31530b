#include "inr4d/phantom.hpp"

#include "inr4d/error.hpp"
#include "inr4d/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace inr4d {

namespace {

constexpr std::uint64_t kJitterStream = 0x7177;
constexpr std::uint64_t kNoiseStream = 0x9015;
constexpr double kMinInnerRadius = 0.5;

// 1 inside the ellipsoid, raised-cosine falloff to 0 over `width` voxels.
double compartment(double rho, double radius, double width) {
    if (rho <= 1.0) return 1.0;
    const double s = (rho - 1.0) * radius / width;
    if (s >= 1.0) return 0.0;
    return 0.5 * (1.0 + std::cos(std::numbers::pi * s));
}

double ellipsoid_rho(double dx, double dy, double dz, double radius, const std::array<double, 3>& axes) {
    const double ax = radius * axes[0];
    const double ay = radius * axes[1];
    const double az = radius * axes[2];
    return std::sqrt((dx / ax) * (dx / ax) + (dy / ay) * (dy / ay) + (dz / az) * (dz / az));
}

struct Rendered {
    Volume3D vol;
    LabelVolume labels;
};

Rendered render(const PhantomConfig& cfg, double outer_r, double inner_r) {
    Rendered r{Volume3D(cfg.dims, cfg.spacing), LabelVolume(cfg.dims, cfg.spacing)};
    const double cx = 0.5 * (cfg.dims.nx - 1);
    const double cy = 0.5 * (cfg.dims.ny - 1);
    const double cz = 0.5 * (cfg.dims.nz - 1);
    const double tissue = cfg.tissue_level - cfg.background_level;
    const double inner = cfg.inner_level - cfg.tissue_level;
    for (int z = 0; z < cfg.dims.nz; ++z)
        for (int y = 0; y < cfg.dims.ny; ++y)
            for (int x = 0; x < cfg.dims.nx; ++x) {
                const double dx = x - cx, dy = y - cy, dz = z - cz;
                const double rho_o = ellipsoid_rho(dx, dy, dz, outer_r, cfg.outer_axes);
                const double rho_i = ellipsoid_rho(dx, dy, dz, inner_r, cfg.inner_axes);
                const double w_o = compartment(rho_o, outer_r, cfg.edge_width);
                const double w_i = compartment(rho_i, inner_r, cfg.edge_width);
                r.vol.at(x, y, z) = cfg.background_level + tissue * w_o + inner * w_i;
                r.labels.at(x, y, z) = rho_i <= 1.0 ? 1 : 0;
            }
    return r;
}

} // namespace

std::vector<double> PhantomConfig::times() const {
    std::vector<double> t(static_cast<std::size_t>(n_times));
    for (int i = 0; i < n_times; ++i)
        t[static_cast<std::size_t>(i)] =
            n_times == 1 ? t_start : t_start + (t_end - t_start) * static_cast<double>(i) / (n_times - 1);
    return t;
}

double PhantomConfig::outer_radius(double t) const {
    const double u = t_end > t_start ? (t - t_start) / (t_end - t_start) : 0.0;
    return outer_r0 + outer_r1 * u;
}

double PhantomConfig::inner_radius(double t) const {
    const double u = t_end > t_start ? (t - t_start) / (t_end - t_start) : 0.0;
    return inner_r0 + inner_r1 * u;
}

void PhantomConfig::validate() const {
    require(dims.valid(), "phantom: invalid dims");
    for (double s : spacing) require(s > 0.0, "phantom: spacing must be positive");
    require(n_times >= 1, "phantom: need at least one time point");
    require(n_times == 1 || t_end > t_start, "phantom: t_end must exceed t_start");
    require(structural_jitter_sigma >= 0.0 && intensity_noise_sigma >= 0.0, "phantom: sigmas must be >= 0");
    require(edge_width > 0.0, "phantom: edge width must be positive");
    for (int a = 0; a < 3; ++a) require(outer_axes[a] > 0.0 && inner_axes[a] > 0.0, "phantom: axis ratios must be positive");
    for (double t : {t_start, t_end}) {
        const double ro = outer_radius(t);
        const double ri = inner_radius(t);
        require(ro > 0.0 && ri > 0.0, "phantom: radii must stay positive over the time range");
        for (int a = 0; a < 3; ++a) {
            const double half = 0.5 * (dims[a] - 1);
            require(ro * outer_axes[a] + edge_width <= half,
                    "phantom: outer radius escapes the grid along axis " + std::to_string(a));
            require(ri * inner_axes[a] + edge_width <= ro * outer_axes[a],
                    "phantom: inner structure escapes the outer ellipsoid along axis " + std::to_string(a));
        }
    }
}

PhantomSeries generate(const PhantomConfig& cfg) {
    cfg.validate();
    PhantomSeries out;
    out.times = cfg.times();
    for (std::size_t i = 0; i < out.times.size(); ++i) {
        const double t = out.times[i];
        const double ro = cfg.outer_radius(t);
        const double ri = cfg.inner_radius(t);
        Rendered clean = render(cfg, ro, ri);

        double ri_noisy = ri;
        if (cfg.structural_jitter_sigma > 0.0) {
            Rng rng(derive_seed(cfg.seed, {kJitterStream, i}));
            std::normal_distribution<double> jitter(0.0, cfg.structural_jitter_sigma);
            ri_noisy = std::max(kMinInnerRadius, ri + jitter(rng));
        }
        Volume3D noisy = ri_noisy == ri ? clean.vol : render(cfg, ro, ri_noisy).vol;
        if (cfg.intensity_noise_sigma > 0.0) {
            Rng rng(derive_seed(cfg.seed, {kNoiseStream, i}));
            std::normal_distribution<double> noise(0.0, cfg.intensity_noise_sigma);
            for (double& v : noisy.data) v += noise(rng);
        }
        out.clean.push_back(std::move(clean.vol));
        out.labels.push_back(std::move(clean.labels));
        out.noisy.push_back(std::move(noisy));
        out.inner_radius_noisy.push_back(ri_noisy);
    }
    return out;
}

} // namespace inr4d
