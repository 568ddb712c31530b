#include "inr4d/series.hpp"

#include "inr4d/error.hpp"
#include "inr4d/nifti.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace inr4d {

namespace fs = std::filesystem;

std::vector<ManifestEntry> read_manifest(const fs::path& manifest) {
    std::ifstream in(manifest);
    require(in.good(), "cannot open manifest " + manifest.string());
    const fs::path base = manifest.parent_path();
    std::vector<ManifestEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto tab = line.rfind('\t');
        require(tab != std::string::npos && tab > 0,
                manifest.string() + ":" + std::to_string(lineno) + ": expected <path><TAB><time_weeks>");
        const std::string time_text = line.substr(tab + 1);
        double t = 0.0;
        auto [ptr, ec] = std::from_chars(time_text.data(), time_text.data() + time_text.size(), t);
        require(ec == std::errc() && ptr == time_text.data() + time_text.size() && std::isfinite(t),
                manifest.string() + ":" + std::to_string(lineno) + ": bad time '" + time_text + "'");
        fs::path p = line.substr(0, tab);
        if (p.is_relative()) p = base / p;
        out.push_back({p, t});
    }
    return out;
}

void write_manifest(const fs::path& manifest, const std::vector<ManifestEntry>& entries) {
    if (manifest.has_parent_path()) fs::create_directories(manifest.parent_path());
    std::ofstream out(manifest);
    require(out.good(), "I/O failure: cannot write manifest " + manifest.string());
    // Entries under the manifest's directory are stored relative to it.
    const fs::path base = fs::absolute(manifest).parent_path();
    for (const auto& e : entries) {
        fs::path p = fs::absolute(e.path).lexically_normal();
        auto rel = p.lexically_relative(base);
        if (!rel.empty() && *rel.begin() != "..") p = rel;
        std::ostringstream t;
        t.precision(std::numeric_limits<double>::max_digits10);
        t << e.time_weeks;
        out << p.string() << '\t' << t.str() << '\n';
    }
}

Volume4D load_series(std::vector<ManifestEntry> entries) {
    require(entries.size() >= 2, "series needs at least two volumes");
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.time_weeks < b.time_weeks; });
    for (std::size_t i = 1; i < entries.size(); ++i)
        require(entries[i].time_weeks != entries[i - 1].time_weeks,
                "duplicate time " + std::to_string(entries[i].time_weeks) + " in series");
    Volume4D series;
    for (const auto& e : entries) {
        Volume3D v = read_nifti(e.path);
        if (!series.volumes.empty()) {
            require(v.dims == series.dims(), "dim mismatch: " + e.path.string() + " differs from the first volume");
            for (int a = 0; a < 3; ++a)
                require(std::fabs(v.spacing[a] - series.spacing()[a]) <= 1e-6 * series.spacing()[a],
                        "spacing mismatch: " + e.path.string());
            v.spacing = series.spacing();
        }
        series.volumes.push_back(std::move(v));
        series.times.push_back(e.time_weeks);
    }
    series.validate();
    return series;
}

Volume4D normalize_intensity(const Volume4D& series) {
    series.validate();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& v : series.volumes)
        for (double x : v.data) {
            require(std::isfinite(x), "non-finite intensity in series");
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    require(hi > lo, "degenerate intensity range: series is constant");
    Volume4D out = series;
    const double range = hi - lo;
    for (auto& v : out.volumes)
        for (double& x : v.data) x = (x - lo) / range;
    out.intensity_scale = {lo, hi};
    return out;
}

double denormalize_value(double v, const std::pair<double, double>& scale) {
    return v * (scale.second - scale.first) + scale.first;
}

Volume3D denormalize(const Volume3D& vol, const std::pair<double, double>& scale) {
    Volume3D out = vol;
    for (double& x : out.data) x = denormalize_value(x, scale);
    return out;
}

double axis_coord(int index, int n) {
    if (n <= 1) return 0.0;
    // integer numerator keeps the grid exactly antisymmetric
    return static_cast<double>(2 * index - (n - 1)) / static_cast<double>(n - 1);
}

std::vector<Coord3> coord_grid(const Dims& dims) {
    require(dims.valid(), "invalid dims for coordinate grid");
    std::vector<Coord3> out;
    out.reserve(dims.count());
    for (int z = 0; z < dims.nz; ++z)
        for (int y = 0; y < dims.ny; ++y)
            for (int x = 0; x < dims.nx; ++x)
                out.push_back({axis_coord(x, dims.nx), axis_coord(y, dims.ny), axis_coord(z, dims.nz)});
    return out;
}

double TimeAxis::normalize(double t) const {
    if (t_max <= t_min) return 0.0;
    return -1.0 + 2.0 * (t - t_min) / (t_max - t_min);
}

TimeAxis TimeAxis::of(const std::vector<double>& times) {
    require(!times.empty(), "empty time list");
    const auto [lo, hi] = std::minmax_element(times.begin(), times.end());
    return {*lo, *hi};
}

} // namespace inr4d
