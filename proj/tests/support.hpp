#pragma once

#include "inr4d/metrics.hpp"
#include "inr4d/network.hpp"
#include "inr4d/rng.hpp"
#include "inr4d/volume.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace inr4d::testing {

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("inr4d_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline Volume3D random_volume(const Dims& d, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Volume3D v(d, {1.0, 1.0, 1.0});
    for (auto& x : v.data) x = u(rng);
    return v;
}

inline LabelVolume random_labels(const Dims& d, Rng& rng, int max_class, double p_fg = 0.5) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> cls(1, max_class);
    LabelVolume l(d, {1.0, 1.0, 1.0});
    for (auto& x : l.data) x = u(rng) < p_fg ? cls(rng) : 0;
    return l;
}

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

/// Compares backward() against central differences of the scalar
/// loss sum_i c_i * out_i with batch statistics in train mode.
/// Relative error is |a - n| / max(|a|, |n|, floor). The floor sits above
/// central-difference roundoff (about eps * |loss| / h), so exact zeros pass.
inline GradCheck finite_difference_check(InrModel model, const Eigen::MatrixXd& x, const Eigen::VectorXd& c,
                                         double h = 1e-5, double floor = 1e-5) {
    model.mode = Mode::Train;
    auto loss = [&](InrModel& m) { return c.dot(forward(m, x).output); };
    auto fr = forward(model, x);
    const Eigen::VectorXd analytic = backward(model, *fr.cache, c).values;
    GradCheck out;
    for (std::size_t j = 0; j < model.num_params(); ++j) {
        const double orig = model.params()[j];
        model.mutable_params()[j] = orig + h;
        const double up = loss(model);
        model.mutable_params()[j] = orig - h;
        const double down = loss(model);
        model.mutable_params()[j] = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic(static_cast<Eigen::Index>(j));
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
        out.max_rel_error = std::max(out.max_rel_error, rel);
        ++out.checked;
    }
    return out;
}

/// Independent temporal-consistency oracle: explicit loops, explicit
/// neighbour enumeration, explicit nearest-neighbour pullback.
inline double tc_brute_force(const std::vector<LabelVolume>& labels, const FieldMap& fields, std::size_t m,
                             std::int32_t cls) {
    const long n = static_cast<long>(labels.size());
    double sum = 0.0;
    int count = 0;
    for (long off : {-2L, -1L, 1L, 2L}) {
        const long k = static_cast<long>(m) + off;
        if (k < 0 || k >= n) continue;
        const LabelVolume& src = labels[m];
        const LabelVolume& dst = labels[static_cast<std::size_t>(k)];
        const auto it = fields.find({m, static_cast<std::size_t>(k)});
        const Dims d = src.dims;
        long inter = 0, a = 0, b = 0;
        for (int z = 0; z < d.nz; ++z)
            for (int y = 0; y < d.ny; ++y)
                for (int x = 0; x < d.nx; ++x) {
                    int lbl = src.at(x, y, z);
                    if (it != fields.end()) {
                        const auto& v = it->second.vectors[voxel_index(d, x, y, z)];
                        const long sx = std::lround(x + v[0]), sy = std::lround(y + v[1]), sz = std::lround(z + v[2]);
                        const bool inside = sx >= 0 && sy >= 0 && sz >= 0 && sx < d.nx && sy < d.ny && sz < d.nz;
                        lbl = inside ? src.at(static_cast<int>(sx), static_cast<int>(sy), static_cast<int>(sz)) : 0;
                    }
                    const bool in_a = lbl == cls;
                    const bool in_b = dst.at(x, y, z) == cls;
                    a += in_a;
                    b += in_b;
                    inter += in_a && in_b;
                }
        sum += (a + b == 0) ? 100.0 : 200.0 * static_cast<double>(inter) / static_cast<double>(a + b);
        ++count;
    }
    return sum / count;
}

/// Mean over voxels and interior time points of (v[t+1] - 2 v[t] + v[t-1])^2.
inline double temporal_second_difference(const std::vector<Volume3D>& v) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 1; t + 1 < v.size(); ++t)
        for (std::size_t i = 0; i < v[t].data.size(); ++i) {
            const double d = v[t + 1].data[i] - 2.0 * v[t].data[i] + v[t - 1].data[i];
            s += d * d;
            ++n;
        }
    return s / static_cast<double>(n);
}

} // namespace inr4d::testing
