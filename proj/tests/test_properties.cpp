// Randomized invariants. Each property draws its cases from a seeded
// generator so failures replay exactly.
#include "inr4d/encoding.hpp"
#include "inr4d/metrics.hpp"
#include "inr4d/nifti.hpp"
#include "inr4d/optimizer.hpp"
#include "inr4d/series.hpp"
#include "inr4d/training.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace inr4d;

namespace {

struct Gen {
    Rng rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    Dims dims(int lo, int hi) { return {integer(lo, hi), integer(lo, hi), integer(lo, hi)}; }
    std::vector<double> increasing(int n) {
        std::vector<double> t{real(0, 50)};
        while (static_cast<int>(t.size()) < n) t.push_back(t.back() + real(0.1, 3.0));
        return t;
    }
    MlpConfig mlp(int input_dim) {
        MlpConfig c;
        c.input_dim = input_dim;
        c.hidden_width = integer(1, 16);
        c.n_layers = integer(2, 6);
        c.skip_layers.clear();
        for (int l = 1; l < c.n_layers; ++l)
            if (integer(0, 2) == 0) c.skip_layers.push_back(l);
        return c;
    }
};

constexpr int kCases = 25;

} // namespace

TEST(Property, NiftiRoundTripIsIdentity) {
    Gen g(1);
    const auto dir = inr4d::testing::scratch("prop_nifti");
    for (int k = 0; k < kCases; ++k) {
        const Dims d = g.dims(1, 9);
        Volume3D v(d, {g.real(0.1, 3), g.real(0.1, 3), g.real(0.1, 3)});
        for (auto& x : v.data) x = static_cast<float>(g.real(-1e3, 1e3));
        const auto path = dir / (k % 2 ? "v.nii.gz" : "v.nii");
        write_nifti(v, path);
        const Volume3D r = read_nifti(path);
        ASSERT_EQ(r.dims, d);
        for (int a = 0; a < 3; ++a) EXPECT_NEAR(r.spacing[a], v.spacing[a], 1e-6);
        EXPECT_EQ(r.data, v.data);
    }
}

TEST(Property, NormalizeSpansUnitInterval) {
    Gen g(2);
    for (int k = 0; k < kCases; ++k) {
        Volume4D s;
        const Dims d = g.dims(1, 5);
        const int n = g.integer(2, 5);
        const double lo = g.real(-100, 100), span = g.real(1e-3, 500);
        for (int i = 0; i < n; ++i) {
            Volume3D v(d, {1, 1, 1});
            for (auto& x : v.data) x = lo + span * g.real(0, 1);
            s.volumes.push_back(v);
            s.times.push_back(i);
        }
        s.volumes[0].data[0] = lo;
        s.volumes[static_cast<std::size_t>(n - 1)].data.back() = lo + span;
        const Volume4D r = normalize_intensity(s);
        double mn = 1, mx = 0;
        for (std::size_t i = 0; i < r.size(); ++i)
            for (std::size_t j = 0; j < r.volumes[i].data.size(); ++j) {
                const double x = r.volumes[i].data[j];
                mn = std::min(mn, x);
                mx = std::max(mx, x);
                EXPECT_NEAR(denormalize_value(x, r.intensity_scale), s.volumes[i].data[j], 1e-6 * (1 + std::abs(lo) + span));
            }
        EXPECT_EQ(mn, 0.0);
        EXPECT_EQ(mx, 1.0);
    }
}

TEST(Property, CoordGridIsMirrorSymmetric) {
    Gen g(3);
    for (int k = 0; k < kCases; ++k) {
        const Dims d = g.dims(1, 8);
        const auto grid = coord_grid(d);
        for (int trial = 0; trial < 20; ++trial) {
            const int x = g.integer(0, d.nx - 1), y = g.integer(0, d.ny - 1), z = g.integer(0, d.nz - 1);
            const auto& c = grid[voxel_index(d, x, y, z)];
            const auto& m = grid[voxel_index(d, d.nx - 1 - x, d.ny - 1 - y, d.nz - 1 - z)];
            for (int a = 0; a < 3; ++a) EXPECT_EQ(c[a], -m[a]);
            for (int a = 0; a < 3; ++a) EXPECT_LE(std::abs(c[a]), 1.0);
        }
    }
}

TEST(Property, EncoderBlocksAreIndependent) {
    Gen g(4);
    for (int k = 0; k < kCases; ++k) {
        const int ls = g.integer(1, 20), lt = g.integer(1, 8);
        const auto e = new_encoder(ls, lt, static_cast<std::uint64_t>(k));
        const Eigen::Vector4d p(g.real(-1, 1), g.real(-1, 1), g.real(-1, 1), g.real(-1, 1));
        Eigen::Vector4d q = p;
        q(3) = g.real(-1, 1);
        const Eigen::VectorXd a = e.encode(p), b = e.encode(q);
        EXPECT_EQ(a.head(2 * ls), b.head(2 * ls));
        Eigen::Vector4d r = p;
        r(0) = g.real(-1, 1);
        EXPECT_EQ(a.tail(2 * lt), e.encode(r).tail(2 * lt));
        EXPECT_EQ(e.encode(p), a); // pure
    }
}

TEST(Property, RandomNetworksPassGradientCheck) {
    Gen g(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int k = 0; k < 10; ++k) {
        const InrModel m = init_mlp(g.mlp(g.integer(1, 6)), static_cast<std::uint64_t>(100 + k));
        Eigen::MatrixXd x(m.config().input_dim, 4);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(g.rng);
        Eigen::VectorXd c(4);
        for (int i = 0; i < 4; ++i) c(i) = n(g.rng);
        EXPECT_LT(inr4d::testing::finite_difference_check(m, x, c).max_rel_error, 1e-4) << "case " << k;
    }
}

TEST(Property, BatchNormOutputsAreStandardized) {
    Gen g(6);
    std::normal_distribution<double> n(0.0, 3.0);
    for (int k = 0; k < kCases; ++k) {
        InrModel m = init_mlp(g.mlp(g.integer(1, 8)), static_cast<std::uint64_t>(k));
        Eigen::MatrixXd x(m.config().input_dim, g.integer(32, 96));
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(g.rng);
        const auto fr = forward(m, x);
        for (std::size_t l = 0; l < fr.cache->normalized.size(); ++l) {
            const auto& xhat = fr.cache->normalized[l];
            const Eigen::VectorXd mean = xhat.rowwise().mean();
            EXPECT_LT(mean.cwiseAbs().maxCoeff(), 1e-10);
            const Eigen::ArrayXd var = (xhat.colwise() - mean).array().square().rowwise().mean();
            // raw variance s2 gives s2 / (s2 + eps) = 1 - eps * inv_std^2
            const Eigen::ArrayXd inv = fr.cache->inv_std[l].array();
            const Eigen::ArrayXd expected = 1.0 - m.config().bn_epsilon * inv.square();
            EXPECT_LT((var - expected).abs().maxCoeff(), 1e-9);
        }
    }
}

TEST(Property, AdamIsPartitionInvariant) {
    Gen g(7);
    for (int k = 0; k < kCases; ++k) {
        const int n = g.integer(2, 30);
        const int cut = g.integer(1, n - 1);
        std::vector<double> whole(static_cast<std::size_t>(n));
        for (auto& w : whole) w = g.real(-1, 1);
        std::vector<double> left(whole.begin(), whole.begin() + cut), right(whole.begin() + cut, whole.end());
        AdamState sw = AdamState::for_size(whole.size()), sl = AdamState::for_size(left.size()),
                  sr = AdamState::for_size(right.size());
        for (int step = 0; step < 5; ++step) {
            std::vector<double> grad(static_cast<std::size_t>(n));
            for (auto& x : grad) x = g.real(-2, 2);
            adam_step(whole, grad, sw, 0.01);
            adam_step(left, std::span<const double>(grad).first(static_cast<std::size_t>(cut)), sl, 0.01);
            adam_step(right, std::span<const double>(grad).subspan(static_cast<std::size_t>(cut)), sr, 0.01);
        }
        std::vector<double> joined = left;
        joined.insert(joined.end(), right.begin(), right.end());
        EXPECT_EQ(joined, whole);
    }
}

TEST(Property, LearningRateNeverIncreases) {
    Gen g(8);
    for (int k = 0; k < kCases; ++k) {
        const LrSchedule s{g.real(1e-6, 1), g.real(0.01, 1.0), g.integer(1, 50)};
        double prev = lr_at(s, 0);
        for (int e = 1; e < 400; ++e) {
            const double lr = lr_at(s, e);
            EXPECT_LE(lr, prev);
            prev = lr;
        }
    }
}

TEST(Property, DiceSymmetricBoundedMonotone) {
    Gen g(9);
    for (int k = 0; k < kCases; ++k) {
        const Dims d = g.dims(2, 6);
        const LabelVolume a = inr4d::testing::random_labels(d, g.rng, 2, g.real(0, 1));
        const LabelVolume b = inr4d::testing::random_labels(d, g.rng, 2, g.real(0, 1));
        for (int c : {1, 2}) {
            const double ab = dice(a, b, c);
            EXPECT_EQ(ab, dice(b, a, c));
            EXPECT_GE(ab, 0.0);
            EXPECT_LE(ab, 100.0);
        }
        // Swap one voxel of B from outside A to inside A: sizes fixed, intersection grows.
        LabelVolume a1(d, {1, 1, 1}), b1(d, {1, 1, 1});
        const std::size_t n = d.count();
        for (std::size_t i = 0; i < n / 2; ++i) a1.data[i] = 1;
        for (std::size_t i = n / 2; i < n; ++i) b1.data[i] = 1;
        double prev = dice(a1, b1, 1);
        for (std::size_t i = 0; i < n / 2 && n / 2 + i < n; ++i) {
            b1.data[n / 2 + i] = 0;
            b1.data[i] = 1;
            const double cur = dice(a1, b1, 1);
            EXPECT_GT(cur, prev);
            prev = cur;
        }
    }
}

TEST(Property, EfcIsScaleInvariant) {
    Gen g(10);
    for (int k = 0; k < kCases; ++k) {
        std::vector<double> s(static_cast<std::size_t>(g.integer(2, 200)));
        for (auto& x : s) x = g.integer(0, 3) == 0 ? 0.0 : g.real(0, 5);
        s[0] = 1.0;
        const double scale = g.real(1e-3, 1e3);
        std::vector<double> t = s;
        for (auto& x : t) x *= scale;
        const double a = *efc_slice(s), b = *efc_slice(t);
        EXPECT_NEAR(a, b, 1e-12);
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 1.0 + 1e-12);
    }
}

TEST(Property, TcIdentityIsNeighbourDiceMean) {
    Gen g(11);
    for (int k = 0; k < kCases; ++k) {
        const int n = g.integer(2, 8);
        std::vector<LabelVolume> series;
        for (int t = 0; t < n; ++t) series.push_back(inr4d::testing::random_labels({4, 4, 4}, g.rng, 1, g.real(0.1, 0.9)));
        for (std::size_t m = 0; m < series.size(); ++m) {
            const double v = tc_identity(series, m, 1);
            EXPECT_NEAR(v, inr4d::testing::tc_brute_force(series, {}, m, 1), 1e-12);
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 100.0);
        }
    }
}

TEST(Property, WarpWithZeroFieldIsIdentity) {
    Gen g(12);
    for (int k = 0; k < kCases; ++k) {
        const Dims d = g.dims(1, 7);
        const LabelVolume l = inr4d::testing::random_labels(d, g.rng, 4);
        EXPECT_EQ(warp_labels(l, DisplacementField::zero(d, l.spacing)).data, l.data);
    }
}

TEST(Property, SplitInvariants) {
    Gen g(13);
    for (int k = 0; k < kCases; ++k) {
        const auto t = g.increasing(g.integer(4, 25));
        const TimeSplit s = split_timepoints(t);
        const std::size_t last = t.size() - 1;
        for (const auto* set : {&s.set1, &s.set2}) {
            EXPECT_EQ(set->front(), 0u);
            EXPECT_EQ(set->back(), last);
            EXPECT_TRUE(std::is_sorted(set->begin(), set->end()));
        }
        for (std::size_t i = 1; i < last; ++i) {
            const bool in1 = std::count(s.set1.begin(), s.set1.end(), i) == 1;
            const bool in2 = std::count(s.set2.begin(), s.set2.end(), i) == 1;
            EXPECT_NE(in1, in2) << "interior point in exactly one set";
        }
        for (double m : s.midpoints) {
            EXPECT_GT(m, t.front());
            EXPECT_LT(m, t.back());
            EXPECT_EQ(std::count(t.begin(), t.end(), m), 0);
        }
    }
}

TEST(Property, AveragePredictCommutes) {
    Gen g(14);
    for (int k = 0; k < 10; ++k) {
        const auto enc = new_encoder(g.integer(1, 6), g.integer(1, 4), static_cast<std::uint64_t>(k));
        InrModel a = init_model(enc, g.mlp(enc.feature_dim()), static_cast<std::uint64_t>(2 * k));
        InrModel b = init_model(enc, g.mlp(enc.feature_dim()), static_cast<std::uint64_t>(2 * k + 1));
        a.mode = b.mode = Mode::Eval;
        Eigen::MatrixXd c(4, 12);
        for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = g.real(-1, 1);
        EXPECT_EQ(average_predict(a, b, c), average_predict(b, a, c));
    }
}
