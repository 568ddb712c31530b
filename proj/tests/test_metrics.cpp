#include "inr4d/error.hpp"
#include "inr4d/metrics.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

using namespace inr4d;
using inr4d::testing::scratch;

TEST(Mse, Basics) {
    Volume3D a({3, 2, 2}, {1, 1, 1}, 0.3);
    Volume3D b({3, 2, 2}, {1, 1, 1}, 0.4);
    EXPECT_EQ(mse(a, a), 0.0);
    EXPECT_NEAR(mse(a, b), 0.01, 1e-15);
    EXPECT_NEAR(psnr(a, b, 1.0), 20.0, 1e-9);
    EXPECT_TRUE(std::isinf(psnr(a, a, 1.0)));
    EXPECT_THROW(mse(a, Volume3D({2, 2, 2}, {1, 1, 1})), Error);
}

TEST(Efc, ConstantSliceIsOne) {
    for (std::size_t n : {2u, 9u, 64u, 1000u}) {
        const std::vector<double> s(n, 3.7);
        EXPECT_NEAR(*efc_slice(s), 1.0, 1e-9) << n;
    }
}

TEST(Efc, OneHotSliceIsZero) {
    std::vector<double> s(50, 0.0);
    s[17] = 2.0;
    EXPECT_EQ(*efc_slice(s), 0.0);
    EXPECT_EQ(*efc_slice(std::vector<double>{5.0}), 0.0);
}

TEST(Efc, TwoVoxelHandValue) {
    // x_max = 5, ratios 0.6 and 0.8
    const double entropy = -(0.6 * std::log(0.6) + 0.8 * std::log(0.8));
    const double norm = 2.0 * (1.0 / std::sqrt(2.0)) * std::log(std::sqrt(2.0));
    EXPECT_NEAR(*efc_slice(std::vector<double>{3.0, 4.0}), entropy / norm, 1e-14);
    EXPECT_NEAR(*efc_slice(std::vector<double>{3.0, 4.0}), 0.98955, 1e-5);
}

TEST(Efc, BackgroundSliceSignalled) {
    EXPECT_FALSE(efc_slice(std::vector<double>(8, 0.0)).has_value());
    EXPECT_THROW(efc_slice(std::vector<double>{}), Error);
}

TEST(Efc, UsesMagnitudes) {
    EXPECT_EQ(*efc_slice(std::vector<double>{-3.0, 4.0}), *efc_slice(std::vector<double>{3.0, 4.0}));
}

TEST(Efc, VolumeExcludesBackgroundSlices) {
    Volume3D v({3, 3, 4}, {1, 1, 1}, 2.0);
    EXPECT_NEAR(efc_volume(v), 1.0, 1e-12);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) v.at(x, y, 0) = 0.0;
    v.at(1, 1, 3) = 10.0;
    const double s3 = [&] {
        std::vector<double> s(9, 2.0);
        s[4] = 10.0;
        return *efc_slice(s);
    }();
    EXPECT_NEAR(efc_volume(v, 2), (1.0 + 1.0 + s3) / 3.0, 1e-12);
    EXPECT_THROW(efc_volume(Volume3D({2, 2, 2}, {1, 1, 1}, 0.0)), Error);
}

TEST(Efc, SliceAxisSelection) {
    Volume3D v({2, 3, 4}, {1, 1, 1}, 0.0);
    v.at(1, 2, 3) = 1.0; // every slice through this voxel is one-hot; the rest are background
    for (int axis = 0; axis < 3; ++axis) EXPECT_EQ(efc_volume(v, axis), 0.0);
    EXPECT_THROW(efc_volume(v, 3), Error);
}

TEST(Dice, Cases) {
    LabelVolume a({4, 1, 1}, {1, 1, 1});
    LabelVolume b({4, 1, 1}, {1, 1, 1});
    a.data = {1, 1, 0, 0};
    EXPECT_EQ(dice(a, a, 1), 100.0);
    b.data = {0, 0, 1, 1};
    EXPECT_EQ(dice(a, b, 1), 0.0);
    b.data = {0, 1, 1, 0};
    EXPECT_EQ(dice(a, b, 1), 50.0);
    EXPECT_EQ(dice(a, b, 2), 100.0); // both empty
    EXPECT_THROW(dice(a, LabelVolume({2, 2, 1}, {1, 1, 1}), 1), Error);
}

TEST(Warp, ZeroFieldIsIdentity) {
    Rng rng(3);
    const LabelVolume l = inr4d::testing::random_labels({5, 4, 3}, rng, 2);
    EXPECT_EQ(warp_labels(l, DisplacementField::zero(l.dims, l.spacing)).data, l.data);
}

TEST(Warp, UnitShift) {
    Rng rng(4);
    const LabelVolume l = inr4d::testing::random_labels({6, 5, 4}, rng, 3);
    DisplacementField f = DisplacementField::zero(l.dims, l.spacing);
    for (auto& v : f.vectors) v = {1.0, 0.0, 0.0};
    const LabelVolume w = warp_labels(l, f);
    for (int z = 0; z < 4; ++z)
        for (int y = 0; y < 5; ++y) {
            for (int x = 0; x < 5; ++x) EXPECT_EQ(w.at(x, y, z), l.at(x + 1, y, z));
            EXPECT_EQ(w.at(5, y, z), 0); // pulled from outside the grid
        }
}

TEST(Warp, NonFiniteFieldRejected) {
    LabelVolume l({2, 2, 2}, {1, 1, 1});
    DisplacementField f = DisplacementField::zero(l.dims, l.spacing);
    f.vectors[3][1] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(warp_labels(l, f), Error);
    DisplacementField g = DisplacementField::zero({3, 2, 2}, l.spacing);
    EXPECT_THROW(warp_labels(l, g), Error);
}

TEST(Tc, IdenticalLabelsScoreHundred) {
    Rng rng(5);
    const LabelVolume l = inr4d::testing::random_labels({4, 4, 4}, rng, 1);
    const std::vector<LabelVolume> series(7, l);
    for (std::size_t m = 0; m < 7; ++m) EXPECT_EQ(tc_identity(series, m, 1), 100.0);
}

TEST(Tc, NeighbourCounting) {
    EXPECT_EQ(tc_neighbours(0, 10), (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(tc_neighbours(1, 10), (std::vector<std::size_t>{0, 2, 3}));
    EXPECT_EQ(tc_neighbours(5, 10), (std::vector<std::size_t>{3, 4, 6, 7}));
    EXPECT_EQ(tc_neighbours(9, 10), (std::vector<std::size_t>{7, 8}));
    EXPECT_EQ(tc_neighbours(0, 2), (std::vector<std::size_t>{1}));
    EXPECT_THROW(tc_neighbours(0, 1), Error);
}

TEST(Tc, MatchesBruteForceWithRandomFields) {
    Rng rng(6);
    std::uniform_real_distribution<double> shift(-1.6, 1.6);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<LabelVolume> series;
        for (int t = 0; t < 6; ++t) series.push_back(inr4d::testing::random_labels({4, 4, 4}, rng, 2, 0.4));
        FieldMap fields;
        for (std::size_t m = 0; m < 6; ++m)
            for (auto k : tc_neighbours(m, 6)) {
                DisplacementField f = DisplacementField::zero({4, 4, 4}, {1, 1, 1});
                for (auto& v : f.vectors) v = {shift(rng), shift(rng), shift(rng)};
                fields.emplace(std::make_pair(m, k), f);
            }
        for (std::size_t m = 0; m < 6; ++m)
            for (int c : {1, 2})
                EXPECT_NEAR(tc(series, fields, m, c), inr4d::testing::tc_brute_force(series, fields, m, c), 1e-12);
    }
}

TEST(Tc, MissingFieldRejected) {
    Rng rng(7);
    std::vector<LabelVolume> series(4, inr4d::testing::random_labels({3, 3, 3}, rng, 1));
    FieldMap fields;
    fields.emplace(std::make_pair(std::size_t{0}, std::size_t{1}), DisplacementField::zero({3, 3, 3}, {1, 1, 1}));
    EXPECT_THROW(tc(series, fields, 0, 1), Error);
    EXPECT_THROW(tc_identity(series, 4, 1), Error);
}

TEST(Field, FileRoundTrip) {
    const auto dir = scratch("field_io");
    DisplacementField f = DisplacementField::zero({3, 2, 4}, {0.5, 1.0, 2.0});
    for (std::size_t i = 0; i < f.vectors.size(); ++i)
        f.vectors[i] = {0.25 * static_cast<double>(i), -1.5, static_cast<double>(i % 3)};
    write_field(f, dir / "f.dfld");
    const DisplacementField r = read_field(dir / "f.dfld");
    EXPECT_EQ(r.dims, f.dims);
    EXPECT_EQ(r.spacing, f.spacing);
    EXPECT_EQ(r.vectors, f.vectors); // values representable in float32
    std::ifstream in(dir / "f.dfld", std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    EXPECT_EQ(std::string(magic, 4), "DFLD");
    in.seekg(0, std::ios::end);
    EXPECT_EQ(static_cast<std::size_t>(in.tellg()), 4 + 4 + 12 + 24 + 24 * 12u);
}

TEST(Field, CorruptFileRejected) {
    const auto dir = scratch("field_bad");
    std::ofstream(dir / "x.dfld") << "DFLD";
    EXPECT_THROW(read_field(dir / "x.dfld"), Error);
    std::ofstream(dir / "y.dfld") << "nope-nope-nope-nope";
    EXPECT_THROW(read_field(dir / "y.dfld"), Error);
}

TEST(Report, TableLayout) {
    MetricsReport r;
    r.times = {21, 22};
    r.efc = {0.25, 0.75};
    r.tc[1] = {90, 80};
    r.dice[1] = {100, 50};
    r.mse = {0.01, 0.03};
    r.global_mse = 0.02;
    r.global_psnr = 10 * std::log10(1 / 0.02);
    const std::string text = format_report(r);
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    ASSERT_EQ(lines.size(), 7u);
    EXPECT_EQ(lines[0], "metric\tclass\t21\t22\tmean");
    EXPECT_EQ(lines[1].substr(0, 6), "EFC\t-\t");
    EXPECT_NE(lines[1].find("\t0.5"), std::string::npos);
    EXPECT_EQ(lines[2].substr(0, 5), "TC\t1\t");
    EXPECT_EQ(lines[3].substr(0, 7), "DICE\t1\t");
    EXPECT_EQ(lines[4].substr(0, 6), "MSE\t-\t");
    EXPECT_EQ(lines[5].substr(0, 13), "GLOBAL_MSE\t-\t");
    EXPECT_EQ(lines[6].substr(0, 14), "GLOBAL_PSNR\t-\t");
}

TEST(Report, ValuesOutOfRangeRejected) {
    MetricsReport r;
    r.times = {21, 22};
    r.efc = {0.25, 0.75};
    r.tc[1] = {90, 180};
    EXPECT_THROW(r.validate(), Error);
    r.tc[1] = {90};
    EXPECT_THROW(r.validate(), Error);
}
