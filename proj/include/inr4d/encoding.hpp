#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace inr4d {

/// Random Fourier feature map for (x, y, z) and t.
///
/// Features are laid out as [cos(2*pi*Bs*xyz), sin(2*pi*Bs*xyz),
/// cos(2*pi*Bt*t), sin(2*pi*Bt*t)], giving 2*Ls + 2*Lt values. The
/// projection matrices hold N(0, 1) draws and never change after
/// construction.
class FourierEncoder {
public:
    FourierEncoder() = default;
    FourierEncoder(int space_features, int time_features, std::uint64_t seed);
    /// Rebuild from stored matrices (checkpoint load, hand-built tests).
    FourierEncoder(Eigen::MatrixXd b_space, Eigen::VectorXd b_time, std::uint64_t seed);

    int space_features() const { return static_cast<int>(b_space_.rows()); }
    int time_features() const { return static_cast<int>(b_time_.size()); }
    int feature_dim() const { return 2 * space_features() + 2 * time_features(); }
    std::uint64_t seed() const { return seed_; }
    bool empty() const { return b_space_.size() == 0; }

    const Eigen::MatrixXd& b_space() const { return b_space_; }
    const Eigen::VectorXd& b_time() const { return b_time_; }

    /// One normalized point (x, y, z, t).
    Eigen::VectorXd encode(const Eigen::Vector4d& p) const;
    /// Column-per-sample batch: 4 x n in, feature_dim x n out.
    Eigen::MatrixXd encode_batch(const Eigen::Ref<const Eigen::MatrixXd>& coords) const;

    bool operator==(const FourierEncoder& o) const {
        return b_space_ == o.b_space_ && b_time_ == o.b_time_;
    }

private:
    Eigen::MatrixXd b_space_; // Ls x 3
    Eigen::VectorXd b_time_;  // Lt
    std::uint64_t seed_ = 0;
};

inline FourierEncoder new_encoder(int space_features, int time_features, std::uint64_t seed) {
    return FourierEncoder(space_features, time_features, seed);
}

} // namespace inr4d
