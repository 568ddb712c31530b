#include "inr4d/encoding.hpp"

#include "inr4d/error.hpp"
#include "inr4d/rng.hpp"

#include <numbers>

namespace inr4d {

FourierEncoder::FourierEncoder(int space_features, int time_features, std::uint64_t seed) : seed_(seed) {
    require(space_features >= 1 && time_features >= 1, "encoder feature counts must be at least 1");
    Rng rng(derive_seed(seed, {0xFEA7}));
    std::normal_distribution<double> normal(0.0, 1.0);
    b_space_.resize(space_features, 3);
    for (int r = 0; r < space_features; ++r)
        for (int c = 0; c < 3; ++c) b_space_(r, c) = normal(rng);
    b_time_.resize(time_features);
    for (int r = 0; r < time_features; ++r) b_time_(r) = normal(rng);
}

FourierEncoder::FourierEncoder(Eigen::MatrixXd b_space, Eigen::VectorXd b_time, std::uint64_t seed)
    : b_space_(std::move(b_space)), b_time_(std::move(b_time)), seed_(seed) {
    require(b_space_.cols() == 3 && b_space_.rows() >= 1, "spatial projection must be L x 3");
    require(b_time_.size() >= 1, "temporal projection must have at least one row");
}

Eigen::VectorXd FourierEncoder::encode(const Eigen::Vector4d& p) const {
    Eigen::MatrixXd col = p;
    return encode_batch(col).col(0);
}

Eigen::MatrixXd FourierEncoder::encode_batch(const Eigen::Ref<const Eigen::MatrixXd>& coords) const {
    require(!empty(), "encoder is not initialized");
    require(coords.rows() == 4, "encoder expects 4 x n coordinates");
    require(coords.allFinite(), "non-finite coordinate passed to encoder");
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const Eigen::Index ls = b_space_.rows();
    const Eigen::Index lt = b_time_.size();
    const Eigen::Index n = coords.cols();

    const Eigen::MatrixXd phase_s = two_pi * (b_space_ * coords.topRows<3>());
    const Eigen::MatrixXd phase_t = two_pi * (b_time_ * coords.row(3));

    Eigen::MatrixXd out(2 * ls + 2 * lt, n);
    out.topRows(ls) = phase_s.array().cos();
    out.middleRows(ls, ls) = phase_s.array().sin();
    out.middleRows(2 * ls, lt) = phase_t.array().cos();
    out.bottomRows(lt) = phase_t.array().sin();
    return out;
}

} // namespace inr4d
