#pragma once

#include "inr4d/encoding.hpp"
#include "inr4d/volume.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace inr4d {

/// Shape of the coordinate MLP. Layers are numbered from 1; layers
/// 1..n_layers-1 are Linear + BatchNorm + ReLU, layer n_layers is a plain
/// affine map to one scalar. After every layer listed in skip_layers the
/// raw network input is concatenated below the activation.
struct MlpConfig {
    int input_dim = 320;
    int hidden_width = 256;
    int n_layers = 18;
    std::vector<int> skip_layers{6, 12};
    double bn_momentum = 0.1;
    double bn_epsilon = 1e-5;

    void validate() const;
    bool operator==(const MlpConfig&) const = default;
};

/// Where one layer's tensors live inside the flat parameter vector.
struct LayerLayout {
    int index = 0;
    int in_dim = 0;
    int out_dim = 0;
    bool skip_input = false; // input is [previous activation; raw features]
    bool has_bn = false;
    std::size_t weight = 0;  // out_dim x in_dim, column-major
    std::size_t bias = 0;
    std::size_t bn_scale = 0;
    std::size_t bn_shift = 0;
    std::size_t bn_stat = 0; // offset into running_mean / running_var
};

enum class Mode { Train, Eval };

/// Normalization ranges and grid a model was trained under, needed to map
/// gestational ages in and intensities back out at inference.
struct DomainInfo {
    double t_min = 0.0;
    double t_max = 1.0;
    double intensity_min = 0.0;
    double intensity_max = 1.0;
    Dims grid{1, 1, 1};
    Spacing spacing{1.0, 1.0, 1.0};
    bool operator==(const DomainInfo&) const = default;
};

using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

class InrModel {
public:
    InrModel() = default;
    explicit InrModel(MlpConfig cfg);

    const MlpConfig& config() const { return cfg_; }
    const std::vector<LayerLayout>& layers() const { return layers_; }
    const LayerLayout& layer(int index) const { return layers_.at(static_cast<std::size_t>(index - 1)); }
    std::size_t num_params() const { return params_.size(); }

    std::span<const double> params() const { return params_; }
    /// Any mutable access invalidates outstanding forward caches.
    std::span<double> mutable_params();

    ConstMatrixMap weight(int index) const;
    MatrixMap weight(int index);
    ConstVectorMap bias(int index) const;
    VectorMap bias(int index);
    ConstVectorMap bn_scale(int index) const;
    VectorMap bn_scale(int index);
    ConstVectorMap bn_shift(int index) const;
    VectorMap bn_shift(int index);

    std::span<const double> running_mean() const { return running_mean_; }
    std::span<const double> running_var() const { return running_var_; }
    std::span<double> running_mean() { return running_mean_; }
    std::span<double> running_var() { return running_var_; }

    std::uint64_t revision() const { return revision_; }
    void touch();

    FourierEncoder encoder;
    DomainInfo domain;
    Mode mode = Mode::Train;

    /// Bitwise equality of every stored number.
    bool operator==(const InrModel& o) const;

private:
    MlpConfig cfg_;
    std::vector<LayerLayout> layers_;
    std::vector<double> params_;
    std::vector<double> running_mean_;
    std::vector<double> running_var_;
    std::uint64_t revision_ = 0;
};

/// Fan-in scaled uniform weights, BN scale 1 / shift 0, running stats (0, 1).
InrModel init_mlp(const MlpConfig& cfg, std::uint64_t seed);
/// init_mlp plus an attached encoder; cfg.input_dim must match it.
InrModel init_model(const FourierEncoder& encoder, MlpConfig cfg, std::uint64_t seed);

/// Per-mini-batch state recorded by a train-mode forward pass.
struct ForwardCache {
    std::uint64_t revision = 0;
    std::size_t num_params = 0;
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> normalized; // BN output before scale/shift, per hidden layer
    std::vector<Eigen::VectorXd> inv_std;    // per hidden layer
    Eigen::Index batch() const { return input.cols(); }
};

struct ForwardResult {
    Eigen::VectorXd output;
    std::optional<ForwardCache> cache; // train mode only
};

/// Features are feature_dim x batch, one column per sample. Train mode uses
/// batch statistics, updates running statistics and needs batch >= 2.
ForwardResult forward(InrModel& model, const Eigen::Ref<const Eigen::MatrixXd>& features);

/// Eval-mode forward; pure in (parameters, features).
Eigen::VectorXd predict(const InrModel& model, const Eigen::Ref<const Eigen::MatrixXd>& features);

/// Same layout as InrModel::params().
struct Gradients {
    Eigen::VectorXd values;
};

/// Exact gradients of a scalar loss given dLoss/dOutput for each sample.
Gradients backward(const InrModel& model, const ForwardCache& cache,
                   const Eigen::Ref<const Eigen::VectorXd>& d_output);

/// Mean squared error and its gradient with respect to the predictions.
double mse_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& target, Eigen::VectorXd* d_pred);

} // namespace inr4d
