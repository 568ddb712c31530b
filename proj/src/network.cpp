#include "inr4d/network.hpp"

#include "inr4d/error.hpp"
#include "inr4d/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <string>

namespace inr4d {

namespace {

std::atomic<std::uint64_t> g_revision{1};

std::uint64_t next_revision() { return g_revision.fetch_add(1, std::memory_order_relaxed); }

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

} // namespace

void MlpConfig::validate() const {
    require(input_dim >= 1, "invalid config: input_dim must be >= 1");
    require(hidden_width >= 1, "invalid config: hidden_width must be >= 1");
    require(n_layers >= 1, "invalid config: n_layers must be >= 1");
    for (int s : skip_layers)
        require(s >= 1 && s < n_layers, "invalid config: skip layer " + std::to_string(s) + " outside [1, n_layers)");
    require(bn_momentum > 0.0 && bn_momentum <= 1.0, "invalid config: bn_momentum must lie in (0, 1]");
    require(bn_epsilon > 0.0, "invalid config: bn_epsilon must be positive");
}

InrModel::InrModel(MlpConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::sort(cfg_.skip_layers.begin(), cfg_.skip_layers.end());
    cfg_.skip_layers.erase(std::unique(cfg_.skip_layers.begin(), cfg_.skip_layers.end()), cfg_.skip_layers.end());

    std::size_t offset = 0;
    std::size_t stat = 0;
    for (int l = 1; l <= cfg_.n_layers; ++l) {
        LayerLayout L;
        L.index = l;
        L.skip_input = std::find(cfg_.skip_layers.begin(), cfg_.skip_layers.end(), l - 1) != cfg_.skip_layers.end();
        L.in_dim = l == 1 ? cfg_.input_dim : cfg_.hidden_width + (L.skip_input ? cfg_.input_dim : 0);
        L.has_bn = l < cfg_.n_layers;
        L.out_dim = L.has_bn ? cfg_.hidden_width : 1;
        L.weight = offset;
        offset += static_cast<std::size_t>(L.out_dim) * static_cast<std::size_t>(L.in_dim);
        L.bias = offset;
        offset += static_cast<std::size_t>(L.out_dim);
        if (L.has_bn) {
            L.bn_scale = offset;
            offset += static_cast<std::size_t>(L.out_dim);
            L.bn_shift = offset;
            offset += static_cast<std::size_t>(L.out_dim);
            L.bn_stat = stat;
            stat += static_cast<std::size_t>(L.out_dim);
        }
        layers_.push_back(L);
    }
    params_.assign(offset, 0.0);
    running_mean_.assign(stat, 0.0);
    running_var_.assign(stat, 1.0);
    for (const auto& L : layers_)
        if (L.has_bn) std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(L.bn_scale), L.out_dim, 1.0);
    revision_ = next_revision();
}

void InrModel::touch() { revision_ = next_revision(); }

std::span<double> InrModel::mutable_params() {
    touch();
    return params_;
}

ConstMatrixMap InrModel::weight(int index) const {
    const auto& L = layer(index);
    return ConstMatrixMap(params_.data() + L.weight, L.out_dim, L.in_dim);
}
MatrixMap InrModel::weight(int index) {
    const auto& L = layer(index);
    touch();
    return MatrixMap(params_.data() + L.weight, L.out_dim, L.in_dim);
}
ConstVectorMap InrModel::bias(int index) const {
    const auto& L = layer(index);
    return ConstVectorMap(params_.data() + L.bias, L.out_dim);
}
VectorMap InrModel::bias(int index) {
    const auto& L = layer(index);
    touch();
    return VectorMap(params_.data() + L.bias, L.out_dim);
}
ConstVectorMap InrModel::bn_scale(int index) const {
    const auto& L = layer(index);
    require(L.has_bn, "layer has no batch normalization");
    return ConstVectorMap(params_.data() + L.bn_scale, L.out_dim);
}
VectorMap InrModel::bn_scale(int index) {
    const auto& L = layer(index);
    require(L.has_bn, "layer has no batch normalization");
    touch();
    return VectorMap(params_.data() + L.bn_scale, L.out_dim);
}
ConstVectorMap InrModel::bn_shift(int index) const {
    const auto& L = layer(index);
    require(L.has_bn, "layer has no batch normalization");
    return ConstVectorMap(params_.data() + L.bn_shift, L.out_dim);
}
VectorMap InrModel::bn_shift(int index) {
    const auto& L = layer(index);
    require(L.has_bn, "layer has no batch normalization");
    touch();
    return VectorMap(params_.data() + L.bn_shift, L.out_dim);
}

bool InrModel::operator==(const InrModel& o) const {
    return cfg_ == o.cfg_ && mode == o.mode && domain == o.domain && encoder == o.encoder &&
           encoder.seed() == o.encoder.seed() && bitwise_equal(params_, o.params_) &&
           bitwise_equal(running_mean_, o.running_mean_) && bitwise_equal(running_var_, o.running_var_);
}

InrModel init_mlp(const MlpConfig& cfg, std::uint64_t seed) {
    InrModel model(cfg);
    Rng rng(derive_seed(seed, {0x1417}));
    auto p = model.mutable_params();
    for (const auto& L : model.layers()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(L.in_dim));
        std::uniform_real_distribution<double> uni(-bound, bound);
        const std::size_t nw = static_cast<std::size_t>(L.out_dim) * static_cast<std::size_t>(L.in_dim);
        for (std::size_t i = 0; i < nw; ++i) p[L.weight + i] = uni(rng);
        for (int i = 0; i < L.out_dim; ++i) p[L.bias + static_cast<std::size_t>(i)] = uni(rng);
    }
    return model;
}

InrModel init_model(const FourierEncoder& encoder, MlpConfig cfg, std::uint64_t seed) {
    require(!encoder.empty(), "init_model needs a constructed encoder");
    cfg.input_dim = encoder.feature_dim();
    InrModel model = init_mlp(cfg, seed);
    model.encoder = encoder;
    return model;
}

namespace {

// Pre-activation of one layer: W * [prev; features] + b.
Eigen::MatrixXd affine(const InrModel& model, const LayerLayout& L, const Eigen::MatrixXd* prev,
                       const Eigen::Ref<const Eigen::MatrixXd>& features) {
    const auto W = model.weight(L.index);
    Eigen::MatrixXd z;
    if (L.index == 1) {
        z.noalias() = W * features;
    } else if (L.skip_input) {
        const int h = model.config().hidden_width;
        z.noalias() = W.leftCols(h) * (*prev);
        z.noalias() += W.rightCols(model.config().input_dim) * features;
    } else {
        z.noalias() = W * (*prev);
    }
    z.colwise() += model.bias(L.index);
    return z;
}

void scale_shift_relu(const InrModel& model, const LayerLayout& L, Eigen::MatrixXd& x) {
    const auto gamma = model.bn_scale(L.index);
    const auto beta = model.bn_shift(L.index);
    x = ((x.array().colwise() * gamma.array()).colwise() + beta.array()).cwiseMax(0.0);
}

void check_features(const InrModel& model, const Eigen::Ref<const Eigen::MatrixXd>& features) {
    require(model.num_params() > 0, "model is not initialized");
    require(features.rows() == model.config().input_dim,
            "feature width mismatch: got " + std::to_string(features.rows()) + ", model expects " +
                std::to_string(model.config().input_dim));
    require(features.cols() >= 1, "empty batch");
}

} // namespace

ForwardResult forward(InrModel& model, const Eigen::Ref<const Eigen::MatrixXd>& features) {
    if (model.mode == Mode::Eval) return {predict(model, features), std::nullopt};

    check_features(model, features);
    const Eigen::Index n = features.cols();
    require(n >= 2, "train-mode forward needs a batch of at least 2 (batch statistics)");
    const double momentum = model.config().bn_momentum;
    const double eps = model.config().bn_epsilon;
    const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);

    ForwardCache cache;
    cache.input = features;
    cache.num_params = model.num_params();
    Eigen::MatrixXd act;
    ForwardResult result;
    auto rm = model.running_mean();
    auto rv = model.running_var();
    for (const auto& L : model.layers()) {
        Eigen::MatrixXd z = affine(model, L, &act, features);
        if (!L.has_bn) {
            result.output = z.row(0).transpose();
            break;
        }
        const Eigen::VectorXd mean = z.rowwise().mean();
        z.colwise() -= mean;
        const Eigen::VectorXd var = z.array().square().rowwise().mean();
        const Eigen::VectorXd inv_std = (var.array() + eps).rsqrt();
        z.array().colwise() *= inv_std.array();
        for (int i = 0; i < L.out_dim; ++i) {
            const std::size_t s = L.bn_stat + static_cast<std::size_t>(i);
            rm[s] = (1.0 - momentum) * rm[s] + momentum * mean(i);
            rv[s] = (1.0 - momentum) * rv[s] + momentum * var(i) * unbias;
        }
        cache.normalized.push_back(z);
        cache.inv_std.push_back(inv_std);
        scale_shift_relu(model, L, z);
        act = std::move(z);
    }
    cache.revision = model.revision();
    result.cache = std::move(cache);
    return result;
}

Eigen::VectorXd predict(const InrModel& model, const Eigen::Ref<const Eigen::MatrixXd>& features) {
    require(model.mode == Mode::Eval, "predict requires an eval-mode model");
    check_features(model, features);
    const double eps = model.config().bn_epsilon;
    const auto rm = model.running_mean();
    const auto rv = model.running_var();
    Eigen::MatrixXd act;
    for (const auto& L : model.layers()) {
        Eigen::MatrixXd z = affine(model, L, &act, features);
        if (!L.has_bn) return z.row(0).transpose();
        const ConstVectorMap mean(rm.data() + L.bn_stat, L.out_dim);
        const ConstVectorMap var(rv.data() + L.bn_stat, L.out_dim);
        z.colwise() -= mean;
        z.array().colwise() *= (var.array() + eps).rsqrt();
        scale_shift_relu(model, L, z);
        act = std::move(z);
    }
    return {};
}

Gradients backward(const InrModel& model, const ForwardCache& cache,
                   const Eigen::Ref<const Eigen::VectorXd>& d_output) {
    require(model.mode == Mode::Train, "backward requires a train-mode model (eval-mode models are frozen)");
    require(cache.revision == model.revision() && cache.num_params == model.num_params(),
            "stale or mismatched forward cache");
    const Eigen::Index n = cache.batch();
    require(d_output.size() == n, "upstream gradient length does not match the cached batch");

    Gradients g;
    g.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.num_params()));
    double* gp = g.values.data();
    const int h = model.config().hidden_width;
    const int in_dim = model.config().input_dim;
    const auto& layers = model.layers();

    // Activation feeding layer l (1-based), rebuilt from the cached normalization.
    auto activation = [&](int l) {
        const LayerLayout& P = model.layer(l - 1);
        Eigen::MatrixXd a = cache.normalized[static_cast<std::size_t>(l - 2)];
        scale_shift_relu(model, P, a);
        return a;
    };

    Eigen::MatrixXd dz = d_output.transpose();
    Eigen::MatrixXd a_prev = layers.size() > 1 ? activation(static_cast<int>(layers.size())) : Eigen::MatrixXd();
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
        const LayerLayout& L = *it;
        if (L.has_bn) {
            // dz currently holds dLoss/d(activation); go through ReLU, scale/shift and BN.
            const auto& xhat = cache.normalized[static_cast<std::size_t>(L.index - 1)];
            const auto& inv_std = cache.inv_std[static_cast<std::size_t>(L.index - 1)];
            const auto gamma = model.bn_scale(L.index);
            const auto beta = model.bn_shift(L.index);
            Eigen::ArrayXXd y = (xhat.array().colwise() * gamma.array()).colwise() + beta.array();
            Eigen::ArrayXXd dy = (y > 0.0).select(dz.array(), 0.0);
            VectorMap(gp + L.bn_scale, L.out_dim) = (dy * xhat.array()).rowwise().sum().matrix();
            VectorMap(gp + L.bn_shift, L.out_dim) = dy.rowwise().sum().matrix();
            Eigen::ArrayXXd dxhat = dy.colwise() * gamma.array();
            const Eigen::ArrayXd sum_dxhat = dxhat.rowwise().sum();
            const Eigen::ArrayXd sum_dxhat_xhat = (dxhat * xhat.array()).rowwise().sum();
            const double nd = static_cast<double>(n);
            dz = ((((dxhat * nd).colwise() - sum_dxhat) - xhat.array().colwise() * sum_dxhat_xhat).colwise() *
                  (inv_std.array() / nd))
                     .matrix();
        }
        MatrixMap dW(gp + L.weight, L.out_dim, L.in_dim);
        VectorMap(gp + L.bias, L.out_dim) = dz.rowwise().sum();
        if (L.index == 1) {
            dW.noalias() = dz * cache.input.transpose();
            break;
        }
        const auto W = model.weight(L.index);
        if (L.skip_input) {
            dW.leftCols(h).noalias() = dz * a_prev.transpose();
            dW.rightCols(in_dim).noalias() = dz * cache.input.transpose();
        } else {
            dW.noalias() = dz * a_prev.transpose();
        }
        Eigen::MatrixXd d_act;
        d_act.noalias() = W.leftCols(h).transpose() * dz;
        dz = std::move(d_act);
        if (L.index > 2) a_prev = activation(L.index - 1);
        else a_prev.resize(0, 0);
    }
    return g;
}

double mse_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& target, Eigen::VectorXd* d_pred) {
    require(pred.size() == target.size() && pred.size() > 0, "mse_loss size mismatch");
    const Eigen::VectorXd diff = pred - target;
    const double n = static_cast<double>(pred.size());
    if (d_pred) *d_pred = diff * (2.0 / n);
    return diff.squaredNorm() / n;
}

} // namespace inr4d
