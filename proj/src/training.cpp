#include "inr4d/training.hpp"

#include "inr4d/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace inr4d {

namespace {

constexpr std::uint64_t kFidelityStream = 0xF1D0;
constexpr std::uint64_t kCrossStream = 0xC205;
constexpr Eigen::Index kPredictChunk = 16384;

// Flat voxel indices eligible for sampling.
std::vector<std::uint32_t> support(const Dims& dims, const LabelVolume* mask) {
    std::vector<std::uint32_t> out;
    if (!mask) {
        out.resize(dims.count());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<std::uint32_t>(i);
        return out;
    }
    require(mask->dims == dims, "mask dims do not match the series");
    for (std::size_t i = 0; i < mask->data.size(); ++i)
        if (mask->data[i] != 0) out.push_back(static_cast<std::uint32_t>(i));
    require(!out.empty(), "empty mask: no voxels to sample");
    return out;
}

void fill_xyz(const Dims& dims, std::uint32_t flat, Eigen::Ref<Eigen::Vector4d> col) {
    const auto nx = static_cast<std::uint32_t>(dims.nx);
    const auto ny = static_cast<std::uint32_t>(dims.ny);
    const int x = static_cast<int>(flat % nx);
    const int y = static_cast<int>((flat / nx) % ny);
    const int z = static_cast<int>(flat / (nx * ny));
    col(0) = axis_coord(x, dims.nx);
    col(1) = axis_coord(y, dims.ny);
    col(2) = axis_coord(z, dims.nz);
}

struct Sampler {
    const Volume4D& series;
    std::vector<std::uint32_t> voxels;
    TimeAxis axis;

    Sampler(const Volume4D& s, const LabelVolume* mask) : series(s), voxels(support(s.dims(), mask)), axis(TimeAxis::of(s.times)) {}

    Batch draw(std::span<const std::size_t> time_indices, int n, Rng& rng) const {
        require(!time_indices.empty(), "sample_batch: empty time subset");
        require(n >= 1, "sample_batch: batch size must be positive");
        for (auto t : time_indices) require(t < series.size(), "sample_batch: time index out of range");
        std::uniform_int_distribution<std::size_t> pick_voxel(0, voxels.size() - 1);
        std::uniform_int_distribution<std::size_t> pick_time(0, time_indices.size() - 1);
        Batch b;
        b.coords.resize(4, n);
        b.targets.resize(n);
        for (int i = 0; i < n; ++i) {
            const std::size_t ti = time_indices[pick_time(rng)];
            const std::uint32_t v = voxels[pick_voxel(rng)];
            fill_xyz(series.dims(), v, b.coords.col(i));
            b.coords(3, i) = axis.normalize(series.times[ti]);
            b.targets(i) = series.volumes[ti].data[v];
        }
        return b;
    }
};

Eigen::MatrixXd draw_coords(const Dims& dims, const std::vector<std::uint32_t>& voxels, const TimeAxis& axis,
                            std::span<const double> times, int n, Rng& rng) {
    require(!times.empty(), "sample_coords: empty time list");
    std::uniform_int_distribution<std::size_t> pick_voxel(0, voxels.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_time(0, times.size() - 1);
    Eigen::MatrixXd coords(4, n);
    for (int i = 0; i < n; ++i) {
        const double t = times[pick_time(rng)];
        fill_xyz(dims, voxels[pick_voxel(rng)], coords.col(i));
        coords(3, i) = axis.normalize(t);
    }
    return coords;
}

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) fail(std::string("divergence: non-finite ") + what);
}

void check_normalized(const Volume4D& series) {
    series.validate();
    require(series.size() >= 2, "training needs at least two time points");
}

InrModel fresh_model(const Volume4D& series, const TrainConfig& cfg, int stream) {
    require(stream == 1 || stream == 2, "model stream must be 1 or 2");
    const std::uint64_t seed = stream == 1 ? cfg.seed_model1 : cfg.seed_model2;
    const FourierEncoder enc(cfg.model.space_features, cfg.model.time_features, seed);
    InrModel m = init_model(enc, cfg.model.mlp, seed);
    const TimeAxis axis = TimeAxis::of(series.times);
    m.domain = {axis.t_min, axis.t_max, series.intensity_scale.first, series.intensity_scale.second,
                series.dims(), series.spacing()};
    m.mode = Mode::Train;
    return m;
}

// Fidelity loss on one batch; accumulates scale * grad.
double fidelity_grad(InrModel& model, const Batch& b, double scale, Eigen::VectorXd& grad) {
    const Eigen::MatrixXd features = model.encoder.encode_batch(b.coords);
    ForwardResult fr = forward(model, features);
    Eigen::VectorXd d;
    const double loss = mse_loss(fr.output, b.targets, &d);
    check_finite(loss, "fidelity loss");
    grad += scale * backward(model, *fr.cache, d).values;
    return loss;
}

struct RefineBatches {
    Batch fidelity1;
    Batch fidelity2;
    Eigen::MatrixXd cross;
};

RefineBatches draw_refine_batches(const Sampler& sampler, const TimeSplit& split, const TrainConfig& cfg,
                                  std::uint64_t epoch, std::uint64_t step) {
    RefineBatches b;
    Rng rng1(derive_seed(cfg.seed_sampling, {kFidelityStream, 11, epoch, step}));
    b.fidelity1 = sampler.draw(split.set1, cfg.batch_size, rng1);
    Rng rng2(derive_seed(cfg.seed_sampling, {kFidelityStream, 12, epoch, step}));
    b.fidelity2 = sampler.draw(split.set2, cfg.batch_size, rng2);
    Rng rngc(derive_seed(cfg.seed_sampling, {kCrossStream, epoch, step}));
    b.cross = draw_coords(sampler.series.dims(), sampler.voxels, sampler.axis, split.midpoints, cfg.batch_size, rngc);
    return b;
}

void check_refine_inputs(const InrModel& model1, const InrModel& model2, const Volume4D& series,
                         const TimeSplit& split, const TrainConfig& cfg) {
    cfg.validate();
    check_normalized(series);
    split.validate();
    require(!split.midpoints.empty(), "refine: empty midpoint set");
    require(split.t_total == series.times, "refine: split does not describe this series");
    require(model1.num_params() > 0 && model2.num_params() > 0, "refine: models are not initialized");
    require(!model1.encoder.empty() && !model2.encoder.empty(), "refine: models carry no encoder");
}

} // namespace

std::vector<double> TimeSplit::times1() const {
    std::vector<double> t;
    for (auto i : set1) t.push_back(t_total.at(i));
    return t;
}

std::vector<double> TimeSplit::times2() const {
    std::vector<double> t;
    for (auto i : set2) t.push_back(t_total.at(i));
    return t;
}

void TimeSplit::validate() const {
    require(t_total.size() >= 4, "time split needs at least four time points");
    const auto n = t_total.size();
    for (auto* s : {&set1, &set2}) {
        require(std::find(s->begin(), s->end(), 0) != s->end() && std::find(s->begin(), s->end(), n - 1) != s->end(),
                "time split: endpoints must belong to both sets");
        for (auto i : *s) require(i < n, "time split: index out of range");
    }
    for (std::size_t i = 0; i < n; ++i)
        require(std::find(set1.begin(), set1.end(), i) != set1.end() ||
                    std::find(set2.begin(), set2.end(), i) != set2.end(),
                "time split: sets do not cover every time point");
    const auto [lo, hi] = std::minmax_element(t_total.begin(), t_total.end());
    for (double m : midpoints) {
        require(m > *lo && m < *hi, "time split: unseen time " + std::to_string(m) + " outside the observed range");
        require(std::find(t_total.begin(), t_total.end(), m) == t_total.end(),
                "time split: unseen time " + std::to_string(m) + " coincides with an observed time");
    }
}

TimeSplit split_timepoints(const std::vector<double>& times) {
    std::vector<double> mids;
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        const double m = 0.5 * (times[i] + times[i + 1]);
        if (std::find(times.begin(), times.end(), m) == times.end()) mids.push_back(m);
    }
    return split_timepoints(times, std::move(mids));
}

TimeSplit split_timepoints(const std::vector<double>& times, std::vector<double> midpoints) {
    require(times.size() >= 4, "too few time points: need at least 4, got " + std::to_string(times.size()));
    for (std::size_t i = 1; i < times.size(); ++i)
        require(times[i] > times[i - 1], "time points must be strictly increasing");
    TimeSplit s;
    s.t_total = times;
    const std::size_t n = times.size();
    s.set1.push_back(0);
    s.set2.push_back(0);
    for (std::size_t i = 1; i + 1 < n; ++i) (i % 2 == 0 ? s.set1 : s.set2).push_back(i);
    s.set1.push_back(n - 1);
    s.set2.push_back(n - 1);
    s.midpoints = std::move(midpoints);
    s.validate();
    return s;
}

void TrainConfig::validate() const {
    require(lambda_fidelity >= 0.0, "invalid config: lambda must be >= 0");
    require(batch_size >= 2, "invalid config: batch size must be >= 2");
    require(pretrain_epochs >= 0 && refine_max_epochs >= 0, "invalid config: epoch counts must be >= 0");
    require(patience >= 1, "invalid config: patience must be >= 1");
    require(steps_per_epoch >= 1, "invalid config: steps_per_epoch must be >= 1");
    require(model.space_features >= 1 && model.time_features >= 1, "invalid config: encoder feature counts must be >= 1");
    pretrain_schedule.validate();
    refine_schedule.validate();
    MlpConfig m = model.mlp;
    m.input_dim = 2 * model.space_features + 2 * model.time_features;
    m.validate();
}

Batch sample_batch(const Volume4D& series, std::span<const std::size_t> time_indices, int n, Rng& rng,
                   const LabelVolume* mask) {
    series.validate();
    return Sampler(series, mask).draw(time_indices, n, rng);
}

Eigen::MatrixXd sample_coords(const Dims& dims, const TimeAxis& axis, std::span<const double> times, int n, Rng& rng,
                              const LabelVolume* mask) {
    return draw_coords(dims, support(dims, mask), axis, times, n, rng);
}

PretrainResult pretrain(const Volume4D& series, std::span<const std::size_t> time_indices, const TrainConfig& cfg,
                        int stream, const PretrainLog& log) {
    cfg.validate();
    check_normalized(series);
    const Sampler sampler(series, cfg.mask ? &*cfg.mask : nullptr);
    PretrainResult r{fresh_model(series, cfg, stream), {}, {}};
    r.optimizer = AdamState::for_size(r.model.num_params());
    Eigen::VectorXd grad(static_cast<Eigen::Index>(r.model.num_params()));

    for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        const double lr = lr_at(cfg.pretrain_schedule, epoch);
        double total = 0.0;
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            Rng rng(derive_seed(cfg.seed_sampling, {kFidelityStream, static_cast<std::uint64_t>(stream),
                                                    static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(step)}));
            grad.setZero();
            total += fidelity_grad(r.model, sampler.draw(time_indices, cfg.batch_size, rng), 1.0, grad);
            adam_step(r.model.mutable_params(), std::span<const double>(grad.data(), static_cast<std::size_t>(grad.size())),
                      r.optimizer, lr);
        }
        const double mean = total / cfg.steps_per_epoch;
        check_finite(mean, "pretrain loss");
        r.loss_curve.push_back(mean);
        if (log) log(epoch, mean, lr);
    }
    return r;
}

RefineResult refine(InrModel model1, InrModel model2, const Volume4D& series, const TimeSplit& split,
                    const TrainConfig& cfg, const RefineLog& log) {
    check_refine_inputs(model1, model2, series, split, cfg);
    model1.mode = Mode::Train;
    model2.mode = Mode::Train;

    const Sampler sampler(series, cfg.mask ? &*cfg.mask : nullptr);
    const double lambda = cfg.lambda_fidelity;

    AdamState adam1 = AdamState::for_size(model1.num_params());
    AdamState adam2 = AdamState::for_size(model2.num_params());
    Eigen::VectorXd g1(static_cast<Eigen::Index>(model1.num_params()));
    Eigen::VectorXd g2(static_cast<Eigen::Index>(model2.num_params()));

    RefineResult best{model1, model2, {}};
    double best_total = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < cfg.refine_max_epochs; ++epoch) {
        // The epoch's losses are measured on these parameters before they move.
        InrModel snap1 = model1;
        InrModel snap2 = model2;
        RefineEpoch rec;
        rec.lr = lr_at(cfg.refine_schedule, epoch);
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            const auto e = static_cast<std::uint64_t>(epoch);
            const auto s = static_cast<std::uint64_t>(step);
            g1.setZero();
            g2.setZero();

            const RefineBatches b = draw_refine_batches(sampler, split, cfg, e, s);
            rec.l1 += fidelity_grad(model1, b.fidelity1, lambda, g1);
            rec.l2 += fidelity_grad(model2, b.fidelity2, lambda, g2);

            ForwardResult f1 = forward(model1, model1.encoder.encode_batch(b.cross));
            ForwardResult f2 = forward(model2, model2.encoder.encode_batch(b.cross));
            const Eigen::VectorXd diff = f1.output - f2.output;
            const double n = static_cast<double>(diff.size());
            const double lc = diff.squaredNorm() / n;
            check_finite(lc, "cross loss");
            rec.l_cross += lc;
            const Eigen::VectorXd d = diff * (2.0 / n);
            g1 += backward(model1, *f1.cache, d).values;
            g2 += backward(model2, *f2.cache, -d).values;

            adam_step(model1.mutable_params(), std::span<const double>(g1.data(), static_cast<std::size_t>(g1.size())),
                      adam1, rec.lr);
            adam_step(model2.mutable_params(), std::span<const double>(g2.data(), static_cast<std::size_t>(g2.size())),
                      adam2, rec.lr);
        }
        const double k = 1.0 / cfg.steps_per_epoch;
        rec.l1 *= k;
        rec.l2 *= k;
        rec.l_cross *= k;
        rec.l_total = lambda * rec.l1 + lambda * rec.l2 + rec.l_cross;
        check_finite(rec.l_total, "total loss");
        best.history.epochs.push_back(rec);
        if (log) log(epoch, rec);

        if (rec.l_total < best_total) {
            best_total = rec.l_total;
            best.history.best_epoch = epoch;
            best.model1 = std::move(snap1);
            best.model2 = std::move(snap2);
        } else if (epoch - best.history.best_epoch >= cfg.patience) {
            break;
        }
    }
    return best;
}

RefineEpoch refine_losses(InrModel model1, InrModel model2, const Volume4D& series, const TimeSplit& split,
                          const TrainConfig& cfg, int epoch) {
    check_refine_inputs(model1, model2, series, split, cfg);
    require(epoch >= 0, "refine_losses: negative epoch");
    model1.mode = Mode::Train;
    model2.mode = Mode::Train;
    const Sampler sampler(series, cfg.mask ? &*cfg.mask : nullptr);
    RefineEpoch rec;
    rec.lr = lr_at(cfg.refine_schedule, epoch);
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
        const RefineBatches b =
            draw_refine_batches(sampler, split, cfg, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(step));
        rec.l1 += mse_loss(forward(model1, model1.encoder.encode_batch(b.fidelity1.coords)).output, b.fidelity1.targets, nullptr);
        rec.l2 += mse_loss(forward(model2, model2.encoder.encode_batch(b.fidelity2.coords)).output, b.fidelity2.targets, nullptr);
        const Eigen::VectorXd diff = forward(model1, model1.encoder.encode_batch(b.cross)).output -
                                     forward(model2, model2.encoder.encode_batch(b.cross)).output;
        rec.l_cross += diff.squaredNorm() / static_cast<double>(diff.size());
    }
    const double k = 1.0 / cfg.steps_per_epoch;
    rec.l1 *= k;
    rec.l2 *= k;
    rec.l_cross *= k;
    rec.l_total = cfg.lambda_fidelity * rec.l1 + cfg.lambda_fidelity * rec.l2 + rec.l_cross;
    return rec;
}

Eigen::VectorXd average_predict(const InrModel& model1, const InrModel& model2,
                                const Eigen::Ref<const Eigen::MatrixXd>& coords) {
    require(model1.mode == Mode::Eval && model2.mode == Mode::Eval, "average_predict requires eval-mode models");
    require(!model1.encoder.empty() && !model2.encoder.empty(), "average_predict: models carry no encoder");
    require(model1.encoder.space_features() == model2.encoder.space_features() &&
                model1.encoder.time_features() == model2.encoder.time_features(),
            "encoder mismatch between the two models");
    const Eigen::VectorXd a = predict(model1, model1.encoder.encode_batch(coords));
    const Eigen::VectorXd b = predict(model2, model2.encoder.encode_batch(coords));
    return 0.5 * a + 0.5 * b;
}

Volume4D reconstruct_normalized(const InrModel& model1, const InrModel& model2, const Dims& dims,
                                const Spacing& spacing, const std::vector<double>& times) {
    require(dims.valid(), "invalid dims for reconstruction");
    require(!times.empty(), "reconstruct: no times requested");
    for (std::size_t i = 1; i < times.size(); ++i)
        require(times[i] > times[i - 1], "reconstruct: times must be strictly increasing");
    const TimeAxis axis{model1.domain.t_min, model1.domain.t_max};
    const auto grid = coord_grid(dims);
    const auto n = static_cast<Eigen::Index>(grid.size());

    Volume4D out;
    for (double t : times) {
        Volume3D vol(dims, spacing);
        const double tn = axis.normalize(t);
        for (Eigen::Index start = 0; start < n; start += kPredictChunk) {
            const Eigen::Index len = std::min(kPredictChunk, n - start);
            Eigen::MatrixXd coords(4, len);
            for (Eigen::Index i = 0; i < len; ++i) {
                const auto& c = grid[static_cast<std::size_t>(start + i)];
                coords.col(i) << c[0], c[1], c[2], tn;
            }
            const Eigen::VectorXd v = average_predict(model1, model2, coords);
            std::copy(v.data(), v.data() + len, vol.data.begin() + start);
        }
        out.volumes.push_back(std::move(vol));
        out.times.push_back(t);
    }
    return out;
}

Volume4D reconstruct(const InrModel& model1, const InrModel& model2, const Dims& dims, const Spacing& spacing,
                     const std::vector<double>& times, const std::pair<double, double>& intensity_scale) {
    Volume4D out = reconstruct_normalized(model1, model2, dims, spacing, times);
    for (auto& v : out.volumes)
        for (double& x : v.data) x = denormalize_value(x, intensity_scale);
    out.intensity_scale = intensity_scale;
    return out;
}

} // namespace inr4d
