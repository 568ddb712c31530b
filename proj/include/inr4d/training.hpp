#pragma once

#include "inr4d/network.hpp"
#include "inr4d/optimizer.hpp"
#include "inr4d/rng.hpp"
#include "inr4d/series.hpp"
#include "inr4d/volume.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace inr4d {

/// Interleaved partition of the observed time points plus the unseen
/// times used to couple the two models during refinement.
struct TimeSplit {
    std::vector<double> t_total;
    std::vector<std::size_t> set1; // indices into t_total
    std::vector<std::size_t> set2;
    std::vector<double> midpoints;

    std::vector<double> times1() const;
    std::vector<double> times2() const;
    void validate() const;
};

/// Both endpoints go to both sets; interior points alternate, with the
/// first interior point in set2. Midpoints are consecutive-pair midpoints
/// that do not coincide with an observed time.
TimeSplit split_timepoints(const std::vector<double>& times);
/// Same partition with caller-chosen unseen times.
TimeSplit split_timepoints(const std::vector<double>& times, std::vector<double> midpoints);

/// Encoder widths plus network shape for one model stream.
struct ModelSpec {
    int space_features = 128;
    int time_features = 32;
    MlpConfig mlp;
};

struct TrainConfig {
    ModelSpec model;
    double lambda_fidelity = 0.1;
    int batch_size = 25000;
    int pretrain_epochs = 500;
    int refine_max_epochs = 300;
    int patience = 50;
    /// Mini-batch updates that make up one epoch.
    int steps_per_epoch = 1;
    LrSchedule pretrain_schedule;
    LrSchedule refine_schedule;
    std::uint64_t seed_model1 = 1;
    std::uint64_t seed_model2 = 2;
    std::uint64_t seed_sampling = 3;
    /// Nonzero voxels restrict where coordinates are drawn.
    std::optional<LabelVolume> mask;

    void validate() const;
};

struct Batch {
    Eigen::MatrixXd coords;  // 4 x n normalized (x, y, z, t)
    Eigen::VectorXd targets; // n intensities
};

/// Draws n (coordinate, intensity) pairs uniformly from (mask voxels) x
/// (listed time indices) of a normalized series.
Batch sample_batch(const Volume4D& series, std::span<const std::size_t> time_indices, int n, Rng& rng,
                   const LabelVolume* mask = nullptr);

/// Coordinates only, at arbitrary gestational ages (no observation needed).
Eigen::MatrixXd sample_coords(const Dims& dims, const TimeAxis& axis, std::span<const double> times, int n,
                              Rng& rng, const LabelVolume* mask = nullptr);

struct PretrainResult {
    InrModel model;
    std::vector<double> loss_curve; // mean training MSE per epoch
    AdamState optimizer;
};

/// Called once per epoch with (epoch, mean loss, learning rate).
using PretrainLog = std::function<void(int, double, double)>;

/// Fits one model to the listed time points of a normalized series by
/// minimizing the mini-batch MSE. `stream` (1 or 2) selects the model seed.
PretrainResult pretrain(const Volume4D& series, std::span<const std::size_t> time_indices, const TrainConfig& cfg,
                        int stream, const PretrainLog& log = {});

struct RefineEpoch {
    double l1 = 0.0;
    double l2 = 0.0;
    double l_cross = 0.0;
    double l_total = 0.0;
    double lr = 0.0;
};

struct RefineHistory {
    std::vector<RefineEpoch> epochs;
    int best_epoch = -1;
};

struct RefineResult {
    InrModel model1;
    InrModel model2;
    RefineHistory history;
};

using RefineLog = std::function<void(int, const RefineEpoch&)>;

/// Jointly updates both models on
///   L_total = lambda * L1 + lambda * L2 + L_cross,
/// where L1 / L2 are each model's fidelity on its own time subset and
/// L_cross is the MSE between the two models at the unseen midpoint times.
/// Stops after refine_max_epochs or `patience` epochs without a new best
/// L_total and returns the parameters that produced the best epoch.
RefineResult refine(InrModel model1, InrModel model2, const Volume4D& series, const TimeSplit& split,
                    const TrainConfig& cfg, const RefineLog& log = {});

/// Loss terms of the given parameters on the mini-batches refine draws in
/// `epoch`, with nothing updated. With steps_per_epoch = 1 this reproduces
/// the epoch's RefineHistory entry for the parameters it started from.
RefineEpoch refine_losses(InrModel model1, InrModel model2, const Volume4D& series, const TimeSplit& split,
                          const TrainConfig& cfg, int epoch);

/// 0.5 * f1 + 0.5 * f2 for eval-mode models; coords are 4 x n normalized.
Eigen::VectorXd average_predict(const InrModel& model1, const InrModel& model2,
                                const Eigen::Ref<const Eigen::MatrixXd>& coords);

/// Evaluates the averaged model on the full grid at each requested age
/// (any value, observed or not) and maps intensities back with the scale.
Volume4D reconstruct(const InrModel& model1, const InrModel& model2, const Dims& dims, const Spacing& spacing,
                     const std::vector<double>& times, const std::pair<double, double>& intensity_scale);

/// Same as reconstruct, without denormalization (values in model units).
Volume4D reconstruct_normalized(const InrModel& model1, const InrModel& model2, const Dims& dims,
                                const Spacing& spacing, const std::vector<double>& times);

} // namespace inr4d
