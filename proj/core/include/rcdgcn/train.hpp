#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcdgcn/dataset.hpp"
#include "rcdgcn/model.hpp"

namespace rcdgcn {

struct TrainConfig {
    double lr = 1e-4;
    double weight_decay = 0.0;  // kept at zero; the optimizer applies none
    std::size_t batch_size = 40;
    std::size_t epochs = 200;
    double rmsprop_alpha = 0.99;
    double rmsprop_eps = 1e-8;
    std::size_t early_stop_patience = 20;
    std::uint64_t seed = 0;
};

/// Mean of squared differences over all elements.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

/// Per-parameter running second moments, aligned with named_params() order.
struct RmspropState {
    std::vector<std::vector<double>> v;
};

RmspropState init_rmsprop(const ModelParams& m);

/// v <- alpha*v + (1-alpha)*g^2;  p <- p - lr*g/(sqrt(v)+eps).
/// Throws NumericError when a gradient is NaN, leaving params untouched.
void rmsprop_step(const ModelParams& m, RmspropState& state, const TrainConfig& cfg);

struct EpochStats {
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> curve;
    double best_val_mse = 0.0;
    std::size_t best_epoch = 0;
};

/**
 * Mini-batch training with a full reshuffle per epoch from the run seed,
 * batch gradients averaged over samples, and early stopping on validation
 * MSE. The model is left holding the best-validation parameters. Throws
 * TrainingError (with the epoch index) when the loss diverges.
 */
TrainResult train(ModelParams& m, const WindowSource& train_windows,
                  const WindowSource& val_windows, const TrainConfig& cfg);

struct HorizonMetrics {
    double mae_mph = 0.0;
    double rmse_norm = 0.0;
    double rmse_mph = 0.0;
};

/// MAE is reported in mph; RMSE on both the normalized and the mph scale.
struct EvalReport {
    double mae_mph = 0.0;
    double rmse_norm = 0.0;
    double rmse_mph = 0.0;
    std::vector<HorizonMetrics> per_horizon;
    std::size_t n_windows = 0;
};

/// Aggregates over every window, node and horizon step of the source.
/// Throws InsufficientDataError when the source is empty.
EvalReport evaluate(const ModelParams& m, const WindowSource& windows,
                    const NormalizationSpec& norm);

/// Mean per-window MSE on the normalized scale (the early-stopping signal).
double mean_mse(const ModelParams& m, const WindowSource& windows);

void save_loss_curve(const TrainResult& r, const std::string& path);
void save_eval_report(const EvalReport& r, const std::string& path);

}  // namespace rcdgcn
