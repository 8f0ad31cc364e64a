#include "rcdgcn/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rcdgcn/csv.hpp"
#include "rcdgcn/error.hpp"
#include "rcdgcn/rng.hpp"

namespace rcdgcn {

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) {
        throw DimensionError("mse_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                             shape_str(target.shape()));
    }
    const Tensor d = sub(pred, target);
    return mean(mul(d, d));
}

RmspropState init_rmsprop(const ModelParams& m) {
    RmspropState s;
    for (const auto& [name, t] : m.named_params()) {
        s.v.emplace_back(t.numel(), 0.0);
    }
    return s;
}

void rmsprop_step(const ModelParams& m, RmspropState& state, const TrainConfig& cfg) {
    auto params = m.named_params();
    if (params.size() != state.v.size()) {
        throw ConfigError("rmsprop state does not match the parameter list");
    }
    // Validate every gradient before touching any parameter.
    for (const auto& [name, t] : params) {
        if (!t.has_grad()) continue;
        for (double g : t.grad()) {
            if (std::isnan(g)) {
                throw NumericError("rmsprop_step: NaN gradient in '" + name + "'");
            }
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor t = params[i].second;
        if (!t.has_grad()) continue;
        const auto& g = t.grad();
        auto& v = state.v[i];
        auto& p = t.mutable_values();
        for (std::size_t j = 0; j < g.size(); ++j) {
            v[j] = cfg.rmsprop_alpha * v[j] + (1.0 - cfg.rmsprop_alpha) * g[j] * g[j];
            p[j] -= cfg.lr * g[j] / (std::sqrt(v[j]) + cfg.rmsprop_eps);
        }
    }
}

namespace {

std::vector<std::vector<double>> snapshot(const ModelParams& m) {
    std::vector<std::vector<double>> s;
    for (const auto& [name, t] : m.named_params()) s.push_back(t.values());
    return s;
}

void restore(const ModelParams& m, const std::vector<std::vector<double>>& s) {
    auto params = m.named_params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor t = params[i].second;
        t.mutable_values() = s[i];
    }
}

Tensor target_tensor(const StateWindow& w, const Hyper& h) {
    return Tensor::from({h.horizon, h.n_nodes, h.p}, w.y);
}

}  // namespace

double mean_mse(const ModelParams& m, const WindowSource& windows) {
    double total = 0.0;
    for (std::size_t k = 0; k < windows.size(); ++k) {
        const StateWindow w = windows.window(k);
        const auto pred = predict(m, w);
        double s = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = pred[i] - w.y[i];
            s += d * d;
        }
        total += s / static_cast<double>(pred.size());
    }
    return total / static_cast<double>(windows.size());
}

TrainResult train(ModelParams& m, const WindowSource& train_windows,
                  const WindowSource& val_windows, const TrainConfig& cfg) {
    if (train_windows.size() == 0 || val_windows.size() == 0) {
        throw InsufficientDataError("training needs non-empty train and validation windows");
    }
    if (cfg.lr <= 0.0 || cfg.batch_size == 0) {
        throw ConfigError("learning rate and batch size must be positive");
    }

    SplitMix64 shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), 0);

    RmspropState state = init_rmsprop(m);
    TrainResult result;
    result.best_val_mse = std::numeric_limits<double>::infinity();
    auto best = snapshot(m);
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order, shuffle_rng);
        double train_sum = 0.0;
        try {
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
                const double inv = 1.0 / static_cast<double>(stop - start);
                m.zero_grads();
                for (std::size_t b = start; b < stop; ++b) {
                    const StateWindow w = train_windows.window(order[b]);
                    Tape tape;
                    const Tensor pred = forward(m, w);
                    const Tensor sample = mse_loss(pred, target_tensor(w, m.hyper));
                    tape.backward(mul_scalar(sample, inv));
                    train_sum += sample.item();
                }
                rmsprop_step(m, state, cfg);
            }
        } catch (const NumericError& e) {
            throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ": " +
                                e.what());
        }

        EpochStats stats;
        stats.train_mse = train_sum / static_cast<double>(order.size());
        stats.val_mse = mean_mse(m, val_windows);
        result.curve.push_back(stats);
        if (std::isnan(stats.val_mse)) {
            throw TrainingError("validation loss is NaN at epoch " + std::to_string(epoch));
        }

        if (stats.val_mse < result.best_val_mse) {
            result.best_val_mse = stats.val_mse;
            result.best_epoch = epoch;
            best = snapshot(m);
            since_best = 0;
        } else {
            ++since_best;
            if (since_best > cfg.early_stop_patience) break;
        }
    }

    restore(m, best);
    return result;
}

EvalReport evaluate(const ModelParams& m, const WindowSource& windows,
                    const NormalizationSpec& norm) {
    if (windows.size() == 0) {
        throw InsufficientDataError("evaluate: no windows in the source");
    }
    const Hyper& h = m.hyper;
    const std::size_t horizon = h.horizon;
    std::vector<double> abs_sum(horizon, 0.0), sq_norm_sum(horizon, 0.0),
        sq_mph_sum(horizon, 0.0);
    std::vector<std::size_t> counts(horizon, 0);

    for (std::size_t k = 0; k < windows.size(); ++k) {
        const StateWindow w = windows.window(k);
        const auto pred = predict(m, w);
        const std::size_t block = h.n_nodes * h.p;
        for (std::size_t t = 0; t < horizon; ++t) {
            for (std::size_t i = 0; i < block; ++i) {
                const double pn = pred[t * block + i];
                const double yn = w.y[t * block + i];
                const double dn = pn - yn;
                const double dm = norm.denormalize_speed(pn) - norm.denormalize_speed(yn);
                abs_sum[t] += std::abs(dm);
                sq_norm_sum[t] += dn * dn;
                sq_mph_sum[t] += dm * dm;
                ++counts[t];
            }
        }
    }

    EvalReport r;
    r.n_windows = windows.size();
    double abs_all = 0.0, sqn_all = 0.0, sqm_all = 0.0;
    std::size_t count_all = 0;
    for (std::size_t t = 0; t < horizon; ++t) {
        HorizonMetrics hm;
        hm.mae_mph = abs_sum[t] / static_cast<double>(counts[t]);
        hm.rmse_norm = std::sqrt(sq_norm_sum[t] / static_cast<double>(counts[t]));
        hm.rmse_mph = std::sqrt(sq_mph_sum[t] / static_cast<double>(counts[t]));
        r.per_horizon.push_back(hm);
        abs_all += abs_sum[t];
        sqn_all += sq_norm_sum[t];
        sqm_all += sq_mph_sum[t];
        count_all += counts[t];
    }
    r.mae_mph = abs_all / static_cast<double>(count_all);
    r.rmse_norm = std::sqrt(sqn_all / static_cast<double>(count_all));
    r.rmse_mph = std::sqrt(sqm_all / static_cast<double>(count_all));
    return r;
}

void save_loss_curve(const TrainResult& r, const std::string& path) {
    csv::Writer w;
    w.header({"epoch", "train_mse", "val_mse"});
    for (std::size_t e = 0; e < r.curve.size(); ++e) {
        w.row({std::to_string(e), csv::format_double(r.curve[e].train_mse),
               csv::format_double(r.curve[e].val_mse)});
    }
    w.save(path);
}

void save_eval_report(const EvalReport& r, const std::string& path) {
    csv::Writer w;
    w.header({"metric", "scope", "value"});
    w.row({"mae", "mph", csv::format_double(r.mae_mph)});
    w.row({"rmse", "normalized", csv::format_double(r.rmse_norm)});
    w.row({"rmse", "mph", csv::format_double(r.rmse_mph)});
    for (std::size_t t = 0; t < r.per_horizon.size(); ++t) {
        const std::string suffix = "_h" + std::to_string(t + 1);
        w.row({"mae" + suffix, "mph", csv::format_double(r.per_horizon[t].mae_mph)});
        w.row({"rmse" + suffix, "normalized", csv::format_double(r.per_horizon[t].rmse_norm)});
        w.row({"rmse" + suffix, "mph", csv::format_double(r.per_horizon[t].rmse_mph)});
    }
    w.row({"n_windows", "count", std::to_string(r.n_windows)});
    w.save(path);
}

}  // namespace rcdgcn
