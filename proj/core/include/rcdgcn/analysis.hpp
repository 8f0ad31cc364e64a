#pragma once

#include <string>
#include <vector>

#include "rcdgcn/dataset.hpp"
#include "rcdgcn/model.hpp"
#include "rcdgcn/synth.hpp"
#include "rcdgcn/tab.hpp"

namespace rcdgcn {

/**
 * Squared-Euclidean-norm summary of the TAB weights per capacity factor.
 * Matrix level sums over a factor's source and destination weight rows.
 * Link level sums the factor's squared embedding contribution at each node,
 * time-averaged over the supplied input samples; per-link norms of a factor
 * therefore add up exactly to its contribution total.
 */
struct NormReport {
    std::vector<std::string> factors;
    std::vector<double> matrix_norms;                 // per factor
    std::vector<std::vector<double>> link_norms;      // per factor, per node
    std::vector<double> contribution_totals;          // per factor
};

/// `samples` holds concatenated [speed | features] input matrices, one
/// [N x layout.total] row-major buffer per evaluated window.
NormReport factor_norms(const TabParams& tab, const FactorLayout& layout,
                        const std::vector<std::vector<double>>& samples, std::size_t n_nodes);

/**
 * Row-norm ranking of a propagation matrix: score(k) = sum_j A[k][j]^2,
 * threshold at the nearest-rank top percentile (at least one node), ties at
 * the threshold all flagged, flagged ids in descending score order.
 */
struct SignificantLinks {
    std::vector<double> scores;  // per node
    double threshold = 0.0;
    std::vector<std::size_t> flagged;
};

SignificantLinks significant_links(const std::vector<double>& att, std::size_t n_nodes,
                                   double percentile = 95.0);

/// Sliding horizon-1 predictions over a split: prediction for absolute step
/// t comes from the window whose history ends at t-1. Truth is read from
/// the raw (mph) series.
struct PredSeries {
    std::size_t t_begin = 0;  // absolute step of the first prediction
    std::size_t len = 0;
    std::size_t n_nodes = 0;
    std::vector<double> pred_mph;   // [len,N]
    std::vector<double> truth_mph;  // [len,N]
};

/// zero_blocks lists (offset,width) FactorLayout column ranges to blank at
/// inference time (feature-sensitivity probes); ranges must lie in the
/// feature region of the layout.
PredSeries predict_series(const ModelParams& m, const Split& split,
                          const NormalizationSpec& norm, const RawData& raw,
                          const std::vector<std::pair<std::size_t, std::size_t>>& zero_blocks = {});

/// Aligned truth/prediction series around one incident with before/during/
/// after error summaries.
struct CaseRecord {
    IncidentEvent incident;
    std::size_t span_begin = 0;  // absolute steps, inclusive
    std::size_t span_end = 0;
    std::vector<double> truth_mph;
    std::vector<double> pred_mph;
    std::vector<int> incident_flag;
    double pre_mae = 0.0;
    double during_mae = 0.0;
    double recovery_mae = 0.0;
};

/// Throws IndexError when the incident lies outside the prediction series.
/// The margin is clipped to the series bounds.
CaseRecord extract_case(const PredSeries& series, const IncidentEvent& incident,
                        std::size_t margin);

void save_norm_report(const NormReport& r, const RoadGraph& g, const std::string& matrix_path,
                      const std::string& link_path);
void save_significant_links(const SignificantLinks& s, const RoadGraph& g,
                            const std::string& path);
void save_case(const CaseRecord& c, const std::string& path);

}  // namespace rcdgcn
