#include "rcdgcn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rcdgcn/csv.hpp"
#include "rcdgcn/error.hpp"

namespace rcdgcn {

NormReport factor_norms(const TabParams& tab, const FactorLayout& layout,
                        const std::vector<std::vector<double>>& samples, std::size_t n_nodes) {
    const std::size_t width = layout.total;
    if (width != tab.input_width()) {
        throw ConfigError("factor layout covers " + std::to_string(width) +
                          " columns, TAB weights expect " + std::to_string(tab.input_width()));
    }
    for (const auto& s : samples) {
        if (s.size() != n_nodes * width) {
            throw ConfigError("factor_norms: sample buffer does not match N x layout width");
        }
    }
    const std::size_t d_e = tab.d_e;
    const auto& wsrc = tab.w_src.values();
    const auto& wdst = tab.w_dst.values();

    NormReport r;
    for (const FactorBlock& block : layout.blocks) {
        r.factors.push_back(block.name);

        double mnorm = 0.0;
        for (std::size_t row = block.offset; row < block.offset + block.width; ++row) {
            for (std::size_t e = 0; e < d_e; ++e) {
                mnorm += wsrc[row * d_e + e] * wsrc[row * d_e + e];
                mnorm += wdst[row * d_e + e] * wdst[row * d_e + e];
            }
        }
        r.matrix_norms.push_back(mnorm);

        // Time-averaged squared contribution of this factor at each node.
        std::vector<double> link(n_nodes, 0.0);
        for (const auto& sample : samples) {
            for (std::size_t node = 0; node < n_nodes; ++node) {
                const double* in = sample.data() + node * width;
                for (std::size_t e = 0; e < d_e; ++e) {
                    double c_src = 0.0, c_dst = 0.0;
                    for (std::size_t row = block.offset; row < block.offset + block.width;
                         ++row) {
                        c_src += in[row] * wsrc[row * d_e + e];
                        c_dst += in[row] * wdst[row * d_e + e];
                    }
                    link[node] += c_src * c_src + c_dst * c_dst;
                }
            }
        }
        if (!samples.empty()) {
            const double inv = 1.0 / static_cast<double>(samples.size());
            for (double& v : link) v *= inv;
        }
        r.contribution_totals.push_back(std::accumulate(link.begin(), link.end(), 0.0));
        r.link_norms.push_back(std::move(link));
    }
    return r;
}

SignificantLinks significant_links(const std::vector<double>& att, std::size_t n_nodes,
                                   double percentile) {
    if (att.size() != n_nodes * n_nodes) {
        throw DimensionError("significant_links: matrix of " + std::to_string(att.size()) +
                             " entries is not " + std::to_string(n_nodes) + " square");
    }
    if (n_nodes == 0) {
        throw DimensionError("significant_links: empty matrix");
    }
    SignificantLinks out;
    out.scores.resize(n_nodes, 0.0);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n_nodes; ++j) {
            const double a = att[i * n_nodes + j];
            s += a * a;
        }
        out.scores[i] = s;
    }

    // Nearest-rank threshold: the k-th largest score with
    // k = ceil(N * (100 - percentile) / 100), never below 1.
    const double frac = (100.0 - percentile) / 100.0;
    std::size_t k = static_cast<std::size_t>(
        std::ceil(static_cast<double>(n_nodes) * frac - 1e-9));
    k = std::clamp<std::size_t>(k, 1, n_nodes);

    std::vector<std::size_t> order(n_nodes);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (out.scores[a] != out.scores[b]) return out.scores[a] > out.scores[b];
        return a < b;
    });
    out.threshold = out.scores[order[k - 1]];
    for (std::size_t i : order) {
        if (out.scores[i] >= out.threshold) out.flagged.push_back(i);
    }
    return out;
}

PredSeries predict_series(const ModelParams& m, const Split& split,
                          const NormalizationSpec& norm, const RawData& raw,
                          const std::vector<std::pair<std::size_t, std::size_t>>& zero_blocks) {
    const Hyper& h = m.hyper;
    WindowSource src(split, h.q, h.horizon, 1);
    if (src.size() == 0) {
        throw InsufficientDataError("split too short for a prediction series");
    }
    PredSeries out;
    out.t_begin = split.t0 + h.q;
    out.len = src.size();
    out.n_nodes = h.n_nodes;
    out.pred_mph.resize(out.len * h.n_nodes);
    out.truth_mph.resize(out.len * h.n_nodes);

    for (const auto& [offset, width] : zero_blocks) {
        if (offset < h.p || offset + width > h.p + h.lp) {
            throw ConfigError("zero block [" + std::to_string(offset) + "," +
                              std::to_string(offset + width) + ") is not a feature column range");
        }
    }
    for (std::size_t k = 0; k < src.size(); ++k) {
        StateWindow w = src.window(k);
        for (const auto& [offset, width] : zero_blocks) {
            for (std::size_t t = 0; t < h.q; ++t) {
                for (std::size_t node = 0; node < h.n_nodes; ++node) {
                    double* zrow = w.z.data() + (t * h.n_nodes + node) * h.lp;
                    for (std::size_t c = 0; c < width; ++c) zrow[offset - h.p + c] = 0.0;
                }
            }
        }
        const auto pred = predict(m, w);
        const std::size_t t_abs = out.t_begin + k;
        for (std::size_t node = 0; node < h.n_nodes; ++node) {
            out.pred_mph[k * h.n_nodes + node] =
                norm.denormalize_speed(pred[node * h.p]);  // first horizon step
            out.truth_mph[k * h.n_nodes + node] = raw.speed(t_abs, node);
        }
    }
    return out;
}

CaseRecord extract_case(const PredSeries& series, const IncidentEvent& incident,
                        std::size_t margin) {
    const std::size_t t_last = series.t_begin + series.len - 1;
    if (incident.start < series.t_begin || incident.end > t_last) {
        throw IndexError("incident [" + std::to_string(incident.start) + "," +
                         std::to_string(incident.end) + "] outside prediction series [" +
                         std::to_string(series.t_begin) + "," + std::to_string(t_last) + "]");
    }
    CaseRecord c;
    c.incident = incident;
    c.span_begin = incident.start > series.t_begin + margin ? incident.start - margin
                                                            : series.t_begin;
    c.span_end = std::min(t_last, incident.end + margin);

    double pre_sum = 0.0, during_sum = 0.0, rec_sum = 0.0;
    std::size_t pre_n = 0, during_n = 0, rec_n = 0;
    for (std::size_t t = c.span_begin; t <= c.span_end; ++t) {
        const std::size_t k = t - series.t_begin;
        const double truth = series.truth_mph[k * series.n_nodes + incident.node];
        const double pred = series.pred_mph[k * series.n_nodes + incident.node];
        c.truth_mph.push_back(truth);
        c.pred_mph.push_back(pred);
        const bool active = t >= incident.start && t <= incident.end;
        c.incident_flag.push_back(active ? 1 : 0);
        const double err = std::abs(pred - truth);
        if (t < incident.start) {
            pre_sum += err;
            ++pre_n;
        } else if (active) {
            during_sum += err;
            ++during_n;
        } else {
            rec_sum += err;
            ++rec_n;
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    c.pre_mae = pre_n ? pre_sum / static_cast<double>(pre_n) : nan;
    c.during_mae = during_n ? during_sum / static_cast<double>(during_n) : nan;
    c.recovery_mae = rec_n ? rec_sum / static_cast<double>(rec_n) : nan;
    return c;
}

void save_norm_report(const NormReport& r, const RoadGraph& g, const std::string& matrix_path,
                      const std::string& link_path) {
    csv::Writer wm;
    wm.header({"factor", "norm"});
    for (std::size_t f = 0; f < r.factors.size(); ++f) {
        wm.row({r.factors[f], csv::format_double(r.matrix_norms[f])});
    }
    wm.save(matrix_path);

    csv::Writer wl;
    wl.header({"node_id", "factor", "norm"});
    for (std::size_t node = 0; node < g.n_nodes(); ++node) {
        for (std::size_t f = 0; f < r.factors.size(); ++f) {
            wl.row({g.node_ids[node], r.factors[f],
                    csv::format_double(r.link_norms[f][node])});
        }
    }
    wl.save(link_path);
}

void save_significant_links(const SignificantLinks& s, const RoadGraph& g,
                            const std::string& path) {
    csv::Writer w;
    w.header({"node_id", "score", "flagged"});
    std::vector<std::size_t> order(s.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (s.scores[a] != s.scores[b]) return s.scores[a] > s.scores[b];
        return a < b;
    });
    for (std::size_t i : order) {
        const bool flagged =
            std::find(s.flagged.begin(), s.flagged.end(), i) != s.flagged.end();
        w.row({g.node_ids[i], csv::format_double(s.scores[i]), flagged ? "1" : "0"});
    }
    w.save(path);
}

void save_case(const CaseRecord& c, const std::string& path) {
    csv::Writer w;
    w.header({"time", "truth_mph", "pred_mph", "incident_flag"});
    for (std::size_t i = 0; i < c.truth_mph.size(); ++i) {
        w.row({std::to_string(c.span_begin + i), csv::format_double(c.truth_mph[i]),
               csv::format_double(c.pred_mph[i]), std::to_string(c.incident_flag[i])});
    }
    w.save(path);
}

}  // namespace rcdgcn
