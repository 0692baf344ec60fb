#pragma once

// Exact O(n^2) t-SNE to two dimensions.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "semtext/error.hpp"
#include "semtext/random.hpp"
#include "semtext/vector.hpp"

namespace semtext {

struct TsneConfig {
    double perplexity = 30.0;
    std::size_t iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    std::size_t exaggeration_iters = 250;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    std::size_t momentum_switch_iter = 250;
    double init_stddev = 1e-2;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(perplexity > 1.0)) fail(ErrorCode::InvalidArgument, "perplexity must exceed 1");
        if (iterations == 0) fail(ErrorCode::InvalidArgument, "iterations must be positive");
        if (!(learning_rate > 0.0) || !(early_exaggeration > 0.0) || !(init_stddev > 0.0)) {
            fail(ErrorCode::InvalidArgument, "t-SNE hyperparameters must be positive");
        }
    }

    /// Perplexity actually used for n points: at most (n - 1) / 3, and never below 1.
    double effective_perplexity(std::size_t n) const {
        return std::max(1.0, std::min(perplexity, static_cast<double>(n - 1) / 3.0));
    }
};

struct SigmaCalibration {
    double sigma = 0.0;
    double beta = 0.0;                ///< 1 / (2 sigma^2)
    std::vector<double> conditional;  ///< P(j|i) over the row's entries
    double achieved_perplexity = 0.0; ///< 2^H
    std::size_t steps = 0;
    bool converged = false;
};

inline constexpr double kPerplexityTolerance = 1e-5;
inline constexpr std::size_t kMaxSigmaSteps = 50;

/// Bandwidth search for one point.
///
/// `sq_distances` holds squared distances to every other point. The search runs in
/// log(beta) space: it doubles the step until the target is bracketed, then bisects.
/// It stops once |2^H - perplexity| / perplexity <= 1e-5 or after 50 steps, keeping
/// the best value seen.
inline SigmaCalibration calibrate_sigma(std::span<const double> sq_distances, double perplexity) {
    if (sq_distances.empty()) fail(ErrorCode::InvalidArgument, "row has no neighbors");
    const double dmin = *std::min_element(sq_distances.begin(), sq_distances.end());
    const double dmax = *std::max_element(sq_distances.begin(), sq_distances.end());
    if (dmax <= 0.0) fail(ErrorCode::DegenerateRow, "all distances in the row are zero");

    const std::size_t m = sq_distances.size();
    if (dmin == dmax) {
        // Every neighbor is equally far: P(j|i) is uniform for any bandwidth.
        SigmaCalibration flat;
        flat.beta = 1.0 / dmax;
        flat.sigma = std::sqrt(dmax / 2.0);
        flat.conditional.assign(m, 1.0 / static_cast<double>(m));
        flat.achieved_perplexity = static_cast<double>(m);
        flat.steps = 1;
        flat.converged = std::abs(flat.achieved_perplexity - perplexity) / perplexity <= kPerplexityTolerance;
        return flat;
    }
    std::vector<double> w(m);
    // Returns perplexity exp(H_nats) and fills w with unnormalized weights.
    const auto evaluate = [&](double beta, double& weight_sum) {
        weight_sum = 0.0;
        double weighted_d = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double shifted = sq_distances[j] - dmin;
            w[j] = std::exp(-shifted * beta);
            weight_sum += w[j];
            weighted_d += shifted * w[j];
        }
        const double entropy_nats = std::log(weight_sum) + beta * weighted_d / weight_sum;
        return std::exp(entropy_nats);
    };

    double mean_shift = 0.0;
    for (double d : sq_distances) mean_shift += d - dmin;
    mean_shift /= static_cast<double>(m);
    double log_beta = -std::log(mean_shift);
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    double step = std::log(2.0);

    SigmaCalibration best;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t s = 1; s <= kMaxSigmaSteps; ++s) {
        const double beta = std::exp(log_beta);
        double weight_sum = 0.0;
        const double perp = evaluate(beta, weight_sum);
        const double err = std::abs(perp - perplexity) / perplexity;
        if (err < best_err) {
            best_err = err;
            best.beta = beta;
            best.achieved_perplexity = perp;
            best.conditional.assign(w.begin(), w.end());
            for (double& p : best.conditional) p /= weight_sum;
        }
        best.steps = s;
        if (err <= kPerplexityTolerance) {
            best.converged = true;
            break;
        }
        if (perp > perplexity) {
            lo = log_beta; // too flat: sharpen
            if (std::isinf(hi)) {
                log_beta += step;
                step *= 2.0;
            } else {
                log_beta = 0.5 * (lo + hi);
            }
        } else {
            hi = log_beta;
            if (std::isinf(lo)) {
                log_beta -= step;
                step *= 2.0;
            } else {
                log_beta = 0.5 * (lo + hi);
            }
        }
    }
    best.converged = best.converged || best_err <= kPerplexityTolerance;
    best.sigma = std::sqrt(1.0 / (2.0 * best.beta));
    return best;
}

inline std::vector<std::vector<double>> squared_distance_matrix(const std::vector<std::vector<double>>& pts) {
    const std::size_t n = pts.size();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < pts[i].size(); ++k) {
                const double diff = pts[i][k] - pts[j][k];
                acc += diff * diff;
            }
            d[i][j] = acc;
            d[j][i] = acc;
        }
    }
    return d;
}

inline constexpr double kProbabilityFloor = 1e-12;

struct JointProbabilities {
    std::size_t n = 0;
    std::vector<double> p;          ///< row-major n x n, floored at 1e-12 off the diagonal
    double sum_before_floor = 0.0;
    std::vector<double> sigmas;
    std::size_t degenerate_rows = 0;

    double at(std::size_t i, std::size_t j) const { return p[i * n + j]; }
};

/// Symmetrized affinities p_ij = (P(j|i) + P(i|j)) / 2n with a zero diagonal.
inline JointProbabilities joint_p(const std::vector<std::vector<double>>& pts, double perplexity) {
    const std::size_t n = pts.size();
    if (n < 2) fail(ErrorCode::InvalidArgument, "t-SNE needs at least two points");
    const auto dist = squared_distance_matrix(pts);
    std::vector<double> cond(n * n, 0.0);
    JointProbabilities out;
    out.n = n;
    out.sigmas.resize(n, 0.0);
    std::vector<double> row(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0, c = 0; j < n; ++j) {
            if (j != i) row[c++] = dist[i][j];
        }
        std::vector<double> probs;
        try {
            auto cal = calibrate_sigma(row, perplexity);
            probs = std::move(cal.conditional);
            out.sigmas[i] = cal.sigma;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateRow) throw;
            probs.assign(n - 1, 1.0 / static_cast<double>(n - 1)); // duplicates: uniform, no sigma search
            ++out.degenerate_rows;
        }
        for (std::size_t j = 0, c = 0; j < n; ++j) {
            if (j != i) cond[i * n + j] = probs[c++];
        }
    }
    out.p.assign(n * n, 0.0);
    const double denom = 2.0 * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            out.p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / denom;
            out.sum_before_floor += out.p[i * n + j];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) out.p[i * n + j] = std::max(out.p[i * n + j], kProbabilityFloor);
        }
    }
    return out;
}

struct TsneLayout {
    std::vector<std::array<double, 2>> points;
    std::vector<std::string> labels;   ///< empty or one per point
    std::vector<std::string> item_ids; ///< empty or one per point
    std::vector<double> kl_trace;      ///< KL(P || Q) at the start of each iteration
    double perplexity = 0.0;           ///< effective perplexity used

    std::size_t size() const noexcept { return points.size(); }
};

namespace detail {

inline void center(std::vector<std::array<double, 2>>& y) {
    double mx = 0.0;
    double my = 0.0;
    for (const auto& p : y) {
        mx += p[0];
        my += p[1];
    }
    mx /= static_cast<double>(y.size());
    my /= static_cast<double>(y.size());
    for (auto& p : y) {
        p[0] -= mx;
        p[1] -= my;
    }
}

} // namespace detail

/// Gradient descent on KL(P || Q) with Student-t low-dimensional affinities,
/// early exaggeration, momentum and per-coordinate adaptive gains. Deterministic
/// for a fixed (input, config).
inline TsneLayout tsne_embed(const std::vector<std::vector<double>>& pts, const TsneConfig& cfg) {
    cfg.validate();
    const std::size_t n = pts.size();
    if (n < 2) fail(ErrorCode::InvalidArgument, "t-SNE needs at least two points");
    for (const auto& p : pts) {
        if (p.size() != pts.front().size()) fail(ErrorCode::DimensionMismatch, "all points must share a dimension");
    }
    TsneLayout layout;
    layout.perplexity = cfg.effective_perplexity(n);
    const JointProbabilities joint = joint_p(pts, layout.perplexity);
    const std::vector<double>& P = joint.p;

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::array<double, 2>> y(n);
    for (auto& p : y) {
        p[0] = standard_normal(rng) * cfg.init_stddev;
        p[1] = standard_normal(rng) * cfg.init_stddev;
    }
    // Identical inputs start (and so stay) together.
    for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (pts[j] == pts[i]) {
                y[i] = y[j];
                break;
            }
        }
    }
    detail::center(y);
    std::vector<std::array<double, 2>> velocity(n, {0.0, 0.0});
    std::vector<std::array<double, 2>> gains(n, {1.0, 1.0});
    std::vector<double> num(n * n, 0.0);
    std::vector<std::array<double, 2>> grad(n);
    layout.kl_trace.reserve(cfg.iterations);

    for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
        const double exaggeration = iter < cfg.exaggeration_iters ? cfg.early_exaggeration : 1.0;
        const double momentum = iter < cfg.momentum_switch_iter ? cfg.initial_momentum : cfg.final_momentum;

        double num_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            num[i * n + i] = 0.0;
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dx = y[i][0] - y[j][0];
                const double dy = y[i][1] - y[j][1];
                const double v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = v;
                num[j * n + i] = v;
                num_sum += 2.0 * v;
            }
        }

        double kl = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double gx = 0.0;
            double gy = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double q = std::max(num[i * n + j] / num_sum, kProbabilityFloor);
                const double p = P[i * n + j];
                kl += p * std::log(p / q);
                const double coeff = (exaggeration * p - q) * num[i * n + j];
                gx += coeff * (y[i][0] - y[j][0]);
                gy += coeff * (y[i][1] - y[j][1]);
            }
            grad[i] = {4.0 * gx, 4.0 * gy};
        }
        layout.kl_trace.push_back(kl);

        for (std::size_t i = 0; i < n; ++i) {
            for (int d = 0; d < 2; ++d) {
                const bool same_sign = (grad[i][d] > 0.0) == (velocity[i][d] > 0.0);
                gains[i][d] = same_sign ? gains[i][d] * 0.8 : gains[i][d] + 0.2;
                gains[i][d] = std::max(gains[i][d], 0.01);
                velocity[i][d] = momentum * velocity[i][d] - cfg.learning_rate * gains[i][d] * grad[i][d];
                y[i][d] += velocity[i][d];
            }
        }
        detail::center(y);
    }
    for (const auto& p : y) {
        if (!std::isfinite(p[0]) || !std::isfinite(p[1])) fail(ErrorCode::InvalidArgument, "t-SNE diverged");
    }
    layout.points = std::move(y);
    return layout;
}

inline TsneLayout tsne_embed(std::span<const Embedding> items, const TsneConfig& cfg) {
    std::vector<std::vector<double>> pts;
    pts.reserve(items.size());
    for (const auto& e : items) pts.emplace_back(e.values().begin(), e.values().end());
    return tsne_embed(pts, cfg);
}

// ---------------------------------------------------------------------------
// Layout files
// ---------------------------------------------------------------------------

enum class LayoutFormat { Csv, Json };

inline LayoutFormat layout_format_for(const std::filesystem::path& path) {
    return path.extension() == ".json" ? LayoutFormat::Json : LayoutFormat::Csv;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::vector<std::string> parse_csv_record(std::string_view line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back().push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back().push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back().push_back(c);
        }
    }
    return fields;
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        fail(ErrorCode::InvalidArgument, "bad coordinate '" + s + "'");
    }
    return v;
}

} // namespace detail

inline std::string layout_to_json(const TsneLayout& layout) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < layout.size(); ++i) {
        arr.push_back({{"x", layout.points[i][0]},
                       {"y", layout.points[i][1]},
                       {"label", i < layout.labels.size() ? layout.labels[i] : ""},
                       {"item_id", i < layout.item_ids.size() ? layout.item_ids[i] : std::to_string(i)}});
    }
    return arr.dump();
}

inline std::string layout_to_csv(const TsneLayout& layout) {
    std::string out = "x,y,label,item_id\n";
    for (std::size_t i = 0; i < layout.size(); ++i) {
        out += detail::format_double(layout.points[i][0]) + "," + detail::format_double(layout.points[i][1]) + "," +
               detail::csv_field(i < layout.labels.size() ? layout.labels[i] : "") + "," +
               detail::csv_field(i < layout.item_ids.size() ? layout.item_ids[i] : std::to_string(i)) + "\n";
    }
    return out;
}

/// Writes CSV (header `x,y,label,item_id`) or a JSON array of the same fields.
/// Coordinates use shortest round-trip formatting, so output is byte-stable.
inline void export_layout(const TsneLayout& layout, const std::filesystem::path& path, LayoutFormat format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoFailure, "cannot write layout to " + path.string());
    out << (format == LayoutFormat::Json ? layout_to_json(layout) + "\n" : layout_to_csv(layout));
    if (!out) fail(ErrorCode::IoFailure, "short write to " + path.string());
}

inline TsneLayout parse_layout_json(const nlohmann::json& doc) {
    if (!doc.is_array()) fail(ErrorCode::InvalidArgument, "layout must be a JSON array");
    TsneLayout layout;
    for (const auto& p : doc) {
        if (!p.is_object() || !p.contains("x") || !p.contains("y") || !p["x"].is_number() || !p["y"].is_number()) {
            fail(ErrorCode::InvalidArgument, "layout entries need numeric x and y");
        }
        layout.points.push_back({p["x"].get<double>(), p["y"].get<double>()});
        layout.labels.push_back(p.value("label", std::string{}));
        layout.item_ids.push_back(p.value("item_id", std::string{}));
    }
    return layout;
}

inline TsneLayout read_layout(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoFailure, "cannot read layout " + path.string());
    if (layout_format_for(path) == LayoutFormat::Json) {
        const auto doc = nlohmann::json::parse(in, nullptr, false);
        if (doc.is_discarded()) fail(ErrorCode::InvalidArgument, "layout file is not valid JSON");
        return parse_layout_json(doc);
    }
    TsneLayout layout;
    std::string line;
    if (!std::getline(in, line) || line != "x,y,label,item_id") {
        fail(ErrorCode::InvalidArgument, "layout CSV header must be x,y,label,item_id");
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = detail::parse_csv_record(line);
        if (f.size() != 4) fail(ErrorCode::InvalidArgument, "layout CSV rows need four fields");
        layout.points.push_back({detail::parse_double(f[0]), detail::parse_double(f[1])});
        layout.labels.push_back(f[2]);
        layout.item_ids.push_back(f[3]);
    }
    return layout;
}

} // namespace semtext
