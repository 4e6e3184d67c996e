// Mixed-sample batch construction: blended inputs (linear or box-cut) and
// the matching soft targets. Virtual-out batches blend an ID sample with an
// outlier and pull the target toward uniform; virtual-in batches blend two
// ID samples and their one-hot targets.
//
// One lambda is drawn per batch. For cut mixing a single box is drawn per
// batch as well, so the area-corrected lambda is shared by every sample.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hood/core.hpp"
#include "hood/rng.hpp"

namespace hood {

enum class MixOp { Linear, Cut };

inline const char* mix_op_name(MixOp op) { return op == MixOp::Linear ? "linear" : "cut"; }

inline MixOp mix_op_from_name(const std::string& s) {
    if (s == "linear") return MixOp::Linear;
    if (s == "cut") return MixOp::Cut;
    throw ConfigError("unknown mix op '" + s + "' (expected linear or cut)");
}

struct MixConfig {
    MixOp op = MixOp::Linear;
    double alpha = 1.0; // Beta(alpha, alpha) parameter; alpha=1 is uniform
    std::uint64_t rng_seed = 0;
};

inline void validate_mix(const MixConfig& cfg) {
    if (!(cfg.alpha > 0.0)) throw ConfigError("mix alpha must be positive");
}

// One blend coefficient per batch, drawn from Beta(alpha, alpha).
inline double sample_lambda(const MixConfig& cfg, Rng& rng) {
    validate_mix(cfg);
    return rng.beta(cfg.alpha, cfg.alpha);
}

inline std::vector<double> mix_linear(std::span<const double> xa, std::span<const double> xb,
                                      double lambda) {
    if (xa.size() != xb.size()) throw DataError("mix_linear: shape mismatch");
    std::vector<double> out(xa.size());
    for (std::size_t i = 0; i < xa.size(); ++i) out[i] = lambda * xa[i] + (1.0 - lambda) * xb[i];
    return out;
}

// H x W x C grid, row-major by (y, x, channel).
struct Grid {
    std::size_t h = 0, w = 0, c = 1;
    std::vector<double> v;

    Grid() = default;
    Grid(std::size_t h_, std::size_t w_, std::size_t c_, double fill = 0.0)
        : h(h_), w(w_), c(c_), v(h_ * w_ * c_, fill) {}

    double& at(std::size_t y, std::size_t x, std::size_t ch) { return v[(y * w + x) * c + ch]; }
    double at(std::size_t y, std::size_t x, std::size_t ch) const { return v[(y * w + x) * c + ch]; }
    std::size_t pixels() const { return h * w; }
};

// Cut rectangle in pixel coordinates, [y0, y1) x [x0, x1).
struct CutBox {
    std::size_t y0 = 0, y1 = 0, x0 = 0, x1 = 0;

    std::size_t area() const { return (y1 - y0) * (x1 - x0); }
};

// Box with relative area ~(1-lambda): side lengths proportional to
// sqrt(1-lambda), center uniform over the grid, clipped to the bounds.
// The realized kept-area fraction is the corrected lambda.
inline CutBox sample_cut_box(std::size_t h, std::size_t w, double lambda, Rng& rng) {
    if (h == 0 || w == 0) throw DataError("cut box requires a non-empty grid");
    const double ratio = std::sqrt(std::max(0.0, 1.0 - lambda));
    const std::size_t cut_h = static_cast<std::size_t>(std::lround(static_cast<double>(h) * ratio));
    const std::size_t cut_w = static_cast<std::size_t>(std::lround(static_cast<double>(w) * ratio));
    const std::size_t cy = static_cast<std::size_t>(rng.uniform_int(h));
    const std::size_t cx = static_cast<std::size_t>(rng.uniform_int(w));

    CutBox box;
    box.y0 = cy > cut_h / 2 ? cy - cut_h / 2 : 0;
    box.y1 = std::min(h, cy + (cut_h + 1) / 2);
    box.x0 = cx > cut_w / 2 ? cx - cut_w / 2 : 0;
    box.x1 = std::min(w, cx + (cut_w + 1) / 2);
    if (box.y1 < box.y0) box.y1 = box.y0;
    if (box.x1 < box.x0) box.x1 = box.x0;
    return box;
}

inline double corrected_lambda(const CutBox& box, std::size_t h, std::size_t w) {
    return 1.0 - static_cast<double>(box.area()) / static_cast<double>(h * w);
}

inline Grid apply_cut_box(const Grid& xa, const Grid& xb, const CutBox& box) {
    if (xa.h != xb.h || xa.w != xb.w || xa.c != xb.c) throw DataError("mix_cut: shape mismatch");
    Grid out = xa;
    for (std::size_t y = box.y0; y < box.y1; ++y)
        for (std::size_t x = box.x0; x < box.x1; ++x)
            for (std::size_t ch = 0; ch < xa.c; ++ch) out.at(y, x, ch) = xb.at(y, x, ch);
    return out;
}

// Single-pair cut mix. Returns the blended grid and the area-corrected
// lambda (kept pixels of xa as a fraction of the grid).
inline std::pair<Grid, double> mix_cut(const Grid& xa, const Grid& xb, double lambda, Rng& rng) {
    if (xa.h != xb.h || xa.w != xb.w || xa.c != xb.c) throw DataError("mix_cut: shape mismatch");
    if (xa.pixels() == 0) throw DataError("mix_cut: empty grid");
    const CutBox box = sample_cut_box(xa.h, xa.w, lambda, rng);
    return {apply_cut_box(xa, xb, box), corrected_lambda(box, xa.h, xa.w)};
}

// lambda * onehot(y) + (1 - lambda) * uniform.
inline std::vector<double> virtual_out_targets(int y_in, double lambda, std::size_t k) {
    if (k < 2) throw DataError("virtual_out_targets: need at least 2 classes");
    if (y_in < 0 || static_cast<std::size_t>(y_in) >= k)
        throw DataError("virtual_out_targets: class index out of range");
    std::vector<double> t(k, (1.0 - lambda) / static_cast<double>(k));
    t[static_cast<std::size_t>(y_in)] += lambda;
    return t;
}

inline std::vector<double> virtual_out_targets(std::span<const double> y_in, double lambda,
                                               std::size_t k) {
    if (y_in.size() != k) throw DataError("virtual_out_targets: soft label length mismatch");
    std::vector<double> t(k);
    const double u = 1.0 / static_cast<double>(k);
    for (std::size_t i = 0; i < k; ++i) t[i] = lambda * y_in[i] + (1.0 - lambda) * u;
    return t;
}

// lambda * onehot(ya) + (1 - lambda) * onehot(yb).
inline std::vector<double> virtual_in_targets(int ya, int yb, double lambda, std::size_t k) {
    if (ya < 0 || static_cast<std::size_t>(ya) >= k || yb < 0 || static_cast<std::size_t>(yb) >= k)
        throw DataError("virtual_in_targets: class index out of range");
    std::vector<double> t(k, 0.0);
    t[static_cast<std::size_t>(ya)] += lambda;
    t[static_cast<std::size_t>(yb)] += 1.0 - lambda;
    return t;
}

inline std::vector<double> virtual_in_targets(std::span<const double> ya,
                                              std::span<const double> yb, double lambda,
                                              std::size_t k) {
    if (ya.size() != k || yb.size() != k)
        throw DataError("virtual_in_targets: soft label length mismatch");
    std::vector<double> t(k);
    for (std::size_t i = 0; i < k; ++i) t[i] = lambda * ya[i] + (1.0 - lambda) * yb[i];
    return t;
}

enum class MixedKind { VirtualOut, VirtualIn };

struct MixedBatch {
    Matrix xs;
    Matrix ys;          // soft targets, rows sum to 1
    double lambda_used = 1.0;
    MixedKind kind = MixedKind::VirtualOut;
};

namespace detail {

// Vector features are treated as a 1 x d x 1 grid for cut mixing, so a cut
// replaces a contiguous span of coordinates.
inline void cut_rows(Matrix& dst, const Matrix& other, const CutBox& box) {
    for (std::size_t r = 0; r < dst.rows(); ++r)
        for (std::size_t j = box.x0; j < box.x1; ++j) dst(r, j) = other(r, j);
}

} // namespace detail

// Blends every ID row with an outlier drawn uniformly with replacement.
// Targets move toward uniform with weight (1 - lambda).
inline MixedBatch make_virtual_out_batch(const Matrix& in_xs, const std::vector<int>& in_ys,
                                         const Matrix& outlier_xs, std::size_t k, double lambda,
                                         MixOp op, Rng& rng) {
    if (in_xs.rows() != in_ys.size()) throw DataError("virtual-out batch: xs/ys row mismatch");
    if (outlier_xs.rows() == 0) throw DataError("virtual-out batch: empty outlier pool");
    if (outlier_xs.cols() != in_xs.cols()) throw DataError("virtual-out batch: feature dim mismatch");

    MixedBatch batch;
    batch.kind = MixedKind::VirtualOut;
    batch.xs = Matrix(in_xs.rows(), in_xs.cols());
    batch.ys = Matrix(in_xs.rows(), k);

    Matrix partner(in_xs.rows(), in_xs.cols());
    for (std::size_t r = 0; r < in_xs.rows(); ++r) {
        const std::size_t pick = static_cast<std::size_t>(rng.uniform_int(outlier_xs.rows()));
        std::copy_n(outlier_xs.row(pick).begin(), in_xs.cols(), partner.row(r).begin());
    }

    double effective = lambda;
    if (op == MixOp::Linear) {
        for (std::size_t r = 0; r < in_xs.rows(); ++r) {
            const auto mixed = mix_linear(in_xs.row(r), partner.row(r), lambda);
            std::copy(mixed.begin(), mixed.end(), batch.xs.row(r).begin());
        }
    } else {
        const CutBox box = sample_cut_box(1, in_xs.cols(), lambda, rng);
        effective = corrected_lambda(box, 1, in_xs.cols());
        batch.xs = in_xs;
        detail::cut_rows(batch.xs, partner, box);
    }
    batch.lambda_used = effective;
    for (std::size_t r = 0; r < in_xs.rows(); ++r) {
        const auto t = virtual_out_targets(in_ys[r], effective, k);
        std::copy(t.begin(), t.end(), batch.ys.row(r).begin());
    }
    return batch;
}

// Blends every ID row with a permuted partner row from the same batch.
inline MixedBatch make_virtual_in_batch(const Matrix& in_xs, const std::vector<int>& in_ys,
                                        std::size_t k, double lambda, MixOp op, Rng& rng) {
    if (in_xs.rows() != in_ys.size()) throw DataError("virtual-in batch: xs/ys row mismatch");
    if (in_xs.rows() == 0) throw DataError("virtual-in batch: empty batch");

    MixedBatch batch;
    batch.kind = MixedKind::VirtualIn;
    batch.xs = Matrix(in_xs.rows(), in_xs.cols());
    batch.ys = Matrix(in_xs.rows(), k);

    const auto perm = rng.permutation(in_xs.rows());

    double effective = lambda;
    if (op == MixOp::Linear) {
        for (std::size_t r = 0; r < in_xs.rows(); ++r) {
            const auto mixed = mix_linear(in_xs.row(r), in_xs.row(perm[r]), lambda);
            std::copy(mixed.begin(), mixed.end(), batch.xs.row(r).begin());
        }
    } else {
        const CutBox box = sample_cut_box(1, in_xs.cols(), lambda, rng);
        effective = corrected_lambda(box, 1, in_xs.cols());
        batch.xs = in_xs;
        Matrix partner(in_xs.rows(), in_xs.cols());
        for (std::size_t r = 0; r < in_xs.rows(); ++r)
            std::copy_n(in_xs.row(perm[r]).begin(), in_xs.cols(), partner.row(r).begin());
        detail::cut_rows(batch.xs, partner, box);
    }
    batch.lambda_used = effective;
    for (std::size_t r = 0; r < in_xs.rows(); ++r) {
        const auto t = virtual_in_targets(in_ys[r], in_ys[perm[r]], effective, k);
        std::copy(t.begin(), t.end(), batch.ys.row(r).begin());
    }
    return batch;
}

} // namespace hood
