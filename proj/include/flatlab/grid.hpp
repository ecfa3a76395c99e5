#pragma once

// Dyadic geometry: half-open cells, canonical cell sets, covering numbers,
// sumsets of cells, projections onto lines and the two-direction
// transversality bound.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <unordered_set>
#include <vector>

#include "flatlab/core.hpp"

namespace flatlab {

struct Cell {
    Scale scale;
    Index index{0, 0};

    // Lower-left corner; the cell is [corner, corner + delta) per axis.
    Point corner() const {
        const double d = scale.delta();
        return {index[0] * d, scale.dim() == 2 ? index[1] * d : 0.0};
    }
};

struct IndexHash {
    std::size_t operator()(const Index& i) const noexcept {
        std::uint64_t h = static_cast<std::uint64_t>(i[0]) * 0x9E3779B97F4A7C15ull;
        h ^= static_cast<std::uint64_t>(i[1]) + 0x7F4A7C159E3779B9ull + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

/// A finite set of dyadic cells at one scale, kept sorted and unique.
class CellSet {
public:
    CellSet() = default;
    explicit CellSet(Scale s) : scale_(s) {}
    CellSet(Scale s, std::vector<Index> cells) : scale_(s), cells_(std::move(cells)) {
        if (s.dim() == 1)
            for (auto& c : cells_) c[1] = 0;
        std::sort(cells_.begin(), cells_.end());
        cells_.erase(std::unique(cells_.begin(), cells_.end()), cells_.end());
    }

    const Scale& scale() const noexcept { return scale_; }
    int dim() const noexcept { return scale_.dim(); }
    std::span<const Index> cells() const noexcept { return cells_; }
    std::size_t size() const noexcept { return cells_.size(); }
    bool empty() const noexcept { return cells_.empty(); }

    bool contains(const Index& i) const { return std::binary_search(cells_.begin(), cells_.end(), i); }

    auto begin() const { return cells_.begin(); }
    auto end() const { return cells_.end(); }

    /// Every cell of [0,1)^d at scale s.
    static CellSet unit_cube(Scale s) {
        const std::int64_t n = std::int64_t{1} << s.log2_inverse();
        std::vector<Index> v;
        v.reserve(static_cast<std::size_t>(s.dim() == 2 ? n * n : n));
        for (std::int64_t i = 0; i < n; ++i) {
            if (s.dim() == 1) {
                v.push_back({i, 0});
            } else {
                for (std::int64_t j = 0; j < n; ++j) v.push_back({i, j});
            }
        }
        return CellSet(s, std::move(v));
    }

    friend bool operator==(const CellSet& a, const CellSet& b) {
        return a.scale_ == b.scale_ && a.cells_ == b.cells_;
    }

private:
    Scale scale_;
    std::vector<Index> cells_;
};

/// A line direction, canonicalized to an angle in [0, pi).
class Direction {
public:
    Direction() = default;
    explicit Direction(double angle) {
        double a = std::fmod(angle, std::numbers::pi);
        if (a < 0) a += std::numbers::pi;
        if (a >= std::numbers::pi) a = 0.0;
        angle_ = a;
        u_ = {std::cos(a), std::sin(a)};
    }
    static Direction from_vector(double x, double y) {
        if (x == 0.0 && y == 0.0) throw validation_error("direction from zero vector");
        return Direction(std::atan2(y, x));
    }

    double angle() const noexcept { return angle_; }
    const Point& unit() const noexcept { return u_; }

private:
    double angle_ = 0.0;
    Point u_{1.0, 0.0};
};

/// Operator norm of the difference of the two line projections, with the
/// orientation sign ambiguity removed.
inline double projection_distance(const Direction& a, const Direction& b) {
    const auto& u = a.unit();
    const auto& v = b.unit();
    double minus = std::hypot(u[0] - v[0], u[1] - v[1]);
    double plus = std::hypot(u[0] + v[0], u[1] + v[1]);
    return std::min(minus, plus);
}

// ---------------------------------------------------------------------------

/// Number of target-scale dyadic cells meeting the union of the cells.
inline std::size_t covering_number(const CellSet& cells, const Scale& target) {
    if (target.dim() != cells.dim()) throw validation_error("covering_number: dimension mismatch");
    if (!target.no_finer_than(cells.scale()))
        throw validation_error("covering_number: target scale finer than the native scale of the set");
    const int shift = cells.scale().log2_inverse() - target.log2_inverse();
    if (shift == 0) return cells.size();
    std::vector<Index> coarse;
    coarse.reserve(cells.size());
    for (const auto& c : cells) coarse.push_back(coarsen_index(c, shift));
    std::sort(coarse.begin(), coarse.end());
    return static_cast<std::size_t>(std::unique(coarse.begin(), coarse.end()) - coarse.begin());
}

/// Cells of the given scale containing the points.
inline CellSet cells_of_points(std::span<const Point> pts, const Scale& s) {
    const double inv = std::ldexp(1.0, s.log2_inverse());
    std::vector<Index> v;
    v.reserve(pts.size());
    for (const auto& p : pts) {
        Index i{static_cast<std::int64_t>(std::floor(p[0] * inv)),
                s.dim() == 2 ? static_cast<std::int64_t>(std::floor(p[1] * inv)) : 0};
        v.push_back(i);
    }
    return CellSet(s, std::move(v));
}

inline std::size_t covering_number(std::span<const Point> pts, const Scale& target) {
    return cells_of_points(pts, target).size();
}

inline CellSet coarsen(const CellSet& cells, const Scale& target) {
    if (!target.no_finer_than(cells.scale()) || target.dim() != cells.dim())
        throw validation_error("coarsen: target must be a coarser scale of the same dimension");
    const int shift = cells.scale().log2_inverse() - target.log2_inverse();
    std::vector<Index> v;
    v.reserve(cells.size());
    for (const auto& c : cells) v.push_back(coarsen_index(c, shift));
    return CellSet(target, std::move(v));
}

// The Minkowski sum of two half-open delta-cells spans two cells per axis.
inline void add_cell_sum(const Index& a, const Index& b, int dim, std::vector<Index>& out) {
    const Index s = a + b;
    out.push_back(s);
    out.push_back({s[0] + 1, s[1]});
    if (dim == 2) {
        out.push_back({s[0], s[1] + 1});
        out.push_back({s[0] + 1, s[1] + 1});
    }
}

/// Cells meeting {a + b : a in union A, b in union B}.
inline CellSet cell_sumset(const CellSet& a, const CellSet& b) {
    if (!(a.scale() == b.scale())) throw validation_error("cell_sumset: scale mismatch");
    const int dim = a.dim();
    std::unordered_set<Index, IndexHash> acc;
    acc.reserve(a.size() * b.size() * (dim == 2 ? 2 : 1));
    std::vector<Index> tmp;
    for (const auto& x : a) {
        for (const auto& y : b) {
            tmp.clear();
            add_cell_sum(x, y, dim, tmp);
            acc.insert(tmp.begin(), tmp.end());
        }
    }
    return CellSet(a.scale(), std::vector<Index>(acc.begin(), acc.end()));
}

/// Number of delta-intervals of the line R*e met by the projection x -> x.e of
/// the union of the cells (delta = the cells' scale).
inline std::size_t projected_covering_number(const CellSet& y, const Direction& e) {
    if (y.dim() != 2) throw validation_error("projected_covering_number: cell set must be two-dimensional");
    if (y.empty()) return 0;
    const double c = e.unit()[0];
    const double s = e.unit()[1];
    // Work in units of delta: the projected cell is the open interval between
    // the extreme corner projections.
    std::vector<std::pair<std::int64_t, std::int64_t>> ranges;
    ranges.reserve(y.size());
    for (const auto& i : y) {
        const double x0 = static_cast<double>(i[0]);
        const double y0 = static_cast<double>(i[1]);
        double p[4] = {x0 * c + y0 * s, (x0 + 1) * c + y0 * s, x0 * c + (y0 + 1) * s,
                       (x0 + 1) * c + (y0 + 1) * s};
        double lo = *std::min_element(p, p + 4);
        double hi = *std::max_element(p, p + 4);
        // Corner projections landing within rounding of a lattice line count as on it.
        constexpr double slop = 1e-9;
        auto k0 = static_cast<std::int64_t>(std::floor(lo + slop));
        auto k1 = static_cast<std::int64_t>(std::ceil(hi - slop)) - 1;
        if (k1 < k0) k1 = k0;
        ranges.emplace_back(k0, k1);
    }
    std::sort(ranges.begin(), ranges.end());
    std::size_t count = 0;
    std::int64_t cur_lo = ranges[0].first, cur_hi = ranges[0].second;
    for (std::size_t r = 1; r < ranges.size(); ++r) {
        if (ranges[r].first <= cur_hi + 1) {
            cur_hi = std::max(cur_hi, ranges[r].second);
        } else {
            count += static_cast<std::size_t>(cur_hi - cur_lo + 1);
            cur_lo = ranges[r].first;
            cur_hi = ranges[r].second;
        }
    }
    count += static_cast<std::size_t>(cur_hi - cur_lo + 1);
    return count;
}

/// Default constant in |Y| <= C_T * alpha^{-1} * n1 * n2.
inline constexpr double default_transversality_constant = 8.0;

struct TransversalityReport {
    double alpha = 0.0;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    std::size_t cells = 0;
    double constant = default_transversality_constant;
    // |Y| * alpha / (n1 * n2); bound_ok iff ratio <= constant.
    double ratio = 0.0;
    bool bound_ok = false;
};

inline TransversalityReport transversality_check(const CellSet& y, const Direction& e1, const Direction& e2,
                                                 double constant = default_transversality_constant) {
    TransversalityReport r;
    r.alpha = projection_distance(e1, e2);
    if (r.alpha <= 1e-12) throw validation_error("transversality_check: parallel projections (alpha = 0)");
    r.constant = constant;
    r.cells = y.size();
    r.n1 = projected_covering_number(y, e1);
    r.n2 = projected_covering_number(y, e2);
    if (r.cells == 0) {
        r.bound_ok = true;
        return r;
    }
    r.ratio = static_cast<double>(r.cells) * r.alpha / (static_cast<double>(r.n1) * static_cast<double>(r.n2));
    r.bound_ok = r.ratio <= constant;
    return r;
}

/// Interleaves the bits of a nonnegative 2D index (Morton / Z-order).
inline std::uint64_t morton_code(const Index& i) {
    auto spread = [](std::uint64_t v) {
        v &= 0xFFFFFFFFull;
        v = (v | (v << 16)) & 0x0000FFFF0000FFFFull;
        v = (v | (v << 8)) & 0x00FF00FF00FF00FFull;
        v = (v | (v << 4)) & 0x0F0F0F0F0F0F0F0Full;
        v = (v | (v << 2)) & 0x3333333333333333ull;
        v = (v | (v << 1)) & 0x5555555555555555ull;
        return v;
    };
    return spread(static_cast<std::uint64_t>(i[0])) | (spread(static_cast<std::uint64_t>(i[1])) << 1);
}

}  // namespace flatlab
