#pragma once

// Uniform perfectness scans of delta-measures, Frostman exponents and the
// Frostman bound that follows from a scanned (D, beta).
//
// For a fixed center the ball-mass ratio is piecewise constant in r with
// jumps only at atom distances d_i (numerator) and d_i / D (denominator).
// Both are put on the radius list, and closed balls are evaluated at left
// ends, open balls at right ends, so the reported value is the supremum over
// every real r >= r_min, not only over the geometric grid.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "flatlab/core.hpp"
#include "flatlab/measure.hpp"

namespace flatlab {

enum class centers_mode { support, all_grid };

struct PerfectnessQuery {
    double D = 2.0;
    Window window = Window::everything(1);
    std::optional<double> r_min;  // defaults to delta
    centers_mode centers = centers_mode::support;
    double grid_ratio = 9.0 / 8.0;
    std::size_t center_budget = std::size_t{1} << 20;

    void validate(const Scale& s) const {
        if (!(D > 1.0)) throw validation_error("perfectness: D must be > 1");
        if (window.dim != s.dim()) throw validation_error("perfectness: window dimension mismatch");
        window.validate();
        if (r_min && !(*r_min >= s.delta())) throw validation_error("perfectness: r_min must be >= delta");
        if (!(grid_ratio > 1.0)) throw validation_error("perfectness: radius grid ratio must be > 1");
    }
};

struct BallWitness {
    Point center{0.0, 0.0};
    std::size_t center_rank = 0;  // position in the center enumeration
    double radius = 0.0;
    bool open = false;
};

struct PerfectnessReport {
    double D = 0.0;
    double best_beta = 0.0;  // 0 when no ball was admissible
    std::optional<BallWitness> witness;
    std::size_t tested_ball_count = 0;
    std::size_t admissible_ball_count = 0;
    double diam_support = 0.0;
    double r_min = 0.0;
    double grid_ratio = 9.0 / 8.0;
};

namespace detail {

// Atoms seen from one center: squared distances in index units, ascending,
// with prefix masses.
template <class W>
struct RadialProfile {
    std::vector<std::int64_t> d2;
    std::vector<W> prefix;  // prefix[k] = mass of the k nearest atoms

    W closed(double r2) const {  // |z - x|^2 <= r2
        auto k = std::upper_bound(d2.begin(), d2.end(), r2,
                                  [](double v, std::int64_t e) { return v < static_cast<double>(e); }) -
                 d2.begin();
        return prefix[static_cast<std::size_t>(k)];
    }
    W open(double r2) const {  // |z - x|^2 < r2
        auto k = std::lower_bound(d2.begin(), d2.end(), r2,
                                  [](std::int64_t e, double v) { return static_cast<double>(e) < v; }) -
                 d2.begin();
        return prefix[static_cast<std::size_t>(k)];
    }
    std::int64_t max_d2() const { return d2.back(); }
};

template <class W>
RadialProfile<W> radial_profile(const BasicDeltaMeasure<W>& sigma, const Index& x) {
    std::vector<std::pair<std::int64_t, W>> v;
    v.reserve(sigma.size());
    for (const auto& a : sigma.atoms()) {
        auto d = a.index - x;
        v.emplace_back(d[0] * d[0] + d[1] * d[1], a.weight);
    }
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    RadialProfile<W> p;
    p.d2.reserve(v.size());
    p.prefix.reserve(v.size() + 1);
    p.prefix.push_back(W(0));
    for (auto& [d, w] : v) {
        p.d2.push_back(d);
        p.prefix.push_back(p.prefix.back() + w);
    }
    return p;
}

// A candidate radius in squared index units, r2 for the small ball and R2
// for the D-enlarged one. Breakpoint radii carry the exact integer side.
struct RadiusPair {
    double r2;
    double R2;
};

inline std::vector<RadiusPair> radius_candidates(const std::vector<std::int64_t>& d2, double D, double rmin_units,
                                                 double rmax_units, double ratio) {
    const double D2 = D * D;
    std::vector<RadiusPair> out;
    for (double r = rmin_units; r <= rmax_units * (1 + 1e-15); r *= ratio) out.push_back({r * r, D2 * r * r});
    const double lo2 = rmin_units * rmin_units, hi2 = rmax_units * rmax_units;
    std::int64_t prev = -1;
    for (std::int64_t e : d2) {
        if (e == prev || e == 0) continue;
        prev = e;
        const double de = static_cast<double>(e);
        if (de >= lo2 && de <= hi2) out.push_back({de, D2 * de});
        const double small = de / D2;
        if (small >= lo2 && small <= hi2) out.push_back({small, de});
    }
    std::sort(out.begin(), out.end(), [](const RadiusPair& a, const RadiusPair& b) { return a.r2 < b.r2; });
    out.erase(std::unique(out.begin(), out.end(),
                          [](const RadiusPair& a, const RadiusPair& b) { return a.r2 == b.r2 && a.R2 == b.R2; }),
              out.end());
    return out;
}

template <class W>
std::vector<Index> scan_centers(const BasicDeltaMeasure<W>& sigma, centers_mode mode, std::size_t budget) {
    std::vector<Index> c;
    if (mode == centers_mode::support) {
        for (const auto& a : sigma.atoms()) c.push_back(a.index);
        return c;
    }
    auto [lo, hi] = sigma.index_bounds();
    const double n = static_cast<double>(hi[0] - lo[0] + 1) * static_cast<double>(hi[1] - lo[1] + 1);
    if (n > static_cast<double>(budget)) throw budget_error("perfectness: all-grid center count exceeds budget");
    for (std::int64_t i = lo[0]; i <= hi[0]; ++i)
        for (std::int64_t j = lo[1]; j <= hi[1]; ++j) c.push_back({i, j});
    return c;
}

}  // namespace detail

template <class W>
PerfectnessReport scan_perfectness(const BasicDeltaMeasure<W>& sigma, const PerfectnessQuery& q) {
    q.validate(sigma.scale());
    const double delta = sigma.scale().delta();
    PerfectnessReport rep;
    rep.D = q.D;
    rep.grid_ratio = q.grid_ratio;
    rep.r_min = q.r_min.value_or(delta);
    rep.diam_support = sigma.diameter();
    if (rep.diam_support <= 0.0)
        throw degenerate_support_error("uniform perfectness undefined: support has diameter zero");
    bool meets = false;
    for (const auto& a : sigma.atoms())
        if (q.window.contains(sigma.position(a.index))) {
            meets = true;
            break;
        }
    if (!meets) throw validation_error("perfectness: window does not meet the support");

    const auto centers = detail::scan_centers(sigma, q.centers, q.center_budget);
    const double rmin_u = rep.r_min / delta;
    const double rmax_u = rep.diam_support * q.D / delta;

    struct Local {
        double best = -1.0;
        double r2 = 0.0;
        bool open = false;
        std::size_t tested = 0, admissible = 0;
    };
    std::vector<Local> local(centers.size());
    parallel_tiles(centers.size(), 16, [&](std::size_t b, std::size_t e) {
        for (std::size_t c = b; c < e; ++c) {
            const Index& x = centers[c];
            const Point xp = sigma.position(x);
            auto prof = detail::radial_profile(sigma, x);
            auto radii = detail::radius_candidates(prof.d2, q.D, rmin_u, rmax_u, q.grid_ratio);
            const double maxd2 = static_cast<double>(prof.max_d2());
            Local& L = local[c];
            for (const auto& rp : radii) {
                ++L.tested;
                const double Dr = std::sqrt(rp.R2) * delta;
                if (!q.window.contains_ball(xp, Dr)) continue;
                // Closed: spt not inside closed B(x, Dr).
                if (maxd2 > rp.R2) {
                    ++L.admissible;
                    const double ratio = to_double(prof.closed(rp.r2)) / to_double(prof.closed(rp.R2));
                    if (ratio > L.best) L = {ratio, rp.r2, false, L.tested, L.admissible};
                }
                // Open: spt not inside open B(x, Dr).
                if (maxd2 >= rp.R2) {
                    W den = prof.open(rp.R2);
                    if (den > W(0)) {
                        const double ratio = to_double(prof.open(rp.r2)) / to_double(den);
                        if (ratio > L.best) L = {ratio, rp.r2, true, L.tested, L.admissible};
                    }
                }
            }
        }
    });
    for (std::size_t c = 0; c < centers.size(); ++c) {
        rep.tested_ball_count += local[c].tested;
        rep.admissible_ball_count += local[c].admissible;
        if (local[c].best > rep.best_beta) {
            rep.best_beta = local[c].best;
            rep.witness = BallWitness{sigma.position(centers[c]), c, std::sqrt(local[c].r2) * delta, local[c].open};
        }
    }
    return rep;
}

/// Mass ratio of a single ball pair, closed or open.
template <class W>
double ball_ratio(const BasicDeltaMeasure<W>& sigma, const Point& x, double r, double D, bool open) {
    W num(0), den(0);
    for (const auto& a : sigma.atoms()) {
        const Point p = sigma.position(a.index);
        const double d = std::hypot(p[0] - x[0], p[1] - x[1]);
        if (open ? d < r : d <= r * (1 + 1e-12)) num += a.weight;
        if (open ? d < D * r : d <= D * r * (1 + 1e-12)) den += a.weight;
    }
    return to_double(num) / to_double(den);
}

inline double frostman_exponent(double D, double beta) {
    if (!(D > 1.0)) throw validation_error("frostman_exponent: D must be > 1");
    if (!(beta > 0.0 && beta < 1.0)) throw validation_error("frostman_exponent: beta must lie in (0, 1)");
    return -std::log(beta) / std::log(D);
}

/// (2D)^s diam^{-s}.
inline double frostman_constant(double D, double s, double diam) {
    if (!(diam > 0.0)) throw validation_error("frostman_constant: diameter must be positive");
    return std::pow(2.0 * D, s) * std::pow(diam, -s);
}

struct FrostmanReport {
    bool ok = true;
    double worst_ratio = 0.0;  // max sigma(B(x, r)) / r^s
    Point witness_center{0.0, 0.0};
    double witness_radius = 0.0;
    std::size_t tested_ball_count = 0;
};

/// sigma(closed B(x, r)) <= C r^s over support centers and the scan's radius
/// list (D fixes the breakpoints d_i / D and the upper end diam * D).
template <class W>
FrostmanReport frostman_check(const BasicDeltaMeasure<W>& sigma, double s, double C, double D = 2.0,
                              std::optional<double> r_min = std::nullopt, double grid_ratio = 9.0 / 8.0) {
    if (!(s > 0.0)) throw validation_error("frostman_check: s must be positive");
    const double delta = sigma.scale().delta();
    const double rmin_u = r_min.value_or(delta) / delta;
    const double diam = sigma.diameter();
    const double rmax_u = std::max(diam * D / delta, rmin_u);
    const std::size_t n = sigma.size();
    struct Local {
        double worst = 0.0;
        double r = 0.0;
        std::size_t tested = 0;
    };
    std::vector<Local> local(n);
    parallel_tiles(n, 16, [&](std::size_t b, std::size_t e) {
        for (std::size_t c = b; c < e; ++c) {
            auto prof = detail::radial_profile(sigma, sigma.atoms()[c].index);
            auto radii = detail::radius_candidates(prof.d2, D, rmin_u, rmax_u, grid_ratio);
            for (const auto& rp : radii) {
                ++local[c].tested;
                const double r = std::sqrt(rp.r2) * delta;
                const double v = to_double(prof.closed(rp.r2)) / std::pow(r, s);
                if (v > local[c].worst) local[c] = {v, r, local[c].tested};
            }
        }
    });
    FrostmanReport rep;
    for (std::size_t c = 0; c < n; ++c) {
        rep.tested_ball_count += local[c].tested;
        if (local[c].worst > rep.worst_ratio) {
            rep.worst_ratio = local[c].worst;
            rep.witness_center = sigma.position(c);
            rep.witness_radius = local[c].r;
        }
    }
    rep.ok = rep.worst_ratio <= C * (1 + 1e-12);
    return rep;
}

}  // namespace flatlab
