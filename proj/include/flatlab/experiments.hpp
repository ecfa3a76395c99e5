#pragma once

// Empirical probes: minimal capture sets and capture counting, sumset growth
// over good-pair sets, row structure inside a sqrt(delta)-square, and the
// L2 lower bound for convolutions with a constant-density measure.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <unordered_set>
#include <vector>

#include "flatlab/core.hpp"
#include "flatlab/curve.hpp"
#include "flatlab/grid.hpp"
#include "flatlab/measure.hpp"
#include "flatlab/perfectness.hpp"
#include "flatlab/spectral.hpp"
#include "flatlab/uniformize.hpp"

namespace flatlab {

/// Heaviest cells first (ties by index) until the target mass is reached.
template <class W>
CellSet minimal_capture_set(const BasicDeltaMeasure<W>& pi, const W& mass_target) {
    const W total = pi.total_mass();
    W tol(0);
    if constexpr (!weight_traits<W>::exact) tol = 1e-12 * total;
    if (!(mass_target > W(0))) throw validation_error("minimal_capture_set: target must be positive");
    if (mass_target > total + tol) throw validation_error("minimal_capture_set: target exceeds total mass");
    std::vector<std::size_t> order(pi.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const auto atoms = pi.atoms();
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return atoms[a].weight > atoms[b].weight; });
    std::vector<Index> cells;
    W acc(0);
    for (std::size_t i : order) {
        cells.push_back(atoms[i].index);
        acc += atoms[i].weight;
        if (acc + tol >= mass_target) break;
    }
    return CellSet(pi.scale(), std::move(cells));
}

struct CaptureRow {
    double delta = 0.0;
    std::size_t captured = 0;   // |E|_delta
    double threshold = 0.0;     // delta^{-alpha - eps}
    bool pass = false;
    double mu_energy = 0.0;     // I_alpha^delta(mu)
    bool mu_hypothesis = false;  // I_alpha^delta(mu) <= delta^{-eps}
    bool sigma_hypothesis = false;  // sigma scanned (D, beta < 1)-uniformly perfect
    double sigma_beta = 0.0;
};

struct CaptureTable {
    double alpha = 0.0;
    double epsilon = 0.0;
    double D = 0.0;
    std::vector<CaptureRow> rows;
    bool all_pass = true;
    double fitted_exponent = 0.0;  // slope of log |E| in log(1/delta)
};

using MeasurePairFactory = std::function<std::pair<DeltaMeasure, DeltaMeasure>(const Scale&)>;

inline CaptureTable capture_counting_experiment(const MeasurePairFactory& make, double alpha, double epsilon, double D,
                                                const std::vector<Scale>& deltas) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw validation_error("capture_counting: alpha must lie in (0, 2)");
    if (!(epsilon > 0.0)) throw validation_error("capture_counting: epsilon must be positive");
    if (deltas.empty()) throw validation_error("capture_counting: empty delta list");
    CaptureTable tab;
    tab.alpha = alpha;
    tab.epsilon = epsilon;
    tab.D = D;
    std::vector<double> x, y;
    for (const auto& s : deltas) {
        auto [mu, sigma] = make(s);
        if (!(mu.scale() == s) || !(sigma.scale() == s))
            throw validation_error("capture_counting: factory returned measures at the wrong scale");
        CaptureRow row;
        const double d = s.delta();
        row.delta = d;
        row.mu_energy = riesz_energy(mu, alpha, d, energy_method::kernel);
        row.mu_hypothesis = row.mu_energy <= std::pow(d, -epsilon);
        try {
            PerfectnessQuery q;
            q.D = D;
            q.window = Window::everything(sigma.dim());
            auto rep = scan_perfectness(sigma, q);
            row.sigma_beta = rep.best_beta;
            row.sigma_hypothesis = rep.best_beta < 1.0;
        } catch (const degenerate_support_error&) {
            row.sigma_hypothesis = false;
            row.sigma_beta = 1.0;
        }
        auto pi = convolve(mu, sigma);
        const double target = std::min(std::pow(d, epsilon), pi.total_mass());
        row.captured = minimal_capture_set(pi, target).size();
        row.threshold = std::pow(d, -alpha - epsilon);
        row.pass = static_cast<double>(row.captured) >= row.threshold;
        tab.all_pass = tab.all_pass && row.pass;
        x.push_back(std::log(1.0 / d));
        y.push_back(std::log(static_cast<double>(row.captured)));
        tab.rows.push_back(row);
    }
    if (x.size() >= 2) tab.fitted_exponent = fit_slope(x, y);
    return tab;
}

// ---------------------------------------------------------------------------

struct GoodPairSet {
    Scale scale;
    std::vector<std::pair<Index, Index>> pairs;  // (cell of X, cell of spt sigma)
    double mass = 0.0;                           // (nu x sigma)(union of pairs)
};

enum class pair_selection { all_pairs, top_mass };

struct GrowthReport {
    std::size_t x_size = 0;
    std::size_t pairs = 0;
    double pair_mass = 0.0;
    std::size_t sumset_size = 0;
    double growth_ratio = 0.0;
    double epsilon = 0.0;
    double threshold = 0.0;  // delta^{-eps} |X|
    bool exceeds_threshold = false;
    std::size_t max_fiber = 0;
    std::size_t local_size = 0;  // max over Q in D_{sqrt delta} of |X cap Q|
    double local_bound = 0.0;    // delta^{-alpha/2}
    bool local_hypothesis = false;
};

/// nu is the uniform measure on X. top_mass keeps the heaviest pairs until
/// the given fraction of (nu x sigma) mass is reached.
template <class W>
GrowthReport sumset_growth_experiment(const UniformSetRecord& X, const BasicDeltaMeasure<W>& sigma,
                                      pair_selection sel, double fraction, double alpha, double epsilon) {
    const auto verdict = verify_uniform(X.cells, X.T, X.m);
    if (!verdict.uniform) throw validation_error("sumset_growth: X is not uniform");
    if (!(X.cells.scale() == sigma.scale())) throw validation_error("sumset_growth: X and sigma scales differ");
    if (sel == pair_selection::top_mass && !(fraction > 0.0 && fraction <= 1.0))
        throw validation_error("sumset_growth: mass fraction must lie in (0, 1]");
    const Scale s = sigma.scale();
    const double d = s.delta();
    GrowthReport rep;
    rep.x_size = X.cells.size();
    rep.epsilon = epsilon;

    // sigma's mass by cell (the atoms already sit on cell corners).
    std::vector<std::pair<Index, double>> ycells;
    for (const auto& a : sigma.atoms()) ycells.emplace_back(a.index, to_double(a.weight));
    const double nu_w = 1.0 / static_cast<double>(rep.x_size);

    std::vector<std::pair<Index, Index>> pairs;
    double mass = 0.0;
    if (sel == pair_selection::all_pairs) {
        for (const auto& x : X.cells)
            for (const auto& [y, w] : ycells) {
                pairs.emplace_back(x, y);
                mass += nu_w * w;
            }
    } else {
        // nu is uniform, so pair mass ranks by sigma's cell mass; ties by index.
        std::vector<std::size_t> order(ycells.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return ycells[a].second > ycells[b].second; });
        const double goal = fraction * to_double(sigma.total_mass());
        for (std::size_t i : order) {
            if (mass >= goal * (1 - 1e-12)) break;
            for (const auto& x : X.cells) pairs.emplace_back(x, ycells[i].first);
            mass += ycells[i].second;
        }
    }
    rep.pairs = pairs.size();
    rep.pair_mass = mass;

    std::unordered_set<Index, IndexHash> sum;
    std::map<Index, std::unordered_set<Index, IndexHash>> fibers;
    std::vector<Index> tmp;
    for (const auto& [x, y] : pairs) {
        tmp.clear();
        add_cell_sum(x, y, s.dim(), tmp);
        sum.insert(tmp.begin(), tmp.end());
        fibers[x].insert(tmp.begin(), tmp.end());
    }
    rep.sumset_size = sum.size();
    for (const auto& [x, f] : fibers) rep.max_fiber = std::max(rep.max_fiber, f.size());
    rep.growth_ratio = static_cast<double>(rep.sumset_size) / static_cast<double>(rep.x_size);
    rep.threshold = std::pow(d, -epsilon) * static_cast<double>(rep.x_size);
    rep.exceeds_threshold = static_cast<double>(rep.sumset_size) >= rep.threshold;

    const int half = s.log2_inverse() / 2;
    std::map<Index, std::size_t> local;
    for (const auto& c : X.cells) ++local[coarsen_index(c, s.log2_inverse() - half)];
    for (const auto& [q, n] : local) rep.local_size = std::max(rep.local_size, n);
    rep.local_bound = std::pow(d, -alpha / 2);
    rep.local_hypothesis = static_cast<double>(rep.local_size) <= rep.local_bound;
    return rep;
}

// ---------------------------------------------------------------------------

struct RowStructure {
    double Delta = 0.0;
    double eta = 0.0;
    double full_threshold = 0.0;                  // Delta^{eta - 1}
    std::map<std::size_t, std::size_t> histogram;  // count -> number of rectangles
    std::size_t rectangles = 0;
    std::size_t full_rows = 0;
    std::size_t total = 0;  // equals |XQ|
};

namespace detail {

// Separating-axis test for the square [x0, x0+s]^2 against the rectangle
// {u in [u0, u1], v in [v0, v1]} in the (t, n) frame anchored at `corner`.
inline bool rect_meets_square(const Point& corner, const Point& t, const Point& n, double u0, double u1, double v0,
                              double v1, double s) {
    const Point sq[4] = {corner, {corner[0] + s, corner[1]}, {corner[0], corner[1] + s}, {corner[0] + s, corner[1] + s}};
    // Rectangle axes.
    auto proj_range = [&](const Point& axis) {
        double lo = 1e300, hi = -1e300;
        for (const auto& p : sq) {
            const double v = (p[0] - corner[0]) * axis[0] + (p[1] - corner[1]) * axis[1];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        return std::pair{lo, hi};
    };
    auto [tu0, tu1] = proj_range(t);
    if (tu1 <= u0 || tu0 >= u1) return false;
    auto [nv0, nv1] = proj_range(n);
    if (nv1 <= v0 || nv0 >= v1) return false;
    // Square axes.
    for (int ax = 0; ax < 2; ++ax) {
        double lo = 1e300, hi = -1e300;
        for (double u : {u0, u1})
            for (double v : {v0, v1}) {
                const double c = corner[ax] + u * t[ax] + v * n[ax];
                lo = std::min(lo, c);
                hi = std::max(hi, c);
            }
        if (hi <= corner[ax] || lo >= corner[ax] + s) return false;
    }
    return true;
}

}  // namespace detail

/// Cover the Delta-square holding XQ by disjoint delta x Delta rectangles in
/// the frame of theta, anchored at the square's lower-left corner; cells are
/// assigned by their centers.
inline RowStructure row_structure(const CellSet& XQ, const TangentFrame& theta, double eta) {
    if (XQ.dim() != 2 || XQ.empty()) throw validation_error("row_structure: need a nonempty planar cell set");
    const int m = XQ.scale().log2_inverse();
    if (m % 2) throw validation_error("row_structure: delta must be an even power of 2 so that Delta = sqrt(delta)");
    const int shift = m / 2;
    const Index q = coarsen_index(*XQ.begin(), shift);
    for (const auto& c : XQ)
        if (coarsen_index(c, shift) != q) throw validation_error("row_structure: XQ is not inside a single Delta-square");
    const double d = XQ.scale().delta();
    const double Delta = std::ldexp(1.0, -shift);
    const Point corner{q[0] * Delta, q[1] * Delta};
    const Point& t = theta.tangent;
    const Point& n = theta.normal;

    RowStructure rs;
    rs.Delta = Delta;
    rs.eta = eta;
    rs.full_threshold = std::pow(Delta, eta - 1.0);
    std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> counts;
    for (const auto& c : XQ) {
        const Point p{(c[0] + 0.5) * d - corner[0], (c[1] + 0.5) * d - corner[1]};
        const auto u = static_cast<std::int64_t>(std::floor((p[0] * t[0] + p[1] * t[1]) / Delta));
        const auto v = static_cast<std::int64_t>(std::floor((p[0] * n[0] + p[1] * n[1]) / d));
        ++counts[{u, v}];
    }
    // Every rectangle meeting the square, including empty ones.
    double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
    for (double x : {0.0, Delta})
        for (double y : {0.0, Delta}) {
            umin = std::min(umin, x * t[0] + y * t[1]);
            umax = std::max(umax, x * t[0] + y * t[1]);
            vmin = std::min(vmin, x * n[0] + y * n[1]);
            vmax = std::max(vmax, x * n[0] + y * n[1]);
        }
    const auto u0 = static_cast<std::int64_t>(std::floor(umin / Delta)), u1 = static_cast<std::int64_t>(std::ceil(umax / Delta));
    const auto v0 = static_cast<std::int64_t>(std::floor(vmin / d)), v1 = static_cast<std::int64_t>(std::ceil(vmax / d));
    for (std::int64_t u = u0; u < u1; ++u)
        for (std::int64_t v = v0; v < v1; ++v) {
            auto it = counts.find({u, v});
            const std::size_t k = it == counts.end() ? 0 : it->second;
            if (k == 0 && !detail::rect_meets_square(corner, t, n, u * Delta, (u + 1) * Delta, v * d, (v + 1) * d, Delta))
                continue;
            ++rs.histogram[k];
            ++rs.rectangles;
            rs.total += k;
            if (static_cast<double>(k) >= rs.full_threshold) ++rs.full_rows;
        }
    return rs;
}

/// eta = (2 - alpha) / 4.
inline double default_eta(double alpha) { return (2.0 - alpha) / 4.0; }

// ---------------------------------------------------------------------------

struct L2LowerBoundReport {
    double c = 0.0;    // (mu x sigma)(G)
    double C = 0.0;    // |{x + y : (x, y) in G}| / |spt mu|
    double lhs = 0.0;  // ||mu * sigma||
    double rhs = 0.0;  // (c / sqrt C) ||mu||
    bool ok = false;
};

/// G holds pairs of lattice indices (x in spt mu, y in spt sigma).
template <class W>
L2LowerBoundReport l2_lower_bound_check(const BasicDeltaMeasure<W>& mu, const BasicDeltaMeasure<W>& sigma,
                                        const std::vector<std::pair<Index, Index>>& G) {
    if (mu.dim() != 1 || sigma.dim() != 1) throw validation_error("l2_lower_bound_check: measures must be 1D");
    if (!(mu.scale() == sigma.scale())) throw validation_error("l2_lower_bound_check: scale mismatch");
    if (G.empty()) throw validation_error("l2_lower_bound_check: empty good-pair set (c = 0)");
    const W a = mu.atoms().front().weight;
    for (const auto& at : mu.atoms()) {
        if constexpr (weight_traits<W>::exact) {
            if (at.weight != a) throw validation_error("l2_lower_bound_check: mu must have constant density");
        } else {
            if (std::abs(at.weight - a) > 1e-12 * std::abs(a))
                throw validation_error("l2_lower_bound_check: mu must have constant density");
        }
    }
    W c(0);
    std::unordered_set<Index, IndexHash> seen, sums;
    for (const auto& [x, y] : G) {
        const Index xx{x[0], 0}, yy{y[0], 0};
        if (!seen.insert(Index{xx[0], yy[0]}).second) continue;
        const W mx = mu.weight_at(xx), sy = sigma.weight_at(yy);
        if (!(mx > W(0)) || !(sy > W(0))) throw validation_error("l2_lower_bound_check: pair outside the supports");
        c += mx * sy;
        sums.insert(xx + yy);
    }
    const auto X = static_cast<long long>(mu.size());
    const auto S = static_cast<long long>(sums.size());
    const W conv2 = l2sh_norm_sq(convolve(mu, sigma));
    const W mu2 = l2sh_norm_sq(mu);
    // ||mu*sigma||^2 * C >= c^2 ||mu||^2 with C = S / X, compared exactly.
    bool ok;
    if constexpr (weight_traits<W>::exact)
        ok = conv2 * W(S) >= c * c * mu2 * W(X);
    else
        ok = conv2 * S >= c * c * mu2 * X * (1 - 1e-12);
    L2LowerBoundReport rep;
    rep.c = to_double(c);
    rep.C = static_cast<double>(S) / static_cast<double>(X);
    rep.lhs = std::sqrt(to_double(conv2));
    rep.rhs = rep.c / std::sqrt(rep.C) * std::sqrt(to_double(mu2));
    rep.ok = ok;
    return rep;
}

}  // namespace flatlab
