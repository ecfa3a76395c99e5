#pragma once

// Finitely supported measures on the dyadic lattice delta Z^d ("delta-measures")
// and the exact operations used throughout: IFS discretization, coarsening,
// restriction, grid-aligned similarities, products, lifts to curves,
// convolution powers and the l2 (Shmerkin) norm.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <variant>
#include <vector>

#include "flatlab/core.hpp"
#include "flatlab/fft.hpp"
#include "flatlab/grid.hpp"
#include "flatlab/weights.hpp"

namespace flatlab {

/// Axis-aligned half-open box [lo, hi) in R^d; infinite bounds allowed.
struct Window {
    int dim = 1;
    Point lo{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    Point hi{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};

    static Window everything(int dim) { return Window{dim}; }
    static Window interval(double a, double b) {
        Window w{1};
        w.lo[0] = a;
        w.hi[0] = b;
        w.validate();
        return w;
    }
    static Window box(double x0, double x1, double y0, double y1) {
        Window w{2};
        w.lo = {x0, y0};
        w.hi = {x1, y1};
        w.validate();
        return w;
    }

    void validate() const {
        for (int a = 0; a < dim; ++a)
            if (!(lo[a] < hi[a])) throw validation_error("window must have nonempty interior");
    }

    bool contains(const Point& p) const {
        for (int a = 0; a < dim; ++a)
            if (!(p[a] >= lo[a] && p[a] < hi[a])) return false;
        return true;
    }

    // Closed ball B(x, r) inside [lo, hi).
    bool contains_ball(const Point& x, double r) const {
        for (int a = 0; a < dim; ++a)
            if (!(x[a] - r >= lo[a] && x[a] + r < hi[a])) return false;
        return true;
    }
};

inline constexpr std::size_t default_lattice_budget = std::size_t{1} << 26;
inline constexpr double sparse_convolution_limit = 1e7;

template <class W>
class BasicDeltaMeasure {
public:
    using weight_type = W;

    struct Atom {
        Index index;
        W weight;
    };

    BasicDeltaMeasure() = default;

    /// Merges duplicate indices, then validates positivity and total mass.
    static BasicDeltaMeasure from_atoms(Scale scale, std::vector<Atom> atoms) {
        BasicDeltaMeasure m;
        m.scale_ = scale;
        if (scale.dim() == 1)
            for (auto& a : atoms) a.index[1] = 0;
        std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.index < b.index; });
        for (auto& a : atoms) {
            if (!m.atoms_.empty() && m.atoms_.back().index == a.index) {
                m.atoms_.back().weight += a.weight;
            } else {
                m.atoms_.push_back(std::move(a));
            }
        }
        m.mass_ = W(0);
        for (const auto& a : m.atoms_) {
            if (!(a.weight > W(0))) throw validation_error("delta-measure weights must be strictly positive");
            m.mass_ += a.weight;
        }
        if (m.atoms_.empty()) throw validation_error("delta-measure must have nonempty support");
        if (to_double(m.mass_) > 1.0 + weight_traits<W>::slack)
            throw validation_error("delta-measure total mass exceeds 1");
        return m;
    }

    const Scale& scale() const noexcept { return scale_; }
    int dim() const noexcept { return scale_.dim(); }
    std::span<const Atom> atoms() const noexcept { return atoms_; }
    std::size_t size() const noexcept { return atoms_.size(); }
    const W& total_mass() const noexcept { return mass_; }

    Point position(const Index& i) const {
        const double d = scale_.delta();
        return {i[0] * d, i[1] * d};
    }
    Point position(std::size_t k) const { return position(atoms_[k].index); }

    /// Weight at a lattice index (zero off the support).
    W weight_at(const Index& i) const {
        auto it = std::lower_bound(atoms_.begin(), atoms_.end(), i,
                                   [](const Atom& a, const Index& key) { return a.index < key; });
        if (it != atoms_.end() && it->index == i) return it->weight;
        return W(0);
    }

    CellSet support_cells() const {
        std::vector<Index> v;
        v.reserve(atoms_.size());
        for (const auto& a : atoms_) v.push_back(a.index);
        return CellSet(scale_, std::move(v));
    }

    /// Bounding box of the support in index units: {min, max} (inclusive).
    std::pair<Index, Index> index_bounds() const {
        Index lo = atoms_.front().index, hi = lo;
        for (const auto& a : atoms_) {
            for (int k = 0; k < 2; ++k) {
                lo[k] = std::min(lo[k], a.index[k]);
                hi[k] = std::max(hi[k], a.index[k]);
            }
        }
        return {lo, hi};
    }

    double diameter() const {
        // O(n^2) in 2D; the supports handled here are small enough, and 1D is exact from bounds.
        if (dim() == 1) {
            auto [lo, hi] = index_bounds();
            return static_cast<double>(hi[0] - lo[0]) * scale_.delta();
        }
        std::int64_t best = 0;
        for (std::size_t i = 0; i < atoms_.size(); ++i)
            for (std::size_t j = i + 1; j < atoms_.size(); ++j) {
                auto d = atoms_[i].index - atoms_[j].index;
                best = std::max(best, d[0] * d[0] + d[1] * d[1]);
            }
        return std::sqrt(static_cast<double>(best)) * scale_.delta();
    }

    friend bool operator==(const BasicDeltaMeasure& a, const BasicDeltaMeasure& b) {
        if (!(a.scale_ == b.scale_) || a.atoms_.size() != b.atoms_.size()) return false;
        for (std::size_t i = 0; i < a.atoms_.size(); ++i)
            if (a.atoms_[i].index != b.atoms_[i].index || !(a.atoms_[i].weight == b.atoms_[i].weight)) return false;
        return true;
    }

private:
    Scale scale_;
    std::vector<Atom> atoms_;
    W mass_{};
};

using DeltaMeasure = BasicDeltaMeasure<double>;
using ExactDeltaMeasure = BasicDeltaMeasure<Rational>;

template <class W>
DeltaMeasure to_double_measure(const BasicDeltaMeasure<W>& m) {
    std::vector<DeltaMeasure::Atom> v;
    v.reserve(m.size());
    for (const auto& a : m.atoms()) v.push_back({a.index, to_double(a.weight)});
    return DeltaMeasure::from_atoms(m.scale(), std::move(v));
}

// ---------------------------------------------------------------------------
// Simple constructors.

template <class W = double>
BasicDeltaMeasure<W> atom_measure(Scale s, Index i = {0, 0}) {
    return BasicDeltaMeasure<W>::from_atoms(s, {{i, W(1)}});
}

/// Uniform probability on the given cells (as lattice points).
template <class W = double>
BasicDeltaMeasure<W> uniform_on(const CellSet& cells) {
    if (cells.empty()) throw validation_error("uniform_on: empty cell set");
    const W w = W(1) / W(static_cast<long long>(cells.size()));
    std::vector<typename BasicDeltaMeasure<W>::Atom> v;
    v.reserve(cells.size());
    for (const auto& c : cells) v.push_back({c, w});
    return BasicDeltaMeasure<W>::from_atoms(cells.scale(), std::move(v));
}

/// Uniform measure on the lattice points i*delta, i in [first, last] (1D).
template <class W = double>
BasicDeltaMeasure<W> lattice_uniform(Scale s, std::int64_t first, std::int64_t last) {
    if (s.dim() != 1 || last < first) throw validation_error("lattice_uniform: need a 1D scale and first <= last");
    std::vector<Index> v;
    for (std::int64_t i = first; i <= last; ++i) v.push_back({i, 0});
    return uniform_on<W>(CellSet(s, std::move(v)));
}

/// Discretized Lebesgue measure on [0,1): uniform on i*delta, 0 <= i < 1/delta.
template <class W = double>
BasicDeltaMeasure<W> lebesgue_unit(Scale s) {
    return lattice_uniform<W>(s, 0, (std::int64_t{1} << s.log2_inverse()) - 1);
}

// ---------------------------------------------------------------------------
// Iterated function systems.

struct AffineMap {
    double ratio = 0.5;        // in (0, 1)
    double translation = 0.0;  // x -> ratio * x + translation
};

/// A differentiable contraction given by evaluators; the contraction ratio is
/// certified by sampling |f'| on [-1, 1].
struct ConformalMap {
    std::function<double(double)> f;
    std::function<double(double)> df;
    double modulus = 0.0;  // declared Lipschitz bound for f', added to the sampled sup
};

using ContractionMap = std::variant<AffineMap, ConformalMap>;

inline constexpr int certificate_samples = 1 << 12;

inline double apply_map(const ContractionMap& m, double x) {
    if (const auto* a = std::get_if<AffineMap>(&m)) return a->ratio * x + a->translation;
    return std::get<ConformalMap>(m).f(x);
}

/// Certified upper bound on the contraction ratio over [-1, 1].
inline double ratio_certificate(const ContractionMap& m) {
    if (const auto* a = std::get_if<AffineMap>(&m)) return std::abs(a->ratio);
    const auto& c = std::get<ConformalMap>(m);
    if (!c.f || !c.df) throw validation_error("conformal map needs both f and f' evaluators");
    const double h = 2.0 / certificate_samples;
    double sup = 0.0;
    for (int k = 0; k <= certificate_samples; ++k) sup = std::max(sup, std::abs(c.df(-1.0 + k * h)));
    return sup + c.modulus * h;
}

inline double fixed_point(const ContractionMap& m) {
    if (const auto* a = std::get_if<AffineMap>(&m)) return a->translation / (1.0 - a->ratio);
    double x = 0.0;
    for (int it = 0; it < 2000; ++it) {
        double nx = apply_map(m, x);
        if (std::abs(nx - x) < 1e-15) return nx;
        x = nx;
    }
    return x;
}

template <class W = double>
struct IFSSpec {
    std::vector<ContractionMap> maps;
    std::vector<W> weights;
    std::size_t node_budget = std::size_t{1} << 22;

    /// Throws validation_error describing the first violated requirement.
    void validate() const {
        if (maps.empty()) throw validation_error("IFS needs at least one map");
        if (weights.size() != maps.size()) throw validation_error("IFS: one weight per map required");
        W sum(0);
        for (const auto& p : weights) {
            if (!(p > W(0))) throw validation_error("IFS weights must be strictly positive");
            sum += p;
        }
        if constexpr (weight_traits<W>::exact) {
            if (sum != W(1)) throw validation_error("IFS weights must sum to 1 exactly");
        } else {
            if (std::abs(sum - 1.0) > 1e-12) throw validation_error("IFS weights must sum to 1");
        }
        for (const auto& m : maps) {
            if (const auto* a = std::get_if<AffineMap>(&m)) {
                if (!(a->ratio > 0.0 && a->ratio < 1.0))
                    throw validation_error("affine IFS ratios must lie in (0, 1)");
            } else if (!(ratio_certificate(m) < 1.0)) {
                throw validation_error("conformal IFS map failed the contraction certificate");
            }
        }
        // Attractor hull: iterate the convex hull of the fixed points under all maps.
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& m : maps) {
            double x = fixed_point(m);
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        for (int it = 0; it < 200; ++it) {
            double nlo = lo, nhi = hi;
            for (const auto& m : maps) {
                const int samples = std::holds_alternative<AffineMap>(m) ? 1 : 64;
                for (int k = 0; k <= samples; ++k) {
                    double y = apply_map(m, lo + (hi - lo) * k / samples);
                    nlo = std::min(nlo, y);
                    nhi = std::max(nhi, y);
                }
            }
            if (nlo == lo && nhi == hi) break;
            lo = nlo;
            hi = nhi;
        }
        if (lo < -1.0 - 1e-12 || hi > 1.0 + 1e-12) throw validation_error("IFS attractor is not contained in [-1, 1]");
    }
};

/// Level-delta discretization of the stationary measure: words are expanded
/// until the product of ratio certificates is <= delta; the word w carries
/// mass p_w placed at the lattice point nearest f_w(x0), x0 the fixed point of
/// the first map.
template <class W>
BasicDeltaMeasure<W> from_ifs(const IFSSpec<W>& spec, Scale delta) {
    spec.validate();
    if (delta.dim() != 1) throw validation_error("from_ifs produces one-dimensional measures");
    const double d = delta.delta();
    std::vector<double> ratios;
    for (const auto& m : spec.maps) ratios.push_back(ratio_certificate(m));
    const double x0 = fixed_point(spec.maps.front());

    std::vector<typename BasicDeltaMeasure<W>::Atom> out;
    std::size_t nodes = 0;
    std::vector<int> word;
    // Depth-first expansion; f_w(x0) = f_{w1}(f_{w2}(...f_{wn}(x0))).
    std::function<void(double, W)> expand = [&](double ratio, W mass) {
        if (++nodes > spec.node_budget) throw budget_error("IFS word expansion exceeded the node budget");
        if (ratio <= d) {
            double x = x0;
            for (auto it = word.rbegin(); it != word.rend(); ++it) x = apply_map(spec.maps[*it], x);
            auto idx = static_cast<std::int64_t>(std::floor(x / d + 0.5));
            out.push_back({{idx, 0}, mass});
            return;
        }
        for (std::size_t i = 0; i < spec.maps.size(); ++i) {
            if (ratios[i] <= 0.0) continue;
            word.push_back(static_cast<int>(i));
            expand(ratio * ratios[i], mass * spec.weights[i]);
            word.pop_back();
        }
    };
    expand(1.0, W(1));
    return BasicDeltaMeasure<W>::from_atoms(delta, std::move(out));
}

template <class W = double>
IFSSpec<W> cantor4_spec() {
    return {{AffineMap{0.25, 0.0}, AffineMap{0.25, 0.75}}, {W(1) / W(2), W(1) / W(2)}};
}

template <class W = double>
IFSSpec<W> dyadic_lebesgue_spec() {
    return {{AffineMap{0.5, 0.0}, AffineMap{0.5, 0.5}}, {W(1) / W(2), W(1) / W(2)}};
}

// ---------------------------------------------------------------------------
// Operations.

/// Mass of each target cell is the exact sum of the fine atoms it contains.
template <class W>
BasicDeltaMeasure<W> coarsen(const BasicDeltaMeasure<W>& rho, const Scale& target) {
    if (target.dim() != rho.dim()) throw validation_error("coarsen: dimension mismatch");
    if (!target.no_finer_than(rho.scale())) throw validation_error("coarsen: target scale finer than source");
    const int shift = rho.scale().log2_inverse() - target.log2_inverse();
    std::vector<typename BasicDeltaMeasure<W>::Atom> v;
    v.reserve(rho.size());
    for (const auto& a : rho.atoms()) v.push_back({coarsen_index(a.index, shift), a.weight});
    return BasicDeltaMeasure<W>::from_atoms(target, std::move(v));
}

/// Sum of squared atom weights. Depends on the scale through the lattice.
template <class W>
W l2sh_norm_sq(const BasicDeltaMeasure<W>& nu) {
    W s(0);
    for (const auto& a : nu.atoms()) s += a.weight * a.weight;
    return s;
}

inline double l2sh_norm(const DeltaMeasure& nu) { return std::sqrt(l2sh_norm_sq(nu)); }

enum class convolution_backend { automatic, sparse, dense };

namespace detail {

template <class W>
BasicDeltaMeasure<W> convolve_sparse(const BasicDeltaMeasure<W>& mu, const BasicDeltaMeasure<W>& nu) {
    std::unordered_map<Index, W, IndexHash> acc;
    acc.reserve(std::min<std::size_t>(mu.size() * nu.size(), std::size_t{1} << 24));
    for (const auto& a : mu.atoms())
        for (const auto& b : nu.atoms()) acc[a.index + b.index] += a.weight * b.weight;
    std::vector<typename BasicDeltaMeasure<W>::Atom> v;
    v.reserve(acc.size());
    for (auto& [k, w] : acc) v.push_back({k, w});
    return BasicDeltaMeasure<W>::from_atoms(mu.scale(), std::move(v));
}

inline DeltaMeasure convolve_dense(const DeltaMeasure& mu, const DeltaMeasure& nu, std::size_t budget) {
    auto [mlo, mhi] = mu.index_bounds();
    auto [nlo, nhi] = nu.index_bounds();
    const std::int64_t a0 = mhi[0] - mlo[0] + 1, a1 = mhi[1] - mlo[1] + 1;
    const std::int64_t b0 = nhi[0] - nlo[0] + 1, b1 = nhi[1] - nlo[1] + 1;
    const double cells = static_cast<double>(a0 + b0 - 1) * static_cast<double>(a1 + b1 - 1);
    if (cells > static_cast<double>(budget)) throw budget_error("dense convolution exceeds the lattice budget");
    auto scatter = [](const DeltaMeasure& m, Index lo, std::int64_t s1, std::size_t n, bool indicator) {
        std::vector<double> g(n, 0.0);
        for (const auto& a : m.atoms())
            g[static_cast<std::size_t>((a.index[0] - lo[0]) * s1 + (a.index[1] - lo[1]))] = indicator ? 1.0 : a.weight;
        return g;
    };
    const auto na = static_cast<std::size_t>(a0 * a1), nb = static_cast<std::size_t>(b0 * b1);
    auto w = fft::linear_convolve(scatter(mu, mlo, a1, na, false), (int)a0, (int)a1, scatter(nu, nlo, b1, nb, false),
                                  (int)b0, (int)b1);
    // Pair counts identify the support exactly; tiny or non-positive transform
    // values on the support are recomputed by direct summation.
    auto cnt = fft::linear_convolve(scatter(mu, mlo, a1, na, true), (int)a0, (int)a1, scatter(nu, nlo, b1, nb, true),
                                    (int)b0, (int)b1);
    const std::int64_t n1 = a1 + b1 - 1;
    double wmax = 0.0;
    for (double x : w) wmax = std::max(wmax, x);
    std::vector<DeltaMeasure::Atom> v;
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (cnt[k] < 0.5) continue;
        Index z{mlo[0] + nlo[0] + static_cast<std::int64_t>(k) / n1, mlo[1] + nlo[1] + static_cast<std::int64_t>(k) % n1};
        double val = w[k];
        if (val <= 1e-12 * wmax) {
            val = 0.0;
            for (const auto& a : mu.atoms()) val += a.weight * nu.weight_at(z - a.index);
        }
        v.push_back({z, val});
    }
    return DeltaMeasure::from_atoms(mu.scale(), std::move(v));
}

}  // namespace detail

/// Exact lattice convolution (mu * nu)(z) = sum_x mu(x) nu(z - x).
template <class W>
BasicDeltaMeasure<W> convolve(const BasicDeltaMeasure<W>& mu, const BasicDeltaMeasure<W>& nu,
                              convolution_backend backend = convolution_backend::automatic,
                              std::size_t budget = default_lattice_budget) {
    if (!(mu.scale() == nu.scale())) throw validation_error("convolve: scale mismatch");
    if constexpr (weight_traits<W>::exact) {
        return detail::convolve_sparse(mu, nu);
    } else {
        if (backend == convolution_backend::automatic)
            backend = static_cast<double>(mu.size()) * static_cast<double>(nu.size()) <= sparse_convolution_limit
                          ? convolution_backend::sparse
                          : convolution_backend::dense;
        if (backend == convolution_backend::sparse) return detail::convolve_sparse(mu, nu);
        return detail::convolve_dense(mu, nu, budget);
    }
}

/// k-fold self-convolution by repeated squaring.
template <class W>
BasicDeltaMeasure<W> self_convolution_power(const BasicDeltaMeasure<W>& sigma, int k,
                                            std::size_t budget = default_lattice_budget) {
    if (k < 1) throw validation_error("self_convolution_power: k must be >= 1");
    auto [lo, hi] = sigma.index_bounds();
    const double box = (static_cast<double>(k) * static_cast<double>(hi[0] - lo[0]) + 1.0) *
                       (static_cast<double>(k) * static_cast<double>(hi[1] - lo[1]) + 1.0);
    if (box > static_cast<double>(budget))
        throw budget_error("self_convolution_power: support box of sigma^" + std::to_string(k) +
                           " exceeds the lattice budget");
    std::optional<BasicDeltaMeasure<W>> result;
    BasicDeltaMeasure<W> base = sigma;
    for (int e = k;;) {
        if (e & 1) result = result ? convolve(*result, base, convolution_backend::automatic, budget) : base;
        e >>= 1;
        if (e == 0) break;
        base = convolve(base, base, convolution_backend::automatic, budget);
    }
    return *result;
}

/// Drops atoms whose lattice point lies outside the half-open window; no renormalization.
template <class W>
BasicDeltaMeasure<W> restrict_to(const BasicDeltaMeasure<W>& sigma, const Window& v) {
    if (v.dim != sigma.dim()) throw validation_error("restrict: window dimension mismatch");
    std::vector<typename BasicDeltaMeasure<W>::Atom> kept;
    for (const auto& a : sigma.atoms())
        if (v.contains(sigma.position(a.index))) kept.push_back(a);
    if (kept.empty()) throw validation_error("restrict: window misses the support");
    return BasicDeltaMeasure<W>::from_atoms(sigma.scale(), std::move(kept));
}

/// Grid-aligned similarity x -> 2^j x + shift. The scale is relabelled to
/// 2^j delta; the shift must be a multiple of the new lattice spacing.
template <class W>
BasicDeltaMeasure<W> pushforward_similarity(const BasicDeltaMeasure<W>& sigma, int log2_ratio, const Point& shift) {
    const int m = sigma.scale().log2_inverse() - log2_ratio;
    if (m < 1) throw validation_error("pushforward_similarity: resulting scale would be coarser than 1/2");
    const Scale target = sigma.scale().with_m(m);
    const double inv = std::ldexp(1.0, m);
    Index off{0, 0};
    for (int a = 0; a < sigma.dim(); ++a) {
        double q = shift[a] * inv;
        if (q != std::floor(q) || std::abs(q) > 9e15)
            throw validation_error("pushforward_similarity: shift is not aligned with the target grid");
        off[a] = static_cast<std::int64_t>(q);
    }
    std::vector<typename BasicDeltaMeasure<W>::Atom> v;
    v.reserve(sigma.size());
    for (const auto& a : sigma.atoms()) v.push_back({a.index + off, a.weight});
    return BasicDeltaMeasure<W>::from_atoms(target, std::move(v));
}

inline Window pushforward_window(const Window& u, int log2_ratio, const Point& shift) {
    Window w = u;
    const double lam = std::ldexp(1.0, log2_ratio);
    for (int a = 0; a < u.dim; ++a) {
        w.lo[a] = u.lo[a] * lam + shift[a];
        w.hi[a] = u.hi[a] * lam + shift[a];
    }
    return w;
}

/// Product of two 1D measures on the product lattice.
template <class W>
BasicDeltaMeasure<W> product(const BasicDeltaMeasure<W>& mu, const BasicDeltaMeasure<W>& nu) {
    if (mu.dim() != 1 || nu.dim() != 1) throw validation_error("product: both factors must be one-dimensional");
    if (!(mu.scale() == nu.scale())) throw validation_error("product: scale mismatch");
    std::vector<typename BasicDeltaMeasure<W>::Atom> v;
    v.reserve(mu.size() * nu.size());
    for (const auto& a : mu.atoms())
        for (const auto& b : nu.atoms()) v.push_back({{a.index[0], b.index[0]}, a.weight * b.weight});
    return BasicDeltaMeasure<W>::from_atoms(Scale(mu.scale().log2_inverse(), 2), std::move(v));
}

/// Push-forward of a 1D measure to the graph x -> (x, phi(x)), rounding
/// each image point down to its planar cell. Curve must expose value(x)
/// and in_domain(x).
template <class W, class Curve>
BasicDeltaMeasure<W> lift_to_curve(const BasicDeltaMeasure<W>& nu, const Curve& curve) {
    if (nu.dim() != 1) throw validation_error("lift_to_curve: measure must be one-dimensional");
    const double d = nu.scale().delta();
    std::vector<typename BasicDeltaMeasure<W>::Atom> v;
    v.reserve(nu.size());
    for (const auto& a : nu.atoms()) {
        const double x = a.index[0] * d;
        if (x < -1.0 || x > 1.0) throw validation_error("lift_to_curve: support must lie in [-1, 1]");
        const double y = curve.value(x);
        v.push_back({{a.index[0], static_cast<std::int64_t>(std::floor(y / d))}, a.weight});
    }
    return BasicDeltaMeasure<W>::from_atoms(Scale(nu.scale().log2_inverse(), 2), std::move(v));
}

/// Mass of the product measure on A x B where A, B are index predicates.
template <class W, class PredA, class PredB>
W product_mass(const BasicDeltaMeasure<W>& mu, const BasicDeltaMeasure<W>& nu, PredA in_a, PredB in_b) {
    W ma(0), mb(0);
    for (const auto& a : mu.atoms())
        if (in_a(a.index)) ma += a.weight;
    for (const auto& b : nu.atoms())
        if (in_b(b.index)) mb += b.weight;
    return ma * mb;
}

}  // namespace flatlab
