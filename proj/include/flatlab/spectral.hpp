#pragma once

// Fourier side of delta-measures: sampled transforms, L^p ball averages,
// Riesz energies (regularized kernel, mollified, Fourier weighted), the J_r
// sequence of mollified convolution powers, the flattening table, the
// Fourier/energy bridge and the band-limited Hoelder chain.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "flatlab/core.hpp"
#include "flatlab/fft.hpp"
#include "flatlab/measure.hpp"

namespace flatlab {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Mollifier: radially decreasing, smooth, equal to c_d on |x| <= 1/2 and
// falling to zero on [1/2, 0.6] through a C-infinity step. In the plane
// c_2 > 1, so 1_{B(1/2)} <= psi; on the line no unit-mass profile can do
// that and c_1 = 1 / 1.1.

class Mollifier {
public:
    explicit Mollifier(int dim) : dim_(dim) {
        if (dim != 1 && dim != 2) throw validation_error("mollifier dimension must be 1 or 2");
        const double raw = radial_integral([](double r) { return bump(r); });
        c_ = 1.0 / raw;
        l2_ = std::sqrt(c_ * c_ * radial_integral([](double r) { return bump(r) * bump(r); }));
    }

    static const Mollifier& get(int dim) {
        static const Mollifier one(1), two(2);
        return dim == 1 ? one : two;
    }

    int dim() const noexcept { return dim_; }
    double normalizer() const noexcept { return c_; }
    double l2_norm() const noexcept { return l2_; }

    double operator()(double rho) const { return c_ * bump(rho); }
    /// psi_s(x) = s^{-d} psi(x / s), as a function of |x|.
    double scaled(double rho, double s) const { return (*this)(rho / s) / std::pow(s, dim_); }

    /// Integral of a radial profile f(|x|) over the unit ball.
    template <class F>
    double radial_integral(F f) const {
        // The bump is flat at the boundary, so the trapezoid rule converges fast.
        const int n = 1 << 16;
        const double h = 1.0 / n;
        double s = 0.0;
        for (int k = 1; k < n; ++k) {
            const double r = k * h;
            s += dim_ == 1 ? 2.0 * f(r) : 2.0 * std::numbers::pi * r * f(r);
        }
        s += 0.5 * (dim_ == 1 ? 2.0 * f(0.0) : 0.0);
        return s * h;
    }

private:
    static constexpr double plateau = 0.5, edge = 0.6;

    static double bump(double rho) {
        if (rho <= plateau) return 1.0;
        if (!(rho < edge)) return 0.0;
        const double t = (edge - rho) / (edge - plateau);
        const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
        return a / (a + b);
    }

    int dim_;
    double c_ = 1.0;
    double l2_ = 0.0;
};

// ---------------------------------------------------------------------------
// Transform sampling. sigma-hat(xi) = sum_z w_z exp(-2 pi i xi . z) on the
// frequency lattice h Z^d.

namespace detail {

struct SpectralAtoms {
    int dim = 1;
    int m = 1;
    std::vector<Index> index;
    std::vector<double> weight;
};

template <class W>
SpectralAtoms spectral_atoms(const BasicDeltaMeasure<W>& s) {
    SpectralAtoms a;
    a.dim = s.dim();
    a.m = s.scale().log2_inverse();
    for (const auto& at : s.atoms()) {
        a.index.push_back(at.index);
        a.weight.push_back(to_double(at.weight));
    }
    return a;
}

// exp(-2 pi i * frac(n * step)), with n * step formed in one rounding.
inline cplx unit_phase(std::int64_t n, double step) {
    const double t = static_cast<double>(n) * step;
    const double f = t - std::floor(t);
    return std::polar(1.0, -2.0 * std::numbers::pi * f);
}

// Segments of the frequency ball: row a (first coordinate) and a run of b values.
struct Segment {
    std::int64_t a;
    std::int64_t b0;
    std::int64_t len;
};

inline std::int64_t lattice_radius(double R, double h) { return static_cast<std::int64_t>(std::floor(R / h + 1e-9)); }

inline std::vector<Segment> ball_segments(int dim, double R, double h, std::int64_t chunk = 4096) {
    const std::int64_t A = lattice_radius(R, h);
    const double lim = (R / h) * (R / h) * (1 + 1e-12);
    std::vector<Segment> out;
    auto push_row = [&](std::int64_t a, std::int64_t B) {
        for (std::int64_t b = -B; b <= B; b += chunk) out.push_back({a, b, std::min(chunk, B - b + 1)});
    };
    if (dim == 1) {
        push_row(0, A);
        return out;
    }
    for (std::int64_t a = -A; a <= A; ++a) {
        const double rem = lim - static_cast<double>(a) * static_cast<double>(a);
        if (rem < 0) continue;
        auto B = static_cast<std::int64_t>(std::floor(std::sqrt(rem)));
        while (static_cast<double>((B + 1) * (B + 1)) <= rem) ++B;
        while (B > 0 && static_cast<double>(B * B) > rem) --B;
        push_row(a, B);
    }
    return out;
}

// Evaluates the transform segment by segment. In 2D, atoms are grouped by
// their second index j so that a row costs one pass per distinct j.
class RowEvaluator {
public:
    RowEvaluator(const SpectralAtoms& at, double h, std::int64_t A) : at_(at), A_(A) {
        step_ = h * std::ldexp(1.0, -at.m);
        const std::size_t n = at.index.size();
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        const int key = at.dim == 1 ? 0 : 1;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return at.index[x][key] < at.index[y][key]; });
        for (std::size_t i : order) {
            const std::int64_t j = at.index[i][key];
            if (keys_.empty() || keys_.back() != j) {
                keys_.push_back(j);
                members_.emplace_back();
            }
            members_.back().push_back(i);
        }
        const std::size_t width = static_cast<std::size_t>(2 * A + 1);
        if (width * keys_.size() <= (std::size_t{1} << 24)) {
            table_.resize(width * keys_.size());
            for (std::int64_t b = -A; b <= A; ++b)
                for (std::size_t g = 0; g < keys_.size(); ++g)
                    table_[static_cast<std::size_t>(b + A) * keys_.size() + g] = unit_phase(b * keys_[g], step_);
        }
    }

    void eval(const Segment& s, cplx* out) const {
        const std::size_t G = keys_.size();
        std::vector<cplx> coef(G);
        for (std::size_t g = 0; g < G; ++g) {
            cplx c{};
            for (std::size_t i : members_[g])
                c += at_.dim == 1 ? cplx(at_.weight[i], 0.0) : at_.weight[i] * unit_phase(s.a * at_.index[i][0], step_);
            coef[g] = c;
        }
        for (std::int64_t t = 0; t < s.len; ++t) {
            const std::int64_t b = s.b0 + t;
            cplx acc{};
            if (!table_.empty()) {
                const cplx* e = &table_[static_cast<std::size_t>(b + A_) * G];
                for (std::size_t g = 0; g < G; ++g) acc += coef[g] * e[g];
            } else {
                for (std::size_t g = 0; g < G; ++g) acc += coef[g] * unit_phase(b * keys_[g], step_);
            }
            out[t] = acc;
        }
    }

private:
    const SpectralAtoms& at_;
    std::int64_t A_;
    double step_ = 0.0;
    std::vector<std::int64_t> keys_;
    std::vector<std::vector<std::size_t>> members_;
    std::vector<cplx> table_;
};

// Runs fn(segment, values) over the ball, segments in parallel; returns
// per-segment results in canonical order.
template <class Acc, class Fn>
std::vector<Acc> over_ball(const SpectralAtoms& at, double h, double R, Fn fn) {
    const auto segs = ball_segments(at.dim, R, h);
    RowEvaluator ev(at, h, lattice_radius(R, h));
    std::vector<Acc> acc(segs.size());
    parallel_tiles(segs.size(), 1, [&](std::size_t b, std::size_t e) {
        std::vector<cplx> buf;
        for (std::size_t k = b; k < e; ++k) {
            buf.resize(static_cast<std::size_t>(segs[k].len));
            ev.eval(segs[k], buf.data());
            acc[k] = fn(segs[k], buf);
        }
    });
    return acc;
}

}  // namespace detail

enum class fourier_backend { direct, dense };

/// Transform samples on h Z^d cap B(R), stored densely over [-A, A]^d with
/// zeros outside the ball.
struct FourierField {
    int dim = 1;
    double h = 0.125;
    double R = 1.0;
    std::int64_t A = 0;
    std::vector<cplx> values;

    std::size_t width() const { return static_cast<std::size_t>(2 * A + 1); }
    bool inside(std::int64_t a, std::int64_t b) const {
        const double lim = (R / h) * (R / h) * (1 + 1e-12);
        return static_cast<double>(a * a + b * b) <= lim;
    }
    std::size_t offset(std::int64_t a, std::int64_t b) const {
        return dim == 1 ? static_cast<std::size_t>(a + A)
                        : static_cast<std::size_t>(a + A) * width() + static_cast<std::size_t>(b + A);
    }
    cplx at(std::int64_t a, std::int64_t b = 0) const { return values[offset(a, b)]; }
    cplx& at(std::int64_t a, std::int64_t b = 0) { return values[offset(a, b)]; }

    static FourierField zeros(int dim, double h, double R) {
        FourierField f;
        f.dim = dim;
        f.h = h;
        f.R = R;
        f.A = detail::lattice_radius(R, h);
        const std::size_t w = f.width();
        f.values.assign(dim == 1 ? w : w * w, cplx{});
        return f;
    }

    template <class Fn>
    void for_each(Fn fn) const {
        for (std::int64_t a = -A; a <= A; ++a) {
            if (dim == 1) {
                fn(a, std::int64_t{0}, at(a));
                continue;
            }
            for (std::int64_t b = -A; b <= A; ++b)
                if (inside(a, b)) fn(a, b, at(a, b));
        }
    }
};

inline constexpr std::size_t default_field_budget = std::size_t{1} << 24;

/// Largest admissible spacing: 1 / (4 diam(spt sigma)), capped at 1/8.
inline double default_frequency_spacing(double diam) {
    double h = 0.125;
    if (diam > 0) h = std::min(h, 1.0 / (4.0 * diam));
    return h;
}

template <class W>
void check_frequency_spacing(const BasicDeltaMeasure<W>& sigma, double h) {
    if (!(h > 0.0)) throw validation_error("frequency spacing must be positive");
    const double diam = sigma.diameter();
    if (diam > 0 && h > 1.0 / (4.0 * diam) * (1 + 1e-12))
        throw validation_error("frequency spacing h = " + format_double(h) + " too coarse; need h <= 1/(4 diam) = " +
                               format_double(1.0 / (4.0 * diam)));
}

template <class W>
FourierField fourier_eval(const BasicDeltaMeasure<W>& sigma, double h, double R,
                          fourier_backend backend = fourier_backend::direct,
                          std::size_t budget = default_field_budget) {
    check_frequency_spacing(sigma, h);
    if (!(R > 0)) throw validation_error("fourier_eval: R must be positive");
    auto f = FourierField::zeros(sigma.dim(), h, R);
    if (f.values.size() > budget) throw budget_error("fourier_eval: sample field exceeds budget");
    const auto at = detail::spectral_atoms(sigma);
    if (backend == fourier_backend::direct) {
        detail::over_ball<int>(at, h, R, [&](const detail::Segment& s, const std::vector<cplx>& v) {
            for (std::int64_t t = 0; t < s.len; ++t) f.at(sigma.dim() == 1 ? s.b0 + t : s.a, s.b0 + t) = v[t];
            return 0;
        });
        return f;
    }
    // Dense: N = 1 / (h delta) point DFT of the weights wrapped modulo N.
    const double Nd = 1.0 / (h * sigma.scale().delta());
    const auto N = static_cast<std::int64_t>(std::llround(Nd));
    if (std::abs(Nd - static_cast<double>(N)) > 1e-9 || !is_power_of_two(N))
        throw validation_error("dense fourier backend needs 1/(h delta) to be a power of two");
    const std::size_t cells = sigma.dim() == 1 ? static_cast<std::size_t>(N) : static_cast<std::size_t>(N * N);
    if (cells > budget) throw budget_error("dense fourier backend: transform size exceeds budget");
    auto buf = fft::allocate<cplx>(cells);
    std::fill(buf.get(), buf.get() + cells, cplx{});
    auto wrap = [N](std::int64_t i) { return ((i % N) + N) % N; };
    for (std::size_t k = 0; k < at.index.size(); ++k) {
        const auto i = wrap(at.index[k][0]);
        const auto j = sigma.dim() == 1 ? 0 : wrap(at.index[k][1]);
        buf[static_cast<std::size_t>(i * (sigma.dim() == 1 ? 1 : N) + j)] += at.weight[k];
    }
    fft::dft_inplace(buf.get(), static_cast<int>(N), sigma.dim() == 1 ? 1 : static_cast<int>(N), FFTW_FORWARD);
    f.for_each([&](std::int64_t a, std::int64_t b, cplx) {
        const auto u = static_cast<std::size_t>(wrap(a));
        const auto v = static_cast<std::size_t>(wrap(b));
        f.at(a, b) = sigma.dim() == 1 ? buf[u] : buf[u * static_cast<std::size_t>(N) + v];
    });
    return f;
}

inline double abs_pow(cplx z, int p) {
    const double m = std::norm(z);
    double r = 1.0;
    for (int k = 0; k < p / 2; ++k) r *= m;
    return r;
}

struct LpTable {
    double h = 0.0;
    std::vector<int> ps;
    std::vector<double> Rs;
    std::vector<std::vector<double>> value;  // value[p][R]
    std::vector<std::size_t> points;         // lattice points in B(R)
    double sup_abs = 0.0;                    // max |sigma-hat| over B(max R)

    double slope(std::size_t p_index) const {
        std::vector<double> x, y;
        for (std::size_t r = 0; r < Rs.size(); ++r) {
            x.push_back(std::log(Rs[r]));
            y.push_back(std::log(value[p_index][r]));
        }
        return fit_slope(x, y);
    }
};

/// Riemann sums h^d sum |sigma-hat|^p over h Z^d cap B(R) for several p and R
/// in one pass over B(max R).
template <class W>
LpTable lp_ball_averages(const BasicDeltaMeasure<W>& sigma, std::vector<int> ps, std::vector<double> Rs, double h) {
    check_frequency_spacing(sigma, h);
    if (ps.empty() || Rs.empty()) throw validation_error("lp_ball_averages: empty p or R list");
    for (int p : ps)
        if (p < 2 || p % 2 != 0) throw validation_error("lp_ball_averages: p must be an even integer >= 2");
    std::sort(Rs.begin(), Rs.end());
    for (double R : Rs)
        if (!(R >= 1.0)) throw validation_error("lp_ball_averages: R must be >= 1");
    const auto at = detail::spectral_atoms(sigma);
    const std::size_t np = ps.size(), nr = Rs.size();
    std::vector<double> lim2(nr);
    for (std::size_t r = 0; r < nr; ++r) lim2[r] = (Rs[r] / h) * (Rs[r] / h) * (1 + 1e-12);

    struct Acc {
        std::vector<double> s;  // np * nr partial sums by innermost radius bucket
        std::vector<std::size_t> n;
        double sup = 0.0;
    };
    auto parts = detail::over_ball<Acc>(at, h, Rs.back(), [&](const detail::Segment& seg, const std::vector<cplx>& v) {
        Acc a;
        a.s.assign(np * nr, 0.0);
        a.n.assign(nr, 0);
        for (std::int64_t t = 0; t < seg.len; ++t) {
            const std::int64_t b = seg.b0 + t;
            const double r2 = static_cast<double>(seg.a * seg.a + b * b);
            const auto bucket = static_cast<std::size_t>(std::lower_bound(lim2.begin(), lim2.end(), r2) - lim2.begin());
            if (bucket >= nr) continue;
            ++a.n[bucket];
            a.sup = std::max(a.sup, std::abs(v[t]));
            for (std::size_t q = 0; q < np; ++q) a.s[q * nr + bucket] += abs_pow(v[t], ps[q]);
        }
        return a;
    });
    LpTable tab;
    tab.h = h;
    tab.ps = ps;
    tab.Rs = Rs;
    tab.value.assign(np, std::vector<double>(nr, 0.0));
    tab.points.assign(nr, 0);
    const double cell = sigma.dim() == 1 ? h : h * h;
    std::vector<double> col(parts.size());
    for (std::size_t q = 0; q < np; ++q) {
        double run = 0.0;
        for (std::size_t r = 0; r < nr; ++r) {
            for (std::size_t k = 0; k < parts.size(); ++k) col[k] = parts[k].s[q * nr + r];
            run += pairwise_sum(col.data(), col.size());
            tab.value[q][r] = run * cell;
        }
    }
    std::size_t run = 0;
    for (std::size_t r = 0; r < nr; ++r) {
        for (const auto& p : parts) run += p.n[r];
        tab.points[r] = run;
    }
    for (const auto& p : parts) tab.sup_abs = std::max(tab.sup_abs, p.sup);
    return tab;
}

struct LpResult {
    double value = 0.0;
    double h = 0.0;
    std::size_t points = 0;
};

template <class W>
LpResult lp_ball_average(const BasicDeltaMeasure<W>& sigma, int p, double R, double h = 0.0) {
    if (h <= 0.0) h = default_frequency_spacing(sigma.diameter());
    auto t = lp_ball_averages(sigma, {p}, {R}, h);
    return {t.value[0][0], h, t.points[0]};
}

/// delta * integral over one period [0, 1/delta) of |nu-hat|^2, sampled at
/// M >= 4 (span + 1) equispaced points (exact for the trigonometric
/// polynomial |nu-hat|^2 up to rounding).
template <class W>
double parseval_integral(const BasicDeltaMeasure<W>& nu, fourier_backend backend = fourier_backend::dense) {
    if (nu.dim() != 1) throw validation_error("parseval_integral: measure must be one-dimensional");
    auto [lo, hi] = nu.index_bounds();
    const std::int64_t span = hi[0] - lo[0];
    std::int64_t M = 1;
    while (M < 4 * (span + 1)) M *= 2;
    const double h = 1.0 / (nu.scale().delta() * static_cast<double>(M));
    // The samples over [-M/2, M/2] cover a full period plus one repeated endpoint.
    const double R = h * static_cast<double>(M / 2);
    std::vector<double> mags;
    if (backend == fourier_backend::dense) {
        // Call the dense path directly; the h <= 1/(4 diam) check is irrelevant for a full period.
        const auto at = detail::spectral_atoms(nu);
        auto buf = fft::allocate<cplx>(static_cast<std::size_t>(M));
        std::fill(buf.get(), buf.get() + M, cplx{});
        for (std::size_t k = 0; k < at.index.size(); ++k)
            buf[static_cast<std::size_t>(((at.index[k][0] % M) + M) % M)] += at.weight[k];
        fft::dft_inplace(buf.get(), static_cast<int>(M), 1, FFTW_FORWARD);
        for (std::int64_t k = 0; k < M; ++k) mags.push_back(std::norm(buf[static_cast<std::size_t>(k)]));
    } else {
        const auto at = detail::spectral_atoms(nu);
        auto parts = detail::over_ball<std::vector<double>>(at, h, R, [&](const detail::Segment& s,
                                                                          const std::vector<cplx>& v) {
            std::vector<double> out;
            for (std::int64_t t = 0; t < s.len; ++t)
                if (s.b0 + t < M / 2) out.push_back(std::norm(v[t]));
            return out;
        });
        for (auto& p : parts) mags.insert(mags.end(), p.begin(), p.end());
    }
    return pairwise_sum(mags.data(), mags.size()) / static_cast<double>(M);
}

// ---------------------------------------------------------------------------
// Riesz energies.

enum class energy_method { kernel, mollified, fourier };

inline const char* to_string(energy_method m) {
    switch (m) {
        case energy_method::kernel: return "kernel";
        case energy_method::mollified: return "mollified";
        case energy_method::fourier: return "fourier";
    }
    return "?";
}

struct EnergyOptions {
    std::size_t mollified_atom_limit = 200;
    std::size_t mollified_cell_budget = std::size_t{1} << 22;
    std::size_t fourier_point_budget = std::size_t{1} << 26;
    double h = 0.0;  // fourier method spacing; 0 picks the default
};

namespace detail {

// sum_{z, z'} w w' max(|z - z'|, reg)^{-alpha}, positions in lattice units.
inline double kernel_energy(const SpectralAtoms& at, double alpha, double reg_units, double lattice) {
    const std::size_t n = at.index.size();
    const double reg2 = reg_units * reg_units;
    const double e = -0.5 * alpha;
    const double diag_k = std::pow(reg2, e);
    const double off = tiled_sum(n, 64, [&](std::size_t i) {
        const Index zi = at.index[i];
        double s = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = static_cast<double>(at.index[j][0] - zi[0]);
            const double dy = static_cast<double>(at.index[j][1] - zi[1]);
            const double d2 = dx * dx + dy * dy;
            s += at.weight[j] * (d2 > reg2 ? std::pow(d2, e) : diag_k);
        }
        return at.weight[i] * s;
    });
    double diag = 0.0;
    for (double w : at.weight) diag += w * w;
    return (diag * diag_k + 2.0 * off) * std::pow(lattice, -alpha);
}

// Integral of |x - y|^{-alpha} over (cell x cell) for the unit cell.
inline double cell_self_integral(int dim, double alpha) {
    if (dim == 1) return 2.0 / ((1.0 - alpha) * (2.0 - alpha));
    const int n = 1 << 12;
    const double hq = 0.5 * std::numbers::pi / n;
    double s = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double th = k * hq;
        const double c = std::cos(th), sn = std::sin(th);
        const double rho = 1.0 / std::max(c, sn);
        const double v = std::pow(rho, 2 - alpha) / (2 - alpha) - (c + sn) * std::pow(rho, 3 - alpha) / (3 - alpha) +
                         c * sn * std::pow(rho, 4 - alpha) / (4 - alpha);
        const double wgt = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        s += wgt * v;
    }
    return 4.0 * s * hq / 3.0;
}

}  // namespace detail

template <class W>
double riesz_energy(const BasicDeltaMeasure<W>& mu, double alpha, double reg, energy_method method = energy_method::kernel,
                    const EnergyOptions& opt = {}) {
    const int d = mu.dim();
    if (!(alpha > 0.0 && alpha < d)) throw validation_error("riesz_energy: alpha must lie in (0, d)");
    if (!(reg > 0.0)) throw validation_error("riesz_energy: regularization scale must be positive");
    const auto at = detail::spectral_atoms(mu);
    const double lattice = mu.scale().delta();

    if (method == energy_method::kernel) return detail::kernel_energy(at, alpha, reg / lattice, lattice);

    if (method == energy_method::mollified) {
        if (at.index.size() > opt.mollified_atom_limit)
            throw budget_error("mollified energy refused: more than " + std::to_string(opt.mollified_atom_limit) +
                               " atoms");
        const double g = reg / 4.0;
        const auto& psi = Mollifier::get(d);
        auto [lo, hi] = mu.index_bounds();
        Point origin{lo[0] * lattice - reg - g, d == 2 ? lo[1] * lattice - reg - g : 0.0};
        const auto n0 = static_cast<int>(std::ceil(((hi[0] - lo[0]) * lattice + 2 * (reg + g)) / g)) + 1;
        const int n1 = d == 2 ? static_cast<int>(std::ceil(((hi[1] - lo[1]) * lattice + 2 * (reg + g)) / g)) + 1 : 1;
        const double cells = static_cast<double>(n0) * n1;
        if (cells * 4 > static_cast<double>(opt.mollified_cell_budget))
            throw budget_error("mollified energy refused: sample grid exceeds budget");
        // The profile drops over a tenth of reg while the grid step is reg / 4,
        // so each atom's samples are rescaled to carry exactly its weight.
        const double cellv = d == 1 ? g : g * g;
        std::vector<double> scale(at.index.size());
        for (std::size_t k = 0; k < at.index.size(); ++k) {
            const double px = at.index[k][0] * lattice - origin[0], py = d == 2 ? at.index[k][1] * lattice - origin[1] : 0.0;
            const int a0 = static_cast<int>(std::ceil((px - reg) / g)), a1 = static_cast<int>(std::floor((px + reg) / g));
            const int b0 = d == 2 ? static_cast<int>(std::ceil((py - reg) / g)) : 0;
            const int b1 = d == 2 ? static_cast<int>(std::floor((py + reg) / g)) : 0;
            double mass = 0.0;
            for (int a = a0; a <= a1; ++a)
                for (int b = b0; b <= b1; ++b) {
                    const double rho = std::hypot(a * g - px, d == 2 ? b * g - py : 0.0);
                    if (rho < reg) mass += psi.scaled(rho, reg) * cellv;
                }
            scale[k] = mass > 0.0 ? 1.0 / mass : 0.0;
        }
        std::vector<double> f(static_cast<std::size_t>(n0) * n1, 0.0);
        for (int a = 0; a < n0; ++a)
            for (int b = 0; b < n1; ++b) {
                const Point x{origin[0] + a * g, origin[1] + b * g};
                double v = 0.0;
                for (std::size_t k = 0; k < at.index.size(); ++k) {
                    const double dx = x[0] - at.index[k][0] * lattice;
                    const double dy = d == 2 ? x[1] - at.index[k][1] * lattice : 0.0;
                    const double rho = std::hypot(dx, dy);
                    if (rho < reg) v += at.weight[k] * scale[k] * psi.scaled(rho, reg);
                }
                f[static_cast<std::size_t>(a) * n1 + b] = v;
            }
        // Autocorrelation by FFT, then sum over lattice offsets.
        std::vector<double> rev(f.rbegin(), f.rend());
        auto ac = fft::linear_convolve(f, n0, n1, rev, n0, n1);
        const int m1 = 2 * n1 - 1;
        double s = 0.0, diag = 0.0;
        for (int u = 0; u < 2 * n0 - 1; ++u)
            for (int v = 0; v < m1; ++v) {
                const double val = ac[static_cast<std::size_t>(u) * m1 + v];
                const int du = u - (n0 - 1), dv = v - (n1 - 1);
                if (du == 0 && dv == 0) {
                    diag = val;
                    continue;
                }
                s += val * std::pow(std::hypot(du * g, dv * g), -alpha);
            }
        return s * cellv * cellv + diag * std::pow(g, 2 * d - alpha) * detail::cell_self_integral(d, alpha);
    }

    // Fourier weighted: integral over B(1/reg) of |mu-hat|^2 |xi|^{alpha - d}.
    double h = opt.h > 0 ? opt.h : default_frequency_spacing(mu.diameter());
    check_frequency_spacing(mu, h);
    const double R = 1.0 / reg;
    const double pts = d == 1 ? 2 * R / h : std::numbers::pi * (R / h) * (R / h);
    if (pts > static_cast<double>(opt.fourier_point_budget))
        throw budget_error("fourier energy: frequency lattice exceeds budget");
    auto parts = detail::over_ball<double>(at, h, R, [&](const detail::Segment& s, const std::vector<cplx>& v) {
        double acc = 0.0;
        for (std::int64_t t = 0; t < s.len; ++t) {
            const std::int64_t b = s.b0 + t;
            const double r = h * std::sqrt(static_cast<double>(s.a * s.a + b * b));
            if (r == 0.0) continue;
            acc += std::norm(v[t]) * std::pow(r, alpha - d);
        }
        return acc;
    });
    const double cell = d == 1 ? h : h * h;
    double mass = 0.0;
    for (double w : at.weight) mass += w;
    // Origin cell: integral of |xi|^{alpha - d} over the equal-volume ball.
    const double rho = d == 1 ? 0.5 * h : h / std::sqrt(std::numbers::pi);
    const double origin = mass * mass * (d == 1 ? 2.0 : 2.0 * std::numbers::pi) * std::pow(rho, alpha) / alpha;
    return pairwise_sum(parts.data(), parts.size()) * cell + origin;
}

// ---------------------------------------------------------------------------
// J_r(k) = || (mu * sigma)^{2^k} * psi_r ||_2.

struct JSequence {
    double r = 0.0;
    double grid = 0.0;  // sampling spacing of the mollified densities
    std::vector<double> J;
    bool nonincreasing = true;
};

template <class W>
JSequence j_sequence(const BasicDeltaMeasure<W>& mu, const BasicDeltaMeasure<W>& sigma, double r, int k_max,
                     std::size_t budget = default_lattice_budget) {
    if (!(r > 0.0)) throw validation_error("j_sequence: r must be positive");
    if (k_max < 0) throw validation_error("j_sequence: k_max must be >= 0");
    const DeltaMeasure nu = to_double_measure(convolve(mu, sigma));
    const int d = nu.dim();
    const int m = nu.scale().log2_inverse();
    int mg = m;
    while (std::ldexp(1.0, -mg) > r / 4.0) ++mg;
    const double g = std::ldexp(1.0, -mg);
    const std::int64_t stride = std::int64_t{1} << (mg - m);
    const auto K = static_cast<int>(std::floor(r / g));
    const auto& psi = Mollifier::get(d);
    const int kw = 2 * K + 1;
    std::vector<double> ker(static_cast<std::size_t>(kw) * (d == 2 ? kw : 1));
    for (int a = 0; a < kw; ++a)
        for (int b = 0; b < (d == 2 ? kw : 1); ++b) {
            const double rho = std::hypot((a - K) * g, d == 2 ? (b - K) * g : 0.0);
            ker[static_cast<std::size_t>(a) * (d == 2 ? kw : 1) + b] = psi.scaled(rho, r);
        }
    {
        // unit mass on the grid, as for the mollified energy
        const double kmass = pairwise_sum(ker.data(), ker.size()) * (d == 1 ? g : g * g);
        for (auto& v : ker) v /= kmass;
    }

    JSequence out;
    out.r = r;
    out.grid = g;
    DeltaMeasure power = nu;
    for (int k = 0; k <= k_max; ++k) {
        if (k > 0) power = convolve(power, power, convolution_backend::automatic, budget);
        auto [lo, hi] = power.index_bounds();
        const std::int64_t a0 = (hi[0] - lo[0]) * stride + 1;
        const std::int64_t a1 = d == 2 ? (hi[1] - lo[1]) * stride + 1 : 1;
        const double cells = static_cast<double>(a0 + kw - 1) * static_cast<double>(a1 + (d == 2 ? kw : 1) - 1);
        if (cells > static_cast<double>(budget)) throw budget_error("j_sequence: mollified grid exceeds budget");
        std::vector<double> grid(static_cast<std::size_t>(a0 * a1), 0.0);
        for (const auto& at : power.atoms())
            grid[static_cast<std::size_t>((at.index[0] - lo[0]) * stride * a1 + (at.index[1] - lo[1]) * stride)] =
                at.weight;
        auto pi = fft::linear_convolve(grid, static_cast<int>(a0), static_cast<int>(a1), ker, kw, d == 2 ? kw : 1);
        std::vector<double> sq(pi.size());
        for (std::size_t i = 0; i < pi.size(); ++i) sq[i] = pi[i] * pi[i];
        const double cell = d == 1 ? g : g * g;
        out.J.push_back(std::sqrt(pairwise_sum(sq.data(), sq.size()) * cell));
    }
    for (std::size_t k = 1; k < out.J.size(); ++k)
        if (out.J[k] > out.J[k - 1] * (1 + 1e-9)) out.nonincreasing = false;
    return out;
}

// ---------------------------------------------------------------------------
// Flattening table: k -> I_t^delta(sigma^k) and kappa = log I / log(1/delta).

struct EnergyRow {
    double alpha = 0.0;
    double delta = 0.0;
    int k = 1;
    energy_method method = energy_method::kernel;
    double value = 0.0;
    double kappa = 0.0;
    std::size_t atoms = 0;
};

struct EnergyProfile {
    std::vector<EnergyRow> rows;
    bool kappa_nonincreasing = true;  // in k, for every delta
    bool kappa_decreasing = true;     // strictly
    std::vector<std::pair<int, double>> fitted_kappa;  // per k, slope of log I in log(1/delta) (needs >= 2 deltas)
};

template <class W>
EnergyProfile flattening_iteration(const BasicDeltaMeasure<W>& sigma, double t, const std::vector<Scale>& deltas,
                                   std::vector<int> ks, std::size_t budget = default_lattice_budget) {
    if (sigma.dim() != 2) throw validation_error("flattening_iteration: sigma must be planar");
    if (!(t > 0.0 && t < 2.0)) throw validation_error("flattening_iteration: t must lie in (0, 2)");
    if (deltas.empty() || ks.empty()) throw validation_error("flattening_iteration: empty delta or k list");
    std::sort(ks.begin(), ks.end());
    for (int k : ks)
        if (k < 1) throw validation_error("flattening_iteration: k must be >= 1");
    const double mass = to_double(sigma.total_mass());
    if (std::abs(mass - 1.0) > 1e-9) throw validation_error("flattening_iteration: sigma must be a probability measure");
    for (const auto& a : sigma.atoms()) {
        const Point p = sigma.position(a.index);
        if (std::abs(p[0]) > 2 || std::abs(p[1]) > 2)
            throw validation_error("flattening_iteration: support must lie in [-2, 2]^2");
    }
    EnergyProfile prof;
    std::vector<DeltaMeasure> powers;
    for (int k : ks) powers.push_back(to_double_measure(self_convolution_power(sigma, k, budget)));
    for (const auto& dl : deltas) {
        double prev = std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < ks.size(); ++q) {
            EnergyRow row;
            row.alpha = t;
            row.delta = dl.delta();
            row.k = ks[q];
            row.value = riesz_energy(powers[q], t, dl.delta(), energy_method::kernel);
            row.kappa = std::log(row.value) / std::log(1.0 / dl.delta());
            row.atoms = powers[q].size();
            if (row.kappa > prev) prof.kappa_nonincreasing = false;
            if (!(row.kappa < prev)) prof.kappa_decreasing = false;
            prev = row.kappa;
            prof.rows.push_back(row);
        }
    }
    if (deltas.size() >= 2) {
        for (std::size_t q = 0; q < ks.size(); ++q) {
            std::vector<double> x, y;
            for (const auto& r : prof.rows)
                if (r.k == ks[q]) {
                    x.push_back(std::log(1.0 / r.delta));
                    y.push_back(std::log(r.value));
                }
            prof.fitted_kappa.emplace_back(ks[q], fit_slope(x, y));
        }
    }
    return prof;
}

// ---------------------------------------------------------------------------
// Fourier / energy bridge.

struct BridgeReport {
    int p = 2;
    double R = 1.0;
    double u = 1.0;
    double lhs = 0.0;
    double energy = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
};

/// lhs = ||sigma-hat||_{L^p(B(R))}^p, rhs = R^{2-u} I_u^{1/R}(sigma^{p/2}) (kernel method).
template <class W>
std::vector<BridgeReport> fourier_energy_bridge(const BasicDeltaMeasure<W>& sigma, int p, const std::vector<double>& Rs,
                                                double u, double h = 0.0) {
    if (p < 2 || p % 2) throw validation_error("bridge: p must be even");
    if (!(u > 0.0 && u < sigma.dim())) throw validation_error("bridge: u must lie in (0, d)");
    if (h <= 0.0) h = default_frequency_spacing(sigma.diameter());
    auto tab = lp_ball_averages(sigma, {p}, Rs, h);
    const DeltaMeasure power = to_double_measure(self_convolution_power(sigma, p / 2));
    std::vector<BridgeReport> out;
    for (std::size_t r = 0; r < tab.Rs.size(); ++r) {
        BridgeReport b;
        b.p = p;
        b.R = tab.Rs[r];
        b.u = u;
        b.lhs = tab.value[0][r];
        b.energy = riesz_energy(power, u, 1.0 / b.R, energy_method::kernel);
        b.rhs = std::pow(b.R, 2.0 - u) * b.energy;
        b.ratio = b.lhs / b.rhs;
        out.push_back(b);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Band-limited flattening.

struct hypothesis_rejected : validation_error {
    using validation_error::validation_error;
};

struct BandLimitedReport {
    int p = 4;
    double R = 0.0;
    double epsilon = 0.0;
    double f_l2 = 0.0;
    double f_l1 = 0.0;
    double spread = 0.0;       // ||f||_2 / ||f||_1
    double lhs = 0.0;          // integral |f-hat|^2 |sigma-hat|^2 = ||f * sigma||_2^2
    double holder_f = 0.0;     // (integral |f-hat|^{2q'})^{1/q'}
    double holder_sigma = 0.0; // ||sigma-hat||_{L^p(B(R))}^2
    double rhs = 0.0;
    bool chain_ok = false;
    double ratio = 0.0;  // ||f * sigma||_2 / ||f||_2
    double kappa = 0.0;
};

/// f is given by its spectrum on the lattice of f_hat (spacing h, radius R).
/// ||f||_1 is computed over one period 1/h of the sampled f.
template <class W>
BandLimitedReport band_limited_flattening(const FourierField& f_hat, const BasicDeltaMeasure<W>& sigma, double epsilon,
                                          int p = 4, std::size_t budget = default_lattice_budget) {
    if (f_hat.dim != sigma.dim()) throw validation_error("band_limited: dimension mismatch");
    if (p <= 2 || p % 2) throw validation_error("band_limited: p must be an even integer > 2");
    if (!(epsilon > 0.0)) throw validation_error("band_limited: epsilon must be positive");
    const int d = f_hat.dim;
    const double h = f_hat.h, R = f_hat.R;
    const double cell = d == 1 ? h : h * h;
    BandLimitedReport rep;
    rep.p = p;
    rep.R = R;
    rep.epsilon = epsilon;

    double l2 = 0.0;
    f_hat.for_each([&](std::int64_t, std::int64_t, cplx v) { l2 += std::norm(v); });
    rep.f_l2 = std::sqrt(l2 * cell);
    if (!(rep.f_l2 > 0.0)) throw validation_error("band_limited: f is zero");

    std::int64_t M = 1;
    while (M < 2 * (2 * f_hat.A + 1)) M *= 2;
    const std::size_t cells = d == 1 ? static_cast<std::size_t>(M) : static_cast<std::size_t>(M * M);
    if (cells > budget) throw budget_error("band_limited: inverse transform grid exceeds budget");
    auto buf = fft::allocate<cplx>(cells);
    std::fill(buf.get(), buf.get() + cells, cplx{});
    auto wrap = [M](std::int64_t i) { return static_cast<std::size_t>(((i % M) + M) % M); };
    f_hat.for_each([&](std::int64_t a, std::int64_t b, cplx v) {
        buf[d == 1 ? wrap(a) : wrap(a) * static_cast<std::size_t>(M) + wrap(b)] += v;
    });
    fft::dft_inplace(buf.get(), static_cast<int>(M), d == 1 ? 1 : static_cast<int>(M), FFTW_BACKWARD);
    std::vector<double> mags(cells);
    for (std::size_t i = 0; i < cells; ++i) mags[i] = std::abs(buf[i]) * cell;
    const double dx = (1.0 / h) / static_cast<double>(M);
    rep.f_l1 = pairwise_sum(mags.data(), cells) * (d == 1 ? dx : dx * dx);
    rep.spread = rep.f_l2 / rep.f_l1;
    if (rep.f_l2 < std::pow(R, epsilon) * rep.f_l1)
        throw hypothesis_rejected("band_limited: spreading hypothesis ||f||_2 >= R^eps ||f||_1 fails (ratio " +
                                  format_double(rep.spread) + " < R^eps = " + format_double(std::pow(R, epsilon)) + ")");

    auto sh = fourier_eval(sigma, h, R, fourier_backend::direct, std::max(budget, f_hat.values.size()));
    const double qp = static_cast<double>(p) / (p - 2);
    double lhs = 0.0, fq = 0.0, sp = 0.0;
    f_hat.for_each([&](std::int64_t a, std::int64_t b, cplx v) {
        const cplx s = sh.at(a, b);
        lhs += std::norm(v) * std::norm(s);
        fq += std::pow(std::norm(v), qp);
        sp += abs_pow(s, p);
    });
    rep.lhs = lhs * cell;
    rep.holder_f = std::pow(fq * cell, 1.0 / qp);
    rep.holder_sigma = std::pow(sp * cell, 2.0 / p);
    rep.rhs = rep.holder_f * rep.holder_sigma;
    rep.chain_ok = rep.lhs <= rep.rhs * (1 + 1e-9);
    rep.ratio = std::sqrt(rep.lhs) / rep.f_l2;
    rep.kappa = -std::log(rep.ratio) / std::log(R);
    return rep;
}

}  // namespace flatlab
