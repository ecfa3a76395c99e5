#pragma once

// Strictly convex C^2 graphs y = phi(x): sampled derivative certificates,
// the flatness constant c, tangent frames with their delta x Delta
// rectangles, and the greedy c*Delta ball cover of a lifted support.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flatlab/core.hpp"
#include "flatlab/grid.hpp"
#include "flatlab/measure.hpp"

namespace flatlab {

inline constexpr int curve_certificate_samples = 1 << 12;
inline constexpr int curve_consistency_samples = 1 << 10;

class CurveSpec {
public:
    using Fn = std::function<double(double)>;

    // modulus: declared Lipschitz constant of phi'' on [-2, 2]; it widens the
    // sampled bounds by modulus * spacing.
    CurveSpec(std::string name, Fn phi, Fn dphi, Fn d2phi, double modulus)
        : name_(std::move(name)), phi_(std::move(phi)), dphi_(std::move(dphi)), d2phi_(std::move(d2phi)),
          modulus_(modulus) {
        if (!phi_ || !dphi_ || !d2phi_) throw validation_error("curve '" + name_ + "': missing evaluator");
        if (!(modulus_ >= 0.0) || !std::isfinite(modulus_))
            throw validation_error("curve '" + name_ + "': modulus must be finite and >= 0");
        certify();
    }

    const std::string& name() const noexcept { return name_; }
    double value(double x) const {
        if (!(x >= -2.0 && x <= 2.0)) throw validation_error("curve evaluated outside [-2, 2]");
        return phi_(x);
    }
    double slope(double x) const { return dphi_(x); }
    double curvature_term(double x) const { return d2phi_(x); }
    double modulus() const noexcept { return modulus_; }

    /// Certified lower bound for phi'' on [-2, 2].
    double convexity_margin() const noexcept { return margin_; }
    /// Certified upper bound for |phi''| on [-2, 2].
    double second_derivative_sup() const noexcept { return sup_; }
    /// max |phi'| over [-1, 1] (sampled; phi' is monotone so the endpoints decide).
    double max_slope() const { return std::max(std::abs(dphi_(-1.0)), std::abs(dphi_(1.0))); }

private:
    void certify() {
        const double h = 4.0 / curve_certificate_samples;
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (int k = 0; k <= curve_certificate_samples; ++k) {
            const double v = d2phi_(-2.0 + k * h);
            if (!std::isfinite(v)) throw validation_error("curve '" + name_ + "': phi'' not finite");
            lo = std::min(lo, v);
            hi = std::max(hi, std::abs(v));
        }
        margin_ = lo - modulus_ * h;
        sup_ = hi + modulus_ * h;
        if (!(margin_ > 0.0))
            throw validation_error("curve '" + name_ + "': convexity certificate failed (phi'' lower bound " +
                                   std::to_string(margin_) + ")");
        // phi' against central differences of phi.
        const double s = 2.0 / curve_consistency_samples, fd = 1e-5;
        for (int k = 0; k <= curve_consistency_samples; ++k) {
            const double x = -1.0 + k * s;
            const double num = (phi_(x + fd) - phi_(x - fd)) / (2 * fd);
            const double d = dphi_(x);
            if (std::abs(num - d) > 1e-4 * std::max(1.0, std::abs(d)))
                throw validation_error("curve '" + name_ + "': phi' inconsistent with phi at x = " + std::to_string(x));
        }
    }

    std::string name_;
    Fn phi_, dphi_, d2phi_;
    double modulus_ = 0.0;
    double margin_ = 0.0;
    double sup_ = 0.0;
};

inline CurveSpec parabola() {
    return CurveSpec("parabola", [](double x) { return x * x; }, [](double x) { return 2 * x; },
                     [](double) { return 2.0; }, 0.0);
}

inline CurveSpec half_parabola() {
    return CurveSpec("halfparabola", [](double x) { return 0.5 * x * x; }, [](double x) { return x; },
                     [](double) { return 1.0; }, 0.0);
}

/// Piecewise polynomial: pieces[k] has coefficients c_0..c_n (phi = sum c_i x^i)
/// on [breaks[k], breaks[k+1]]. Breaks must cover [-2, 2] and the pieces must
/// join in C^2.
struct PiecewisePolynomial {
    std::vector<double> breaks;
    std::vector<std::vector<double>> pieces;

    void validate() const {
        if (pieces.empty() || breaks.size() != pieces.size() + 1)
            throw validation_error("piecewise polynomial: need len(breaks) = len(pieces) + 1");
        if (breaks.front() > -2.0 || breaks.back() < 2.0)
            throw validation_error("piecewise polynomial: breaks must cover [-2, 2]");
        for (std::size_t k = 0; k + 1 < breaks.size(); ++k)
            if (!(breaks[k] < breaks[k + 1])) throw validation_error("piecewise polynomial: breaks must increase");
        for (const auto& p : pieces)
            if (p.empty()) throw validation_error("piecewise polynomial: empty coefficient list");
        for (std::size_t k = 1; k < pieces.size(); ++k) {
            const double x = breaks[k];
            for (int d = 0; d <= 2; ++d) {
                const double a = eval_piece(pieces[k - 1], x, d), b = eval_piece(pieces[k], x, d);
                if (std::abs(a - b) > 1e-9 * std::max(1.0, std::abs(a)))
                    throw validation_error("piecewise polynomial: not C^2 at x = " + std::to_string(x));
            }
        }
    }

    static double eval_piece(const std::vector<double>& c, double x, int deriv) {
        double s = 0.0;
        for (std::size_t i = c.size(); i-- > static_cast<std::size_t>(deriv);) {
            double f = 1.0;
            for (int j = 0; j < deriv; ++j) f *= static_cast<double>(i - j);
            s = s * x + c[i] * f;
        }
        return s;
    }

    std::size_t piece_of(double x) const {
        auto it = std::upper_bound(breaks.begin() + 1, breaks.end() - 1, x);
        return static_cast<std::size_t>(it - (breaks.begin() + 1));
    }

    double eval(double x, int deriv) const { return eval_piece(pieces[piece_of(x)], x, deriv); }

    // Bound on |phi'''| over [-2, 2] from the coefficients.
    double third_derivative_bound() const {
        double best = 0.0;
        for (const auto& c : pieces) {
            double s = 0.0;
            for (std::size_t i = 3; i < c.size(); ++i)
                s += std::abs(c[i]) * static_cast<double>(i * (i - 1) * (i - 2)) * std::pow(2.0, double(i - 3));
            best = std::max(best, s);
        }
        return best;
    }
};

inline CurveSpec curve_from_polynomial(std::string name, PiecewisePolynomial pp, std::optional<double> modulus = {}) {
    pp.validate();
    const double mod = modulus.value_or(pp.third_derivative_bound());
    auto shared = std::make_shared<PiecewisePolynomial>(std::move(pp));
    return CurveSpec(
        std::move(name), [shared](double x) { return shared->eval(x, 0); },
        [shared](double x) { return shared->eval(x, 1); }, [shared](double x) { return shared->eval(x, 2); }, mod);
}

/// c = min(1, 1/sqrt(2M)): normal deviation (M/2)(c Delta)^2 <= delta/4 for Delta = sqrt(delta).
inline double flatness_constant(const CurveSpec& curve) {
    const double M = curve.second_derivative_sup();
    if (!(M > 0.0) || !std::isfinite(M)) throw validation_error("flatness_constant: uncertified curve");
    return std::min(1.0, 1.0 / std::sqrt(2.0 * M));
}

/// Default for the constant A = 10 / c.
inline double default_A(double c) { return 10.0 / c; }

struct TangentFrame {
    double anchor = 0.0;
    Point point{0.0, 0.0};
    Point tangent{1.0, 0.0};
    Point normal{0.0, 1.0};

    /// pi_theta: projection onto the normal line.
    Direction projection() const { return Direction::from_vector(normal[0], normal[1]); }

    double along(const Point& p) const { return (p[0] - point[0]) * tangent[0] + (p[1] - point[1]) * tangent[1]; }
    double across(const Point& p) const { return (p[0] - point[0]) * normal[0] + (p[1] - point[1]) * normal[1]; }

    // R(theta): |along| <= Delta, |across| <= delta / 2.
    bool in_rectangle(const Point& p, double delta, double Delta) const {
        return std::abs(along(p)) <= Delta && std::abs(across(p)) <= 0.5 * delta;
    }
};

inline TangentFrame tangent_projection(const CurveSpec& curve, double x_theta) {
    if (!(x_theta >= -1.0 && x_theta <= 1.0)) throw validation_error("tangent_projection: anchor outside [-1, 1]");
    TangentFrame f;
    f.anchor = x_theta;
    f.point = {x_theta, curve.value(x_theta)};
    const double s = curve.slope(x_theta);
    const double n = std::hypot(1.0, s);
    f.tangent = {1.0 / n, s / n};
    f.normal = {-s / n, 1.0 / n};
    return f;
}

struct ContainmentReport {
    bool ok = true;
    std::size_t checked = 0;
    double worst_normal = 0.0;  // max |across| / delta over checked points
    double worst_anchor = 0.0;
};

/// Samples curve points within c*Delta of each anchor and checks they lie in R(theta).
inline ContainmentReport verify_containment(const CurveSpec& curve, double c, const Scale& delta, int anchors = 64,
                                            int samples = 512) {
    const double d = delta.delta();
    const double Delta = std::sqrt(d);
    ContainmentReport rep;
    for (int a = 0; a < anchors; ++a) {
        const double x0 = anchors == 1 ? 0.0 : -1.0 + 2.0 * a / (anchors - 1);
        auto fr = tangent_projection(curve, x0);
        for (int k = 0; k <= samples; ++k) {
            const double x = x0 + c * Delta * (-1.0 + 2.0 * k / samples);
            if (x < -1.0 || x > 1.0) continue;
            const Point p{x, curve.value(x)};
            if (std::hypot(p[0] - fr.point[0], p[1] - fr.point[1]) > c * Delta) continue;
            ++rep.checked;
            const double nd = std::abs(fr.across(p)) / d;
            if (nd > rep.worst_normal) {
                rep.worst_normal = nd;
                rep.worst_anchor = x0;
            }
            if (!fr.in_rectangle(p, d, Delta)) rep.ok = false;
        }
    }
    return rep;
}

struct CoverBall {
    Point center;
    std::size_t atom = 0;
    double diam_in_support = 0.0;
};

struct CurveCover {
    double c = 0.0;
    double Delta = 0.0;
    double radius = 0.0;
    std::vector<CoverBall> balls;
    std::size_t max_overlap = 0;
    std::size_t overlap_violations = 0;   // atoms in more than 9 balls
    std::size_t diameter_violations = 0;  // balls with diam(theta cap spt) < c Delta / D
    std::size_t uncovered = 0;            // atoms in no ball
    // Smallest center distance among pairs closer than c Delta in x (infinity if none).
    double min_separation = std::numeric_limits<double>::infinity();
};

inline constexpr std::size_t cover_overlap_bound = 9;

template <class W>
CurveCover curve_cover(const BasicDeltaMeasure<W>& sigma, const Scale& Delta_scale, double D, double c) {
    if (sigma.dim() != 2) throw validation_error("curve_cover: measure must be planar");
    if (!(D > 1.0) || !(c > 0.0 && c <= 1.0)) throw validation_error("curve_cover: need D > 1 and c in (0, 1]");
    CurveCover cov;
    cov.c = c;
    cov.Delta = Delta_scale.delta();
    cov.radius = c * cov.Delta;
    const double sep = 0.5 * cov.radius;
    const auto atoms = sigma.atoms();
    std::vector<Point> pos(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) pos[i] = sigma.position(i);

    // Atoms are stored in ascending (x, y) order. Chosen centers also ascend
    // in x, so only those within sep in x need checking.
    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        bool far = true;
        for (std::size_t k = chosen.size(); k-- > 0;) {
            const Point& q = pos[chosen[k]];
            if (pos[i][0] - q[0] >= sep) break;
            if (std::hypot(pos[i][0] - q[0], pos[i][1] - q[1]) < sep) {
                far = false;
                break;
            }
        }
        if (far) chosen.push_back(i);
    }

    auto in_ball = [&](const Point& p, const Point& z) { return std::hypot(p[0] - z[0], p[1] - z[1]) <= cov.radius; };
    for (std::size_t k = 0; k < chosen.size(); ++k) {
        CoverBall b{pos[chosen[k]], chosen[k], 0.0};
        for (std::size_t j = k + 1; j < chosen.size(); ++j) {
            const Point& q = pos[chosen[j]];
            if (q[0] - b.center[0] >= 2 * sep) break;
            cov.min_separation = std::min(cov.min_separation, std::hypot(q[0] - b.center[0], q[1] - b.center[1]));
        }
        cov.balls.push_back(b);
    }

    // Overlap and per-ball support diameter; balls and atoms are both sorted by x.
    std::vector<std::size_t> count(atoms.size(), 0);
    for (auto& b : cov.balls) {
        std::vector<std::size_t> inside;
        auto first = std::lower_bound(pos.begin(), pos.end(), b.center[0] - cov.radius,
                                      [](const Point& p, double v) { return p[0] < v; });
        for (auto it = first; it != pos.end() && (*it)[0] <= b.center[0] + cov.radius; ++it) {
            auto i = static_cast<std::size_t>(it - pos.begin());
            if (in_ball(pos[i], b.center)) {
                ++count[i];
                inside.push_back(i);
            }
        }
        double dia = 0.0;
        for (std::size_t u = 0; u < inside.size(); ++u)
            for (std::size_t v = u + 1; v < inside.size(); ++v)
                dia = std::max(dia, std::hypot(pos[inside[u]][0] - pos[inside[v]][0],
                                               pos[inside[u]][1] - pos[inside[v]][1]));
        b.diam_in_support = dia;
        if (dia < cov.radius / D) ++cov.diameter_violations;
    }
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        cov.max_overlap = std::max(cov.max_overlap, count[i]);
        if (count[i] > cover_overlap_bound) ++cov.overlap_violations;
        if (count[i] == 0) ++cov.uncovered;
    }
    return cov;
}

}  // namespace flatlab
