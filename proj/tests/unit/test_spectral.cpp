#include <gtest/gtest.h>

#include <random>

#include "flatlab/curve.hpp"
#include "flatlab/spectral.hpp"

using namespace flatlab;

namespace {

DeltaMeasure random_measure(std::mt19937_64& rng, int m, int dim, std::size_t atoms, std::int64_t span) {
    std::vector<DeltaMeasure::Atom> v;
    double total = 0.0;
    for (std::size_t k = 0; k < atoms; ++k) {
        const double w = 1.0 + static_cast<double>(rng() % 100);
        v.push_back({{static_cast<std::int64_t>(rng() % span), dim == 2 ? static_cast<std::int64_t>(rng() % span) : 0}, w});
        total += w;
    }
    for (auto& a : v) a.weight /= total;
    return DeltaMeasure::from_atoms(Scale(m, dim), v);
}

DeltaMeasure lifted_cantor(int m) { return lift_to_curve(from_ifs(cantor4_spec(), Scale(m, 1)), parabola()); }

}  // namespace

TEST(Mollifier, UnitMassAndScaling) {
    for (int d : {1, 2}) {
        const auto& psi = Mollifier::get(d);
        EXPECT_NEAR(psi.radial_integral([&](double r) { return psi(r); }), 1.0, 1e-9);
        // psi_s has the same mass for any s
        const double s = 0.25;
        const double mass = psi.radial_integral([&](double r) { return psi.scaled(r * s, s) * std::pow(s, d); });
        EXPECT_NEAR(mass, 1.0, 1e-9);
        EXPECT_EQ(psi(1.0), 0.0);
    }
}

TEST(Fourier, AtomTransformIsOne) {
    auto a = atom_measure(Scale(6, 2));
    auto f = fourier_eval(a, 0.125, 4.0);
    f.for_each([](std::int64_t, std::int64_t, cplx v) { EXPECT_NEAR(std::abs(v - cplx{1.0, 0.0}), 0.0, 1e-12); });
    // h^2 #(hZ^2 cap B(R)) approximates pi R^2
    auto lp = lp_ball_average(a, 4, 4.0, 0.125);
    EXPECT_NEAR(lp.value / (std::numbers::pi * 16), 1.0, 0.02);
}

TEST(Fourier, ZeroFrequencyIsMassAndCancellation) {
    auto two = DeltaMeasure::from_atoms(Scale(6, 2), {{{0, 0}, 0.5}, {{32, 0}, 0.5}});
    auto f = fourier_eval(two, 0.125, 2.0);
    EXPECT_NEAR(f.at(0, 0).real(), 1.0, 1e-14);
    // xi = (1, 0): (1 + e^{-i pi}) / 2 = 0
    EXPECT_NEAR(std::abs(f.at(8, 0)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(f.at(0, 8)), 1.0, 1e-14);
}

TEST(Fourier, DenseAndDirectBackendsAgree) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 10; ++t) {
        const int dim = 1 + t % 2;
        auto mu = random_measure(rng, 6, dim, 5 + rng() % 30, 64);
        const double h = 0.125;
        auto a = fourier_eval(mu, h, 6.0, fourier_backend::direct);
        auto b = fourier_eval(mu, h, 6.0, fourier_backend::dense);
        double worst = 0.0;
        a.for_each([&](std::int64_t i, std::int64_t j, cplx v) { worst = std::max(worst, std::abs(v - b.at(i, j))); });
        EXPECT_LT(worst, 1e-8);
    }
}

TEST(Fourier, ParsevalOnRandomMeasures) {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 50; ++t) {
        auto nu = random_measure(rng, 7, 1, 1 + rng() % 60, 128);
        EXPECT_NEAR(parseval_integral(nu), l2sh_norm_sq(nu), 1e-6);
        EXPECT_NEAR(parseval_integral(nu, fourier_backend::direct), l2sh_norm_sq(nu), 1e-6);
    }
}

TEST(Fourier, SpacingChecked) {
    auto mu = lifted_cantor(6);
    EXPECT_THROW(fourier_eval(mu, 1.0, 4.0), validation_error);
}

TEST(Lp, MonotoneInRAndP) {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 6; ++t) {
        auto mu = random_measure(rng, 6, 1 + t % 2, 3 + rng() % 30, 64);
        const double h = default_frequency_spacing(mu.diameter());
        auto tab = lp_ball_averages(mu, {2, 4, 6}, {2.0, 4.0, 8.0, 16.0}, h);
        EXPECT_LE(tab.sup_abs, 1.0 + 1e-12);
        for (std::size_t p = 0; p < 3; ++p)
            for (std::size_t r = 1; r < 4; ++r) EXPECT_GE(tab.value[p][r], tab.value[p][r - 1]);
        for (std::size_t p = 1; p < 3; ++p)
            for (std::size_t r = 0; r < 4; ++r) EXPECT_LE(tab.value[p][r], tab.value[p - 1][r] * (1 + 1e-12));
    }
}

TEST(Energy, KernelExamples) {
    auto a = atom_measure(Scale(10, 1));
    const double delta = 1.0 / 1024;
    EXPECT_NEAR(riesz_energy(a, 0.5, delta) / std::pow(delta, -0.5), 1.0, 1e-12);
    // masses 1/2 at distance 1/4: diagonal 2 (1/4) delta^{-1/2}, cross 2 (1/4) 4^{1/2}
    auto two = DeltaMeasure::from_atoms(Scale(10, 1), {{{0, 0}, 0.5}, {{256, 0}, 0.5}});
    EXPECT_NEAR(riesz_energy(two, 0.5, delta), 0.5 * 32 + 0.5 * 2, 1e-9);
    // Lebesgue: I_{1/2} -> integral of |x - y|^{-1/2} over [0,1]^2 = 8/3
    EXPECT_NEAR(riesz_energy(lebesgue_unit(Scale(10, 1)), 0.5, delta) / (8.0 / 3.0), 1.0, 0.03);
    auto planar = atom_measure(Scale(4, 2));
    EXPECT_DOUBLE_EQ(riesz_energy(planar, 1.0, 1.0 / 16), 16.0);
    auto pair = DeltaMeasure::from_atoms(Scale(4, 2), {{{0, 0}, 0.5}, {{16, 0}, 0.5}});
    EXPECT_DOUBLE_EQ(riesz_energy(pair, 1.0, 1.0 / 16), 8.5);
}

TEST(Energy, MonotoneInAlpha) {
    std::mt19937_64 rng(19);
    for (int t = 0; t < 20; ++t) {
        const int dim = 1 + t % 2;
        auto mu = random_measure(rng, 7, dim, 2 + rng() % 40, 128);
        const double delta = mu.scale().delta();
        const double lo = 0.2 * dim, hi = 0.7 * dim;
        EXPECT_LE(riesz_energy(mu, hi, delta), riesz_energy(mu, lo, delta) * std::pow(delta, -(hi - lo)) * (1 + 1e-12));
        EXPECT_GE(riesz_energy(mu, hi, delta), riesz_energy(mu, lo, delta) * (1 - 1e-12));
    }
}

TEST(Energy, MollifiedWithinFactorFourOfKernel) {
    std::mt19937_64 rng(23);
    for (int t = 0; t < 8; ++t) {
        const int dim = 1 + t % 2;
        auto mu = random_measure(rng, 6, dim, 10 + rng() % 150, 64);
        ASSERT_LE(mu.size(), 200u);
        const std::vector<double> alphas = dim == 1 ? std::vector<double>{0.25, 0.5} : std::vector<double>{0.5, 1.0};
        for (double al : alphas) {
            const double delta = mu.scale().delta();
            const double r = riesz_energy(mu, al, delta) / riesz_energy(mu, al, delta, energy_method::mollified);
            EXPECT_GE(r, 0.25) << "dim " << dim << " alpha " << al;
            EXPECT_LE(r, 4.0) << "dim " << dim << " alpha " << al;
        }
    }
    auto big = lebesgue_unit(Scale(9, 1));
    EXPECT_THROW(riesz_energy(big, 0.5, 1.0 / 512, energy_method::mollified), budget_error);
}

TEST(Energy, MollifiedAtomSelfEnergy) {
    // delta^alpha I(psi_delta) for a lone atom, against Monte Carlo values of
    // the double integral of |x - y|^-alpha under the profile (3e6 pairs).
    // Above E = 4 no choice of input rescues the factor-4 comparison.
    struct Case {
        int dim;
        double alpha, E;
    };
    for (auto c : {Case{1, 0.5, 2.538}, Case{1, 0.75, 5.881}, Case{2, 1.0, 3.075}, Case{2, 1.5, 8.308}}) {
        auto a = atom_measure(Scale(6, c.dim));
        const double delta = 1.0 / 64;
        const double E = riesz_energy(a, c.alpha, delta, energy_method::mollified) * std::pow(delta, c.alpha);
        EXPECT_NEAR(E / c.E, 1.0, 0.2) << "dim " << c.dim << " alpha " << c.alpha;
    }
}

TEST(Energy, FourierTrendFollowsKernel) {
    // Above the dimension of the support the energy blows up as delta -> 0;
    // below it stays bounded. Both methods must agree on which is which.
    const double alpha = 0.7;
    std::vector<double> ck, cf, lk, lf;
    for (int m : {6, 8, 10}) {
        auto c = from_ifs(cantor4_spec(), Scale(m, 1));
        auto l = lebesgue_unit(Scale(m, 1));
        const double d = c.scale().delta();
        ck.push_back(riesz_energy(c, alpha, d));
        cf.push_back(riesz_energy(c, alpha, d, energy_method::fourier));
        lk.push_back(riesz_energy(l, alpha, d));
        lf.push_back(riesz_energy(l, alpha, d, energy_method::fourier));
    }
    for (std::size_t i = 1; i < 3; ++i) {
        EXPECT_GT(ck[i], 1.2 * ck[i - 1]);
        EXPECT_GT(cf[i], 1.2 * cf[i - 1]);
        EXPECT_LT(lk[i], 1.2 * lk[i - 1]);
        EXPECT_LT(lf[i], 1.2 * lf[i - 1]);
    }
}

TEST(JSequence, AtomGivesMollifierNorm) {
    for (int d : {1, 2}) {
        auto a = atom_measure(Scale(6, d));
        const double r = 1.0 / 16;
        auto js = j_sequence(a, a, r, 3);
        ASSERT_EQ(js.J.size(), 4u);
        for (double j : js.J) EXPECT_EQ(j, js.J[0]);
        const double ref = Mollifier::get(d).l2_norm() * std::pow(r, -d / 2.0);
        // r / 4 sampling of a profile whose edge is thinner than the step
        EXPECT_NEAR(js.J[0] / ref, 1.0, 0.08);
        EXPECT_TRUE(js.nonincreasing);
    }
}

TEST(JSequence, NonincreasingOnRandomPairs) {
    std::mt19937_64 rng(29);
    for (int t = 0; t < 20; ++t) {
        const int dim = 1 + t % 2;
        auto mu = random_measure(rng, 5, dim, 1 + rng() % 8, 32);
        auto sg = random_measure(rng, 5, dim, 1 + rng() % 8, 32);
        auto js = j_sequence(mu, sg, 1.0 / 8, dim == 1 ? 4 : 2);
        for (std::size_t k = 1; k < js.J.size(); ++k) EXPECT_LE(js.J[k], js.J[k - 1] * (1 + 1e-9));
        // Young: never more than the mollifier itself
        const double ref = Mollifier::get(dim).l2_norm() * std::pow(8.0, dim / 2.0);
        EXPECT_LE(js.J[0], ref * 1.01);
    }
}

TEST(Flattening, AtomIsFlat) {
    auto a = atom_measure(Scale(8, 2));
    auto prof = flattening_iteration(a, 1.5, {Scale(8, 2)}, {1, 2, 4});
    for (const auto& row : prof.rows) EXPECT_NEAR(row.value / std::pow(1.0 / 256, -1.5), 1.0, 1e-12);
}

TEST(Flattening, LiftedCantorKappaDecreases) {
    auto prof = flattening_iteration(lifted_cantor(8), 1.5, {Scale(8, 2)}, {1, 2});
    ASSERT_EQ(prof.rows.size(), 2u);
    EXPECT_TRUE(prof.kappa_decreasing);
    for (const auto& row : prof.rows) EXPECT_GE(row.kappa, 0.0);
    EXPECT_NEAR(prof.rows[0].kappa, 1.0286403968955089, 1e-9);
    EXPECT_NEAR(prof.rows[1].kappa, 0.72129884180373083, 1e-9);
    EXPECT_THROW(flattening_iteration(lifted_cantor(8), 2.0, {Scale(8, 2)}, {1}), validation_error);
}

TEST(Bridge, AtomAndFrozenCantor) {
    // atom: lhs = area of B(R), energy = R^u, so the ratio tends to pi
    auto a = atom_measure(Scale(8, 2));
    for (const auto& b : fourier_energy_bridge(a, 4, {8.0, 16.0}, 1.5, 0.125)) EXPECT_NEAR(b.ratio / std::numbers::pi, 1.0, 0.02);
    auto rep = fourier_energy_bridge(lifted_cantor(10), 4, {16.0, 32.0, 64.0}, 1.95);
    const double frozen[] = {0.63175368333625992, 0.60825656819214269, 0.58625331589901708};
    for (std::size_t i = 0; i < rep.size(); ++i) EXPECT_NEAR(rep[i].ratio, frozen[i], 1e-9);
}

TEST(BandLimited, SmoothSpectrumFlattens) {
    auto s = lifted_cantor(10);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double R : {16.0, 64.0}) {
        auto f = FourierField::zeros(2, 0.125, R);
        const double v0 = u(rng), v1 = u(rng);
        f.for_each([&](std::int64_t a, std::int64_t b, cplx) {
            const double x = a * f.h / R, y = b * f.h / R, q = 1 - x * x - y * y;
            f.at(a, b) = q * q * (1 + 0.5 * std::cos(2 * std::numbers::pi * f.h * (a * v0 + b * v1)));
        });
        auto rep = band_limited_flattening(f, s, 0.05);
        EXPECT_TRUE(rep.chain_ok);
        EXPECT_GT(rep.kappa, 0.0);
        EXPECT_LT(rep.ratio, 1.0);
    }
}

TEST(BandLimited, IndicatorPassesPointRejected) {
    auto s = lifted_cantor(8);
    auto g = FourierField::zeros(2, 0.125, 16.0);
    g.for_each([&](std::int64_t a, std::int64_t b, cplx) { g.at(a, b) = 1.0; });
    auto rep = band_limited_flattening(g, s, 0.05);
    EXPECT_TRUE(rep.chain_ok);
    EXPECT_LE(rep.lhs, rep.rhs);
    auto f = FourierField::zeros(2, 0.125, 16.0);
    f.at(3, 4) = 1.0;
    EXPECT_THROW(band_limited_flattening(f, s, 0.05), hypothesis_rejected);
}
