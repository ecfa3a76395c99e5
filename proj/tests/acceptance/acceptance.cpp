// One line per acceptance criterion; exits nonzero if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "flatlab/flatlab.hpp"

using namespace flatlab;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream note;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            note << " [failed: " << what << "]";
        }
    }
};

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

ExactDeltaMeasure random_exact(std::mt19937_64& rng, int m, std::size_t atoms, std::int64_t span) {
    std::vector<ExactDeltaMeasure::Atom> v;
    Rational total(0);
    for (std::size_t k = 0; k < atoms; ++k) {
        Rational w(static_cast<long long>(1 + rng() % 50));
        v.push_back({{static_cast<std::int64_t>(rng() % span), 0}, w});
        total += w;
    }
    for (auto& a : v) a.weight /= total;
    return ExactDeltaMeasure::from_atoms(Scale(m, 1), v);
}

DeltaMeasure lifted_cantor(int m) { return lift_to_curve(from_ifs(cantor4_spec(), Scale(m, 1)), parabola()); }

// ---------------------------------------------------------------------------

void exact_identities(Outcome& o) {
    bool l2 = true;
    for (int k = 0; k <= 10; ++k) {
        const std::int64_t n = std::int64_t{1} << k;
        l2 = l2 && l2sh_norm_sq(lattice_uniform<Rational>(Scale(11, 1), 0, n - 1)) == Rational(1) / Rational(n);
    }
    o.require(l2, "l2 of uniform-on-N");

    std::mt19937_64 rng(101);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        auto nu = random_measure(rng, 8, 1, 1 + rng() % 100, 256);
        const double a = parseval_integral(nu), b = l2sh_norm_sq(nu);
        worst = std::max(worst, std::abs(a - b) / b);
    }
    o.require(worst <= 1e-6, "Parseval");
    o.note << " parseval_rel_err=" << worst;

    const Scale s(3, 1);
    auto half = ExactDeltaMeasure::from_atoms(s, {{{0, 0}, Rational(1, 2)}, {{1, 0}, Rational(1, 2)}});
    auto c = convolve(half, half);
    o.require(c.size() == 3 && c.atoms()[0].weight == Rational(1, 4) && c.atoms()[1].weight == Rational(1, 2) &&
                  c.atoms()[2].weight == Rational(1, 4),
              "(1/4, 1/2, 1/4)");
    auto u = lattice_uniform<Rational>(s, 0, 2);
    auto tri = convolve(u, u);
    const int w[5] = {1, 2, 3, 2, 1};
    bool ok = tri.size() == 5;
    for (std::size_t i = 0; ok && i < 5; ++i) ok = tri.atoms()[i].weight == Rational(w[i], 9);
    o.require(ok, "triangular weights");
}

void lemma_suite(Outcome& o) {
    std::mt19937_64 rng(202);
    // l2 lower bound
    int l2_fail = 0;
    for (int t = 0; t < 200; ++t) {
        std::set<std::int64_t> supp;
        const std::size_t n = 1 + rng() % 30;
        while (supp.size() < n) supp.insert(static_cast<std::int64_t>(rng() % 128));
        std::vector<ExactDeltaMeasure::Atom> mv;
        for (auto x : supp) mv.push_back({{x, 0}, Rational(1, static_cast<long>(n))});
        auto mu = ExactDeltaMeasure::from_atoms(Scale(7, 1), mv);
        auto sigma = random_exact(rng, 7, 1 + rng() % 12, 128);
        std::vector<std::pair<Index, Index>> G;
        for (const auto& a : mu.atoms())
            for (const auto& b : sigma.atoms())
                if (rng() % 2) G.push_back({a.index, b.index});
        if (G.empty()) G.push_back({mu.atoms()[0].index, sigma.atoms()[0].index});
        if (!l2_lower_bound_check(mu, sigma, G).ok) ++l2_fail;
    }
    o.require(l2_fail == 0, std::to_string(l2_fail) + " l2 lower bound instances");

    // transversality: half tube intersections, half arbitrary random cell sets
    int tr_fail = 0;
    double tr_worst = 0.0;
    std::uniform_real_distribution<double> ang(0.0, std::numbers::pi), off(0.3, 0.7);
    const Scale ts(7, 2);
    const double d = ts.delta();
    for (int t = 0; t < 200; ++t) {
        Direction e1(ang(rng)), e2(ang(rng));
        while (projection_distance(e1, e2) < 4 * d) e2 = Direction(ang(rng));
        std::vector<Index> y;
        if (t % 2 == 0) {
            const double c1 = off(rng), c2 = off(rng);
            for (std::int64_t i = 0; i < 128; ++i)
                for (std::int64_t j = 0; j < 128; ++j) {
                    const Point p{(i + 0.5) * d, (j + 0.5) * d};
                    const double a = -p[0] * e1.unit()[1] + p[1] * e1.unit()[0];
                    const double b = -p[0] * e2.unit()[1] + p[1] * e2.unit()[0];
                    if (std::abs(a - c1) <= d && std::abs(b - c2) <= d) y.push_back({i, j});
                }
            if (y.empty()) y.push_back({64, 64});
        } else {
            const std::size_t n = 1 + rng() % 300;
            for (std::size_t k = 0; k < n; ++k) y.push_back({static_cast<std::int64_t>(rng() % 128), static_cast<std::int64_t>(rng() % 128)});
        }
        auto rep = transversality_check(CellSet(ts, y), e1, e2, 8.0);
        tr_worst = std::max(tr_worst, rep.ratio);
        if (!rep.bound_ok) ++tr_fail;
    }
    o.require(tr_fail == 0, std::to_string(tr_fail) + " transversality instances");
    o.note << " transversality_worst_ratio=" << tr_worst;

    // coarsening sandwich
    int co_fail = 0;
    for (int t = 0; t < 100; ++t) {
        const int T = 3 + static_cast<int>(rng() % 3);
        const int j = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(T - 2));
        auto rho = random_exact(rng, 8, 1 + rng() % 40, 256);
        auto c = coarsen(rho, Scale(8 - j, 1));
        const double fine = std::sqrt(to_double(l2sh_norm_sq(rho))), coarse = std::sqrt(to_double(l2sh_norm_sq(c)));
        if (!(fine <= coarse * (1 + 1e-15) && coarse <= std::pow(2.0, (T - 1) / 2.0) * fine * (1 + 1e-15))) ++co_fail;
    }
    o.require(co_fail == 0, std::to_string(co_fail) + " coarsening sandwiches");

    // Young monotonicity of J_r
    int j_fail = 0;
    for (int t = 0; t < 20; ++t) {
        const int dim = 1 + t % 2;
        auto mu = random_measure(rng, 5, dim, 1 + rng() % 8, 32);
        auto sg = random_measure(rng, 5, dim, 1 + rng() % 8, 32);
        if (!j_sequence(mu, sg, 1.0 / 8, dim == 1 ? 4 : 2).nonincreasing) ++j_fail;
    }
    o.require(j_fail == 0, std::to_string(j_fail) + " J sequences");
}

void perfectness(Outcome& o) {
    auto leb = lebesgue_unit(Scale(10, 1));
    PerfectnessQuery q;
    q.D = 2;
    q.window = Window::everything(1);
    const double lattice = scan_perfectness(leb, q).best_beta;
    // the 2/3 continuum value is a statement about r >> delta; at r = delta
    // the lattice itself gives 3/4
    q.r_min = 16.0 / 1024;
    const double beta = scan_perfectness(leb, q).best_beta;
    o.note << " lebesgue_beta(r>=16delta)=" << beta << " lebesgue_beta(r>=delta)=" << lattice;
    o.require(std::abs(beta - 2.0 / 3.0) <= 0.02, "Lebesgue beta within 0.02 of 2/3");

    auto cantor = from_ifs(cantor4_spec(), Scale(10, 1));
    PerfectnessQuery qc;
    qc.D = 16;
    qc.window = Window::everything(1);
    auto rep = scan_perfectness(cantor, qc);
    const double s = frostman_exponent(16, rep.best_beta);
    const double C = frostman_constant(16, s, rep.diam_support);
    auto fr = frostman_check(cantor, s, C, 16);
    o.note << " cantor_beta=" << rep.best_beta << " s=" << s;
    o.require(fr.ok, "Frostman chain for Cantor-4");
}

void energy(Outcome& o) {
    const double delta = 1.0 / 1024;
    const double I = riesz_energy(lebesgue_unit(Scale(10, 1)), 0.5, delta);
    o.note << " I_half(lebesgue)=" << I << " (8/3=" << 8.0 / 3.0 << ")";
    o.require(std::abs(I / (8.0 / 3.0) - 1.0) <= 0.03, "Lebesgue energy within 3% of 8/3");
    bool atoms = true;
    for (double alpha : {0.25, 0.5, 0.75}) atoms = atoms && riesz_energy(atom_measure(Scale(10, 1)), alpha, delta) == std::pow(delta, -alpha);
    for (double alpha : {0.5, 1.0, 1.5}) atoms = atoms && riesz_energy(atom_measure(Scale(10, 2)), alpha, delta) == std::pow(delta, -alpha);
    o.require(atoms, "atom energy = delta^-alpha");
}

void uniformizer(Outcome& o) {
    std::mt19937_64 rng(505);
    int bad = 0;
    for (int t = 0; t < 50; ++t) {
        std::vector<Index> v;
        for (int k = 0; k < 500; ++k) v.push_back({static_cast<std::int64_t>(rng() % 256), static_cast<std::int64_t>(rng() % 256)});
        CellSet P(Scale(8, 2), v);
        auto a = extract_uniform(P, 2, 4, 0.2);
        auto b = extract_uniform(P, 2, 4, 0.2);
        std::set<Index> seen(a.remainder.begin(), a.remainder.end());
        std::size_t total = a.remainder.size();
        bool ok = a.records.size() == b.records.size() && a.remainder == b.remainder;
        for (std::size_t i = 0; ok && i < a.records.size(); ++i) {
            const auto& r = a.records[i];
            auto vv = verify_uniform(r.cells, 2, 4);
            ok = vv.uniform && vv.branching == r.branching && r.cells == b.records[i].cells;
            for (const auto& c : r.cells) ok = ok && P.contains(c) && seen.insert(c).second;
            total += r.cells.size();
        }
        ok = ok && total == P.size() && seen.size() == P.size();
        if (!ok) ++bad;
    }
    o.require(bad == 0, std::to_string(bad) + " inputs");
}

void flattening_trend(Outcome& o) {
    auto sigma = lifted_cantor(10);
    auto prof = flattening_iteration(sigma, 1.5, {Scale(10, 2)}, {1, 2, 4});
    o.note << " kappa(k=1,2,4)=";
    for (const auto& r : prof.rows) o.note << r.kappa << (r.k == 4 ? "" : ",");
    o.require(prof.kappa_decreasing, "kappa strictly decreasing in k");

    const std::vector<double> Rs{16, 32, 64, 128, 256, 512};
    auto tab = lp_ball_averages(sigma, {2, 8}, Rs, default_frequency_spacing(sigma.diameter()));
    const double s2 = tab.slope(0), s8 = tab.slope(1);
    o.note << " slope_p2=" << s2 << " slope_p8=" << s8;
    o.require(s8 < s2, "p=8 slope below p=2 slope");

    auto atom = atom_measure(Scale(10, 2));
    auto at = lp_ball_averages(atom, {2, 8}, Rs, 0.125);
    const double a2 = at.slope(0), a8 = at.slope(1);
    auto ap = flattening_iteration(atom, 1.5, {Scale(10, 2)}, {1, 2, 4});
    o.note << " atom_slopes=" << a2 << "," << a8;
    o.require(std::abs(a2 / 2 - 1) <= 0.05 && std::abs(a8 / 2 - 1) <= 0.05, "atom slopes equal 2 within 5%");
    o.require(!ap.kappa_decreasing, "atom shows no flattening");
}

void bridge(Outcome& o) {
    auto rep = fourier_energy_bridge(lifted_cantor(10), 4, {16, 32, 64, 128, 256, 512}, 1.95);
    double lo = 1e300, hi = 0.0;
    o.note << " ratios=";
    for (const auto& b : rep) {
        lo = std::min(lo, b.ratio);
        hi = std::max(hi, b.ratio);
        o.note << b.ratio << (b.R == 512 ? "" : ",");
    }
    o.require(lo > 0.0 && hi <= 32.0, "ratio in (0, 32]");
}

void capture(Outcome& o) {
    std::vector<Scale> deltas;
    for (int m = 8; m <= 14; ++m) deltas.emplace_back(m, 2);
    auto tab = capture_counting_experiment(
        [](const Scale& s) {
            auto c = lifted_cantor(s.log2_inverse());
            return std::pair{c, c};
        },
        0.4, 0.05, 16, deltas);
    o.note << " captured=";
    for (const auto& r : tab.rows) o.note << r.captured << "/" << static_cast<long>(std::ceil(r.threshold)) << (r.delta == deltas.back().delta() ? "" : ",");
    o.require(tab.all_pass, "Cantor-4 rows");

    // atomic sigma: the hypothesis is flagged and the convolution adds no cells
    auto ctl = capture_counting_experiment(
        [](const Scale& s) { return std::pair{lifted_cantor(s.log2_inverse()), atom_measure(s, {0, 0})}; }, 0.4, 0.05,
        16, {Scale(8, 2), Scale(10, 2)});
    bool ok = true;
    for (const auto& r : ctl.rows) {
        auto mu = lifted_cantor(Scale(static_cast<int>(std::lround(std::log2(1 / r.delta))), 2).log2_inverse());
        ok = ok && !r.sigma_hypothesis && r.captured == minimal_capture_set(mu, std::pow(r.delta, 0.05)).size();
    }
    o.require(ok, "atomic control");
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
        {"exact identities", exact_identities}, {"lemma verification", lemma_suite},
        {"perfectness scanner", perfectness},   {"energy oracle", energy},
        {"uniformizer", uniformizer},           {"flattening trend", flattening_trend},
        {"bridge inequality", bridge},          {"capture counting controls", capture}};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.note << " [exception: " << e.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %zu %s: %s (%.1f s)%s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL", secs,
                    o.note.str().c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
