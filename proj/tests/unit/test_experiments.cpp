#include <gtest/gtest.h>

#include <map>
#include <random>

#include "flatlab/experiments.hpp"

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

// Uniform measure on the planar set whose base-4 digit pairs all lie in the
// first n of the 16 possible pairs; dimension log n / log 4.
DeltaMeasure digit_set(int m, int n) {
    std::vector<Index> cells{{0, 0}};
    for (int level = 0; level < m / 2; ++level) {
        std::vector<Index> next;
        for (const auto& c : cells)
            for (int k = 0; k < n; ++k) next.push_back({4 * c[0] + k % 4, 4 * c[1] + k / 4});
        cells = std::move(next);
    }
    std::vector<DeltaMeasure::Atom> v;
    for (const auto& c : cells) v.push_back({c, 1.0 / static_cast<double>(cells.size())});
    return DeltaMeasure::from_atoms(Scale(m, 2), v);
}

}  // namespace

TEST(Capture, FullTargetAndUniform) {
    std::mt19937_64 rng(1);
    auto mu = random_measure(rng, 6, 1, 20, 64);
    EXPECT_EQ(minimal_capture_set(mu, mu.total_mass()).size(), mu.size());
    auto u = lattice_uniform<Rational>(Scale(6, 1), 0, 9);
    for (int k = 1; k <= 10; ++k) EXPECT_EQ(minimal_capture_set(u, Rational(k, 10)).size(), static_cast<std::size_t>(k));
    EXPECT_THROW(minimal_capture_set(u, Rational(11, 10)), validation_error);
    EXPECT_THROW(minimal_capture_set(u, Rational(0)), validation_error);
}

TEST(Capture, GreedyMatchesExhaustiveMinimum) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int t = 0; t < 40; ++t) {
        auto mu = random_measure(rng, 6, 1, 2 + rng() % 15, 64);
        const std::size_t n = mu.size();
        ASSERT_LE(n, 16u);
        const double target = u(rng) * mu.total_mass();
        std::size_t best = n + 1;
        for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (mask >> i & 1u) s += mu.atoms()[i].weight;
            if (s + 1e-12 >= target) best = std::min<std::size_t>(best, static_cast<std::size_t>(std::popcount(mask)));
        }
        EXPECT_EQ(minimal_capture_set(mu, target).size(), best);
    }
}

TEST(Capture, MonotoneInTarget) {
    std::mt19937_64 rng(7);
    auto mu = random_measure(rng, 8, 2, 300, 256);
    std::size_t prev = 0;
    for (int k = 1; k <= 50; ++k) {
        const auto n = minimal_capture_set(mu, k / 50.0 * mu.total_mass()).size();
        EXPECT_GE(n, prev);
        prev = n;
    }
}

TEST(CaptureCounting, AtomIsNegativeControl) {
    auto make = [](const Scale& s) {
        return std::pair{digit_set(s.log2_inverse(), 16), atom_measure(s, {0, 0})};
    };
    auto tab = capture_counting_experiment(make, 0.4, 0.05, 16, {Scale(6, 2)});
    ASSERT_EQ(tab.rows.size(), 1u);
    EXPECT_FALSE(tab.rows[0].sigma_hypothesis);
}

TEST(CaptureCounting, LiftedCantorFrozenTable) {
    auto make = [](const Scale& s) {
        auto c = lifted_cantor(s.log2_inverse());
        return std::pair{c, c};
    };
    auto tab = capture_counting_experiment(make, 0.4, 0.05, 16, {Scale(8, 2), Scale(10, 2), Scale(12, 2)});
    ASSERT_EQ(tab.rows.size(), 3u);
    EXPECT_TRUE(tab.all_pass);
    const std::size_t frozen[] = {95, 343, 1244};
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(tab.rows[i].captured, frozen[i]);
        EXPECT_TRUE(tab.rows[i].sigma_hypothesis);
    }
    // independent recount: pairwise sums into a map, sort, take a prefix
    for (int m : {8, 10}) {
        auto c = lifted_cantor(m);
        std::map<Index, double> conv;
        for (const auto& a : c.atoms())
            for (const auto& b : c.atoms()) conv[a.index + b.index] += a.weight * b.weight;
        std::vector<double> w;
        for (const auto& [k, v] : conv) w.push_back(v);
        std::sort(w.rbegin(), w.rend());
        const double target = std::pow(std::ldexp(1.0, -m), 0.05);
        double acc = 0.0;
        std::size_t n = 0;
        while (acc + 1e-12 < target) acc += w[n++];
        EXPECT_EQ(n, frozen[(m - 8) / 2]);
    }
    // a larger alpha only raises the threshold
    auto harder = capture_counting_experiment(make, 1.2, 0.05, 16, {Scale(8, 2), Scale(10, 2), Scale(12, 2)});
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(harder.rows[i].captured, tab.rows[i].captured);
        EXPECT_LE(harder.rows[i].pass, tab.rows[i].pass);
    }
}

TEST(CaptureCounting, ExponentGrowsWithDimensionOfMu) {
    const auto sigma_at = [](const Scale& s) { return lifted_cantor(s.log2_inverse()); };
    double prev = -1.0;
    for (int n : {2, 4, 8}) {
        auto make = [&](const Scale& s) { return std::pair{digit_set(s.log2_inverse(), n), sigma_at(s)}; };
        auto tab = capture_counting_experiment(make, 0.4, 0.05, 16, {Scale(4, 2), Scale(6, 2), Scale(8, 2)});
        EXPECT_GE(tab.fitted_exponent, prev) << "n " << n;
        prev = tab.fitted_exponent;
    }
}

TEST(SumsetGrowth, SingleCellAndFullGrid) {
    auto sigma = lifted_cantor(8);
    UniformSetRecord one{2, 4, {1, 1, 1, 1}, CellSet(Scale(8, 2), {{100, 100}})};
    auto r = sumset_growth_experiment(one, sigma, pair_selection::all_pairs, 1.0, 0.4, 0.05);
    EXPECT_EQ(static_cast<double>(r.sumset_size), r.growth_ratio);
    EXPECT_EQ(r.sumset_size, r.max_fiber);
    UniformSetRecord full{2, 3, {16, 16, 16}, CellSet::unit_cube(Scale(6, 2))};
    auto f = sumset_growth_experiment(full, lifted_cantor(6), pair_selection::all_pairs, 1.0, 0.4, 0.05);
    // saturated: everything lands in [0, 2)^2, at most 4 |X| cells
    EXPECT_LE(f.growth_ratio, 4.0);
    EXPECT_FALSE(f.local_hypothesis);
    EXPECT_EQ(f.local_size, 64u);
    UniformSetRecord bad{2, 1, {4}, CellSet(Scale(2, 2), {{0, 0}, {1, 0}, {2, 0}})};
    EXPECT_THROW(sumset_growth_experiment(bad, lifted_cantor(2), pair_selection::all_pairs, 1.0, 0.4, 0.05),
                 validation_error);
}

TEST(SumsetGrowth, UniformizedCantorSliceGrows) {
    auto sigma = lifted_cantor(12);
    std::vector<Index> supp;
    for (const auto& a : sigma.atoms()) supp.push_back(a.index);
    auto ex = extract_uniform(CellSet(sigma.scale(), supp), 2, 6, 0.2);
    ASSERT_FALSE(ex.records.empty());
    auto r = sumset_growth_experiment(ex.records[0], sigma, pair_selection::all_pairs, 1.0, 0.4, 0.05);
    EXPECT_GE(r.growth_ratio, 2.0);
    EXPECT_GE(r.sumset_size, r.max_fiber);
    auto top = sumset_growth_experiment(ex.records[0], sigma, pair_selection::top_mass, 0.5, 0.4, 0.05);
    EXPECT_LE(top.sumset_size, r.sumset_size);
    EXPECT_GE(top.pair_mass, 0.5 - 1e-12);
}

TEST(RowStructure, RowsSquaresAndProducts) {
    const auto theta = tangent_projection(parabola(), 0.0);  // horizontal tangent
    const double eta = default_eta(0.5);
    std::vector<Index> row, square, product;
    for (std::int64_t i = 0; i < 16; ++i) {
        row.push_back({i, 5});
        for (std::int64_t j = 0; j < 16; ++j) square.push_back({i, j});
        for (std::int64_t h : {0, 3, 12, 15}) product.push_back({i, h});
    }
    auto r = row_structure(CellSet(Scale(8, 2), row), theta, eta);
    EXPECT_EQ(r.histogram.at(16), 1u);
    EXPECT_EQ(r.histogram.at(0), 15u);
    EXPECT_EQ(r.full_rows, 1u);
    EXPECT_EQ(r.total, 16u);
    auto s = row_structure(CellSet(Scale(8, 2), square), theta, eta);
    EXPECT_EQ(s.full_rows, 16u);
    EXPECT_EQ(s.rectangles, 16u);
    auto p = row_structure(CellSet(Scale(8, 2), product), theta, eta);
    EXPECT_EQ(p.full_rows, 4u);
    EXPECT_EQ(p.total, 64u);
    EXPECT_THROW(row_structure(CellSet(Scale(8, 2), {{0, 0}, {16, 0}}), theta, eta), validation_error);
}

TEST(RowStructure, HistogramSumsToInput) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> x(-1.0, 1.0);
    for (int t = 0; t < 30; ++t) {
        std::vector<Index> cells;
        const std::int64_t qx = rng() % 16, qy = rng() % 16;
        for (int k = 0; k < 40; ++k) cells.push_back({16 * qx + static_cast<std::int64_t>(rng() % 16), 16 * qy + static_cast<std::int64_t>(rng() % 16)});
        CellSet XQ(Scale(8, 2), cells);
        auto rs = row_structure(XQ, tangent_projection(parabola(), x(rng)), default_eta(0.8));
        std::size_t sum = 0;
        for (const auto& [k, n] : rs.histogram) sum += k * n;
        EXPECT_EQ(sum, XQ.size());
        EXPECT_EQ(rs.total, XQ.size());
    }
}

TEST(L2LowerBound, EqualityForAtom) {
    auto mu = lattice_uniform<Rational>(Scale(6, 1), 3, 12);
    auto sigma = atom_measure<Rational>(Scale(6, 1), {7, 0});
    std::vector<std::pair<Index, Index>> G;
    for (const auto& a : mu.atoms()) G.push_back({a.index, {7, 0}});
    auto r = l2_lower_bound_check(mu, sigma, G);
    EXPECT_TRUE(r.ok);
    EXPECT_DOUBLE_EQ(r.c, 1.0);
    EXPECT_DOUBLE_EQ(r.C, 1.0);
    EXPECT_DOUBLE_EQ(r.lhs, r.rhs);
    EXPECT_THROW(l2_lower_bound_check(mu, sigma, {}), validation_error);
    auto lumpy = DeltaMeasure::from_atoms(Scale(6, 1), {{{0, 0}, 0.25}, {{1, 0}, 0.75}});
    EXPECT_THROW(l2_lower_bound_check(lumpy, to_double_measure(sigma), {{{0, 0}, {7, 0}}}), validation_error);
}

TEST(L2LowerBound, RandomInstancesAlwaysHold) {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 200; ++t) {
        std::vector<Index> supp;
        const std::size_t n = 1 + rng() % 20;
        for (std::size_t k = 0; k < n; ++k) supp.push_back({static_cast<std::int64_t>(rng() % 64), 0});
        CellSet X(Scale(6, 1), supp);
        std::vector<BasicDeltaMeasure<Rational>::Atom> mv;
        for (const auto& c : X) mv.push_back({c, Rational(1, static_cast<long>(X.size()))});
        auto mu = BasicDeltaMeasure<Rational>::from_atoms(Scale(6, 1), mv);
        std::vector<BasicDeltaMeasure<Rational>::Atom> sv;
        long total = 0;
        const std::size_t ns = 1 + rng() % 10;
        std::vector<long> w;
        for (std::size_t k = 0; k < ns; ++k) total += w.emplace_back(1 + static_cast<long>(rng() % 9));
        for (std::size_t k = 0; k < ns; ++k) sv.push_back({{static_cast<std::int64_t>(rng() % 64), 0}, Rational(w[k], total)});
        auto sigma = BasicDeltaMeasure<Rational>::from_atoms(Scale(6, 1), sv);
        std::vector<std::pair<Index, Index>> G;
        for (const auto& a : mu.atoms())
            for (const auto& b : sigma.atoms())
                if (rng() % 3) G.push_back({a.index, b.index});
        if (G.empty()) G.push_back({mu.atoms()[0].index, sigma.atoms()[0].index});
        EXPECT_TRUE(l2_lower_bound_check(mu, sigma, G).ok);
        EXPECT_TRUE(l2_lower_bound_check(to_double_measure(mu), to_double_measure(sigma), G).ok);
    }
}
