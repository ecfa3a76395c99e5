#pragma once

// Shared vocabulary: error taxonomy, dyadic scales, lattice indices and the
// deterministic tiled parallel loops used by the heavier kernels.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace flatlab {

inline constexpr const char* version_string = "flatlab 0.1.0";

enum class error_kind { validation, budget, property };

class error : public std::runtime_error {
public:
    error(error_kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    error_kind kind() const noexcept { return kind_; }

private:
    error_kind kind_;
};

struct validation_error : error {
    explicit validation_error(const std::string& what) : error(error_kind::validation, what) {}
};

struct budget_error : error {
    explicit budget_error(const std::string& what) : error(error_kind::budget, what) {}
};

struct property_error : error {
    explicit property_error(const std::string& what) : error(error_kind::property, what) {}
};

// Raised when a measure or set has zero-diameter support where a positive
// diameter is required (uniform perfectness is undefined there).
struct degenerate_support_error : validation_error {
    using validation_error::validation_error;
};

/// Dyadic scale delta = 2^{-m} in dimension 1 or 2.
class Scale {
public:
    Scale() = default;
    Scale(int log2_inverse, int dim) : m_(log2_inverse), dim_(dim) {
        if (m_ < 1) throw validation_error("scale exponent m must be >= 1, got " + std::to_string(m_));
        if (dim_ != 1 && dim_ != 2)
            throw validation_error("dimension must be 1 or 2, got " + std::to_string(dim_));
    }

    int log2_inverse() const noexcept { return m_; }
    int dim() const noexcept { return dim_; }
    double delta() const noexcept { return std::ldexp(1.0, -m_); }

    // Coarser means a smaller m.
    bool no_finer_than(const Scale& other) const noexcept { return m_ <= other.m_; }

    Scale with_m(int m) const { return Scale(m, dim_); }

    friend bool operator==(const Scale&, const Scale&) = default;

private:
    int m_ = 1;
    int dim_ = 1;
};

/// Lattice index; the second coordinate is zero for one-dimensional objects.
using Index = std::array<std::int64_t, 2>;
using Point = std::array<double, 2>;

inline Index operator+(const Index& a, const Index& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Index operator-(const Index& a, const Index& b) { return {a[0] - b[0], a[1] - b[1]}; }

// floor(i / 2^shift) for possibly negative i (arithmetic shift is defined in C++20).
inline std::int64_t floor_shift(std::int64_t i, int shift) { return i >> shift; }

inline Index coarsen_index(const Index& i, int shift) {
    return {floor_shift(i[0], shift), floor_shift(i[1], shift)};
}

inline double norm(const Point& p) { return std::hypot(p[0], p[1]); }

// ---------------------------------------------------------------------------
// Threading. Work is split into fixed-size tiles; reductions combine per-tile
// partial results in tile order, so results do not depend on the thread count.

inline std::atomic<int>& thread_setting() {
    static std::atomic<int> n{0};
    return n;
}

inline void set_thread_count(int n) { thread_setting() = std::max(1, n); }

inline int thread_count() {
    int n = thread_setting().load();
    if (n > 0) return n;
    if (const char* env = std::getenv("FLATLAB_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

inline constexpr std::size_t default_tile = 256;

/// Calls fn(tile_begin, tile_end) for every tile of [0, n).
template <class Fn>
void parallel_tiles(std::size_t n, std::size_t tile, Fn&& fn) {
    if (n == 0) return;
    const std::size_t tiles = (n + tile - 1) / tile;
    const int workers = static_cast<int>(std::min<std::size_t>(tiles, thread_count()));
    if (workers <= 1) {
        for (std::size_t t = 0; t < tiles; ++t) fn(t * tile, std::min(n, (t + 1) * tile));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t t = next++; t < tiles; t = next++)
                fn(t * tile, std::min(n, (t + 1) * tile));
        });
    }
    for (auto& th : pool) th.join();
}

/// Pairwise summation of a vector of partials.
inline double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

/// Deterministic sum of term(i) over [0, n): sequential within tiles,
/// pairwise across tiles.
template <class Term>
double tiled_sum(std::size_t n, std::size_t tile, Term&& term) {
    if (n == 0) return 0.0;
    const std::size_t tiles = (n + tile - 1) / tile;
    std::vector<double> partial(tiles, 0.0);
    parallel_tiles(n, tile, [&](std::size_t b, std::size_t e) {
        double s = 0.0;
        for (std::size_t i = b; i < e; ++i) s += term(i);
        partial[b / tile] = s;
    });
    return pairwise_sum(partial.data(), partial.size());
}

inline bool is_power_of_two(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

inline std::int64_t floor_power_of_two(std::int64_t n) {
    std::int64_t p = 1;
    while (p * 2 <= n) p *= 2;
    return p;
}

/// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw validation_error("slope fit needs at least two points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace flatlab
