#pragma once

// Thin RAII layer over FFTW for the dense transform backends. Plans use
// FFTW_ESTIMATE so that the chosen algorithm, and hence the rounding, is the
// same on every run.

#include <fftw3.h>

#include <complex>
#include <memory>
#include <mutex>
#include <vector>

#include "flatlab/core.hpp"

namespace flatlab::fft {

inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct fftw_deleter {
    void operator()(void* p) const noexcept { fftw_free(p); }
};

template <class T>
using fftw_buffer = std::unique_ptr<T[], fftw_deleter>;

template <class T>
fftw_buffer<T> allocate(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)));
    if (!p) throw budget_error("fftw_malloc failed for " + std::to_string(n) + " elements");
    return fftw_buffer<T>(p);
}

class plan {
public:
    plan() = default;
    explicit plan(fftw_plan p) : p_(p) {
        if (!p_) throw budget_error("FFTW could not create a plan");
    }
    plan(const plan&) = delete;
    plan& operator=(const plan&) = delete;
    plan(plan&& o) noexcept : p_(o.p_) { o.p_ = nullptr; }
    plan& operator=(plan&& o) noexcept {
        std::swap(p_, o.p_);
        return *this;
    }
    ~plan() {
        if (p_) {
            std::lock_guard lock(planner_mutex());
            fftw_destroy_plan(p_);
        }
    }
    void execute() const { fftw_execute(p_); }

private:
    fftw_plan p_ = nullptr;
};

/// In-place complex DFT of an n0 x n1 row-major array (n1 == 1 for 1D).
inline void dft_inplace(std::complex<double>* data, int n0, int n1, int sign) {
    auto* d = reinterpret_cast<fftw_complex*>(data);
    fftw_plan raw;
    {
        std::lock_guard lock(planner_mutex());
        raw = n1 == 1 ? fftw_plan_dft_1d(n0, d, d, sign, FFTW_ESTIMATE)
                      : fftw_plan_dft_2d(n0, n1, d, d, sign, FFTW_ESTIMATE);
    }
    plan p(raw);
    p.execute();
}

/// Linear (non-circular) convolution of two dense real arrays of shapes
/// (a0 x a1) and (b0 x b1); the result has shape (a0+b0-1) x (a1+b1-1).
inline std::vector<double> linear_convolve(const std::vector<double>& a, int a0, int a1,
                                           const std::vector<double>& b, int b0, int b1) {
    const int n0 = a0 + b0 - 1;
    const int n1 = a1 + b1 - 1;
    const std::size_t n = static_cast<std::size_t>(n0) * n1;
    auto fa = allocate<std::complex<double>>(n);
    auto fb = allocate<std::complex<double>>(n);
    std::fill(fa.get(), fa.get() + n, std::complex<double>{});
    std::fill(fb.get(), fb.get() + n, std::complex<double>{});
    for (int i = 0; i < a0; ++i)
        for (int j = 0; j < a1; ++j) fa[static_cast<std::size_t>(i) * n1 + j] = a[static_cast<std::size_t>(i) * a1 + j];
    for (int i = 0; i < b0; ++i)
        for (int j = 0; j < b1; ++j) fb[static_cast<std::size_t>(i) * n1 + j] = b[static_cast<std::size_t>(i) * b1 + j];
    dft_inplace(fa.get(), n0, n1, FFTW_FORWARD);
    dft_inplace(fb.get(), n0, n1, FFTW_FORWARD);
    for (std::size_t k = 0; k < n; ++k) fa[k] *= fb[k];
    dft_inplace(fa.get(), n0, n1, FFTW_BACKWARD);
    std::vector<double> out(n);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = fa[k].real() * scale;
    return out;
}

}  // namespace flatlab::fft
