#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <stdexcept>

namespace shearlab {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// Batched in-place complex FFT of `howmany` contiguous rows of length n.
/// Plans use FFTW_ESTIMATE | FFTW_UNALIGNED so results do not depend on
/// timing measurements and any buffer can be passed to execute().
class BatchedFft {
public:
    BatchedFft() = default;
    BatchedFft(int n, int howmany) : n_(n), howmany_(howmany) {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_complex* tmp = fftw_alloc_complex(static_cast<std::size_t>(n) * howmany);
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        fwd_ = fftw_plan_many_dft(1, &n_, howmany, tmp, nullptr, 1, n, tmp, nullptr, 1, n, FFTW_FORWARD, flags);
        bwd_ = fftw_plan_many_dft(1, &n_, howmany, tmp, nullptr, 1, n, tmp, nullptr, 1, n, FFTW_BACKWARD, flags);
        fftw_free(tmp);
        if (!fwd_ || !bwd_) throw std::runtime_error("FFTW planning failed");
    }
    BatchedFft(const BatchedFft&) = delete;
    BatchedFft& operator=(const BatchedFft&) = delete;
    BatchedFft(BatchedFft&& o) noexcept { swap(o); }
    BatchedFft& operator=(BatchedFft&& o) noexcept {
        swap(o);
        return *this;
    }
    ~BatchedFft() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        if (fwd_) fftw_destroy_plan(fwd_);
        if (bwd_) fftw_destroy_plan(bwd_);
    }

    int size() const noexcept { return n_; }

    /// Unnormalized forward transform (sign -1).
    void forward(std::complex<double>* data) const {
        auto* p = reinterpret_cast<fftw_complex*>(data);
        fftw_execute_dft(fwd_, p, p);
    }
    /// Unnormalized backward transform (sign +1).
    void backward(std::complex<double>* data) const {
        auto* p = reinterpret_cast<fftw_complex*>(data);
        fftw_execute_dft(bwd_, p, p);
    }

private:
    void swap(BatchedFft& o) noexcept {
        std::swap(n_, o.n_);
        std::swap(howmany_, o.howmany_);
        std::swap(fwd_, o.fwd_);
        std::swap(bwd_, o.bwd_);
    }
    int n_ = 0;
    int howmany_ = 0;
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

} // namespace shearlab
