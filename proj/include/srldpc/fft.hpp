#pragma once

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace srldpc {

/// RAII pair of FFTW plans for one transform length. Plans are created with
/// FFTW_ESTIMATE (deterministic plan choice, so outputs are bit-reproducible
/// across runs) and FFTW_UNALIGNED (callers pass ordinary vectors). Executing
/// a plan on fresh buffers is thread-safe; creation is serialised.
class Dft {
public:
    explicit Dft(std::size_t n) : n_(n) {
        if (n == 0) throw std::invalid_argument("Dft: empty transform");
        std::vector<std::complex<double>> dummy(n);
        auto* p = reinterpret_cast<fftw_complex*>(dummy.data());
        std::lock_guard<std::mutex> lock(planner_mutex());
        fwd_ = fftw_plan_dft_1d(static_cast<int>(n), p, p, FFTW_FORWARD,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
        bwd_ = fftw_plan_dft_1d(static_cast<int>(n), p, p, FFTW_BACKWARD,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!fwd_ || !bwd_) throw std::runtime_error("Dft: planning failed");
    }

    ~Dft() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }

    Dft(const Dft&) = delete;
    Dft& operator=(const Dft&) = delete;

    std::size_t size() const { return n_; }

    /// Unnormalised in-place transforms: forward uses exp(-2*pi*i*jk/n).
    void forward(std::complex<double>* data) const {
        auto* p = reinterpret_cast<fftw_complex*>(data);
        fftw_execute_dft(fwd_, p, p);
    }
    void backward(std::complex<double>* data) const {
        auto* p = reinterpret_cast<fftw_complex*>(data);
        fftw_execute_dft(bwd_, p, p);
    }

private:
    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }

    std::size_t n_;
    fftw_plan fwd_;
    fftw_plan bwd_;
};

/// Process-wide plan registry so dictionaries of the same length share
/// their transforms.
inline std::shared_ptr<Dft> shared_dft(std::size_t n) {
    static std::mutex mtx;
    static std::map<std::size_t, std::weak_ptr<Dft>> registry;
    std::lock_guard<std::mutex> lock(mtx);
    if (auto existing = registry[n].lock()) return existing;
    auto fresh = std::make_shared<Dft>(n);
    registry[n] = fresh;
    return fresh;
}

}  // namespace srldpc
