#include "ctl/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ctl::kernels {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
    static const int initial = omp_get_max_threads();
    omp_set_num_threads(n > 0 ? n : initial);
#else
    (void)n;
#endif
}

namespace {

inline double conv_at(std::span<const double> a, std::span<const double> b, std::size_t k) {
    const std::size_t lo = k >= b.size() - 1 ? k - (b.size() - 1) : 0;
    const std::size_t hi = std::min(k, a.size() - 1);
    double s = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) s += a[i] * b[k - i];
    return s;
}

}  // namespace

std::vector<double> convolve_serial(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) return {};
    std::vector<double> out(a.size() + b.size() - 1);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = conv_at(a, b, k);
    return out;
}

std::vector<double> convolve_parallel(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) return {};
    std::vector<double> out(a.size() + b.size() - 1);
    const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = conv_at(a, b, static_cast<std::size_t>(k));
    return out;
}

}  // namespace ctl::kernels
