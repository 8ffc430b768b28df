#pragma once

// Data-parallel inner loops. Each kernel has a serial reference and an OpenMP
// path that computes exactly the same per-index values; reductions are always
// done serially afterwards, so both paths return bit-identical results.

#include <cstddef>
#include <span>
#include <vector>

#include "ctl/numeric.hpp"

namespace ctl::kernels {

// Number of worker threads the OpenMP path will use (1 without OpenMP).
int max_threads();
// Sets the OpenMP thread count; n <= 0 restores the runtime default.
void set_threads(int n);

// out[k] = sum_i a[i] * b[k - i].
std::vector<double> convolve_serial(std::span<const double> a, std::span<const double> b);
std::vector<double> convolve_parallel(std::span<const double> a, std::span<const double> b);

inline std::vector<double> convolve(std::span<const double> a, std::span<const double> b, bool parallel) {
    return parallel ? convolve_parallel(a, b) : convolve_serial(a, b);
}

// Calls f(i) for i in [0, n), writing results into out[i].
template <class T, class F>
void map_indices(std::size_t n, std::vector<T>& out, F&& f, bool parallel) {
    out.resize(n);
    if (!parallel) {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
        return;
    }
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = f(static_cast<std::size_t>(i));
}

// Integrates f over each [cells[i], cells[i+1]] and sums the pieces in index
// order.
template <class F>
QuadResult integrate_cells(F&& f, std::span<const double> cells, const QuadOptions& opt, bool parallel) {
    QuadResult total;
    if (cells.size() < 2) return total;
    std::vector<QuadResult> parts;
    map_indices(
        cells.size() - 1, parts,
        [&](std::size_t i) {
            if (!(cells[i + 1] > cells[i])) return QuadResult{};
            return integrate(f, cells[i], cells[i + 1], opt);
        },
        parallel);
    for (const auto& r : parts) total += r;
    return total;
}

}  // namespace ctl::kernels
