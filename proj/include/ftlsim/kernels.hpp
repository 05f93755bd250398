#pragma once

#include <cstddef>
#include <string_view>

namespace ftlsim::kernels {

// ============================================================================
// Runtime-dispatched numeric kernels.
//
// Every kernel is defined so the scalar reference and the SIMD variants are
// bit-identical: elementwise ops vectorize trivially, and the matrix/vector
// ops vectorize across the *output* dimension, which keeps the per-element
// accumulation order of the scalar loop. No FMA anywhere (the build also
// disables contraction), so switching backends never changes a single bit.
// ============================================================================

enum class Backend { scalar, avx2, neon };

std::string_view backend_name(Backend b);
bool backend_available(Backend b);

/// Best backend the CPU supports (the FTLSIM_BACKEND env var, when set to a
/// known name, overrides the probe).
Backend detect_backend();

Backend active_backend();
void set_backend(Backend b);  // throws std::runtime_error if unavailable

struct KernelTable {
    // y[j] += sum_i x[i] * w[i*out_dim + j]   (input-major weight layout)
    void (*matvec_input_major)(const double* w, const double* x,
                               std::size_t in_dim, std::size_t out_dim, double* y);
    // m[i*out_dim + j] += x[i] * d[j]
    void (*rank1_update)(double* m, const double* x, std::size_t in_dim,
                         const double* d, std::size_t out_dim);
    // acc[i] += s * x[i]
    void (*scaled_add)(double* acc, const double* x, double s, std::size_t n);
    // p[i] -= lr * g[i]
    void (*sgd_step)(double* p, const double* g, double lr, std::size_t n);
    // g[i] += lam * (w[i] - g[i])
    void (*blend_toward)(double* g, const double* w, double lam, std::size_t n);
};

const KernelTable& table();

// Convenience wrappers through the active table.
inline void matvec_input_major(const double* w, const double* x,
                               std::size_t in_dim, std::size_t out_dim, double* y) {
    table().matvec_input_major(w, x, in_dim, out_dim, y);
}
inline void rank1_update(double* m, const double* x, std::size_t in_dim,
                         const double* d, std::size_t out_dim) {
    table().rank1_update(m, x, in_dim, d, out_dim);
}
inline void scaled_add(double* acc, const double* x, double s, std::size_t n) {
    table().scaled_add(acc, x, s, n);
}
inline void sgd_step(double* p, const double* g, double lr, std::size_t n) {
    table().sgd_step(p, g, lr, n);
}
inline void blend_toward(double* g, const double* w, double lam, std::size_t n) {
    table().blend_toward(g, w, lam, n);
}

namespace detail {
extern const KernelTable scalar_table;
#if defined(FTLSIM_BUILD_AVX2)
extern const KernelTable avx2_table;
#endif
#if defined(FTLSIM_BUILD_NEON)
extern const KernelTable neon_table;
#endif
}  // namespace detail

}  // namespace ftlsim::kernels
