#include "ftlsim/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace ftlsim::kernels {

// ----------------------------------------------------------------------------
// Scalar reference kernels
// ----------------------------------------------------------------------------

namespace {

void matvec_scalar(const double* w, const double* x,
                   std::size_t in_dim, std::size_t out_dim, double* y) {
    for (std::size_t i = 0; i < in_dim; ++i) {
        const double xi = x[i];
        const double* row = w + i * out_dim;
        for (std::size_t j = 0; j < out_dim; ++j) {
            y[j] += xi * row[j];
        }
    }
}

void rank1_scalar(double* m, const double* x, std::size_t in_dim,
                  const double* d, std::size_t out_dim) {
    for (std::size_t i = 0; i < in_dim; ++i) {
        const double xi = x[i];
        double* row = m + i * out_dim;
        for (std::size_t j = 0; j < out_dim; ++j) {
            row[j] += xi * d[j];
        }
    }
}

void scaled_add_scalar(double* acc, const double* x, double s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += s * x[i];
}

void sgd_step_scalar(double* p, const double* g, double lr, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p[i] -= lr * g[i];
}

void blend_toward_scalar(double* g, const double* w, double lam, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) g[i] += lam * (w[i] - g[i]);
}

}  // namespace

namespace detail {
const KernelTable scalar_table = {
    matvec_scalar,
    rank1_scalar,
    scaled_add_scalar,
    sgd_step_scalar,
    blend_toward_scalar,
};
}  // namespace detail

// ----------------------------------------------------------------------------
// Backend selection
// ----------------------------------------------------------------------------

std::string_view backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "unknown";
}

bool backend_available(Backend b) {
    switch (b) {
        case Backend::scalar:
            return true;
        case Backend::avx2:
#if defined(FTLSIM_BUILD_AVX2)
            return __builtin_cpu_supports("avx2") != 0;
#else
            return false;
#endif
        case Backend::neon:
#if defined(FTLSIM_BUILD_NEON)
            return true;
#else
            return false;
#endif
    }
    return false;
}

Backend detect_backend() {
    if (const char* env = std::getenv("FTLSIM_BACKEND")) {
        const std::string name(env);
        for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
            if (name == backend_name(b) && backend_available(b)) return b;
        }
    }
    if (backend_available(Backend::avx2)) return Backend::avx2;
    if (backend_available(Backend::neon)) return Backend::neon;
    return Backend::scalar;
}

namespace {
Backend g_backend = detect_backend();
}

Backend active_backend() { return g_backend; }

void set_backend(Backend b) {
    if (!backend_available(b)) {
        throw std::runtime_error("kernel backend not available on this machine: " +
                                 std::string(backend_name(b)));
    }
    g_backend = b;
}

const KernelTable& table() {
    switch (g_backend) {
#if defined(FTLSIM_BUILD_AVX2)
        case Backend::avx2: return detail::avx2_table;
#endif
#if defined(FTLSIM_BUILD_NEON)
        case Backend::neon: return detail::neon_table;
#endif
        default: return detail::scalar_table;
    }
}

}  // namespace ftlsim::kernels
