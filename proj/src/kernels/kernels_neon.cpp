#include "ftlsim/kernels.hpp"

#include <arm_neon.h>

// ============================================================================
// NEON kernels (aarch64, 2 doubles per vector).
//
// Same contract as the AVX2 file: plain mul then add, no fused ops, so the
// bits match the scalar reference exactly.
// ============================================================================

namespace ftlsim::kernels {
namespace {

void matvec_neon(const double* w, const double* x,
                 std::size_t in_dim, std::size_t out_dim, double* y) {
    for (std::size_t i = 0; i < in_dim; ++i) {
        const double xi = x[i];
        const float64x2_t vx = vdupq_n_f64(xi);
        const double* row = w + i * out_dim;
        std::size_t j = 0;
        for (; j + 2 <= out_dim; j += 2) {
            float64x2_t vy = vld1q_f64(y + j);
            float64x2_t vw = vld1q_f64(row + j);
            vy = vaddq_f64(vy, vmulq_f64(vx, vw));
            vst1q_f64(y + j, vy);
        }
        for (; j < out_dim; ++j) y[j] += xi * row[j];
    }
}

void rank1_neon(double* m, const double* x, std::size_t in_dim,
                const double* d, std::size_t out_dim) {
    for (std::size_t i = 0; i < in_dim; ++i) {
        const double xi = x[i];
        const float64x2_t vx = vdupq_n_f64(xi);
        double* row = m + i * out_dim;
        std::size_t j = 0;
        for (; j + 2 <= out_dim; j += 2) {
            float64x2_t vm = vld1q_f64(row + j);
            float64x2_t vd = vld1q_f64(d + j);
            vm = vaddq_f64(vm, vmulq_f64(vx, vd));
            vst1q_f64(row + j, vm);
        }
        for (; j < out_dim; ++j) row[j] += xi * d[j];
    }
}

void scaled_add_neon(double* acc, const double* x, double s, std::size_t n) {
    const float64x2_t vs = vdupq_n_f64(s);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t va = vld1q_f64(acc + i);
        float64x2_t vx = vld1q_f64(x + i);
        va = vaddq_f64(va, vmulq_f64(vs, vx));
        vst1q_f64(acc + i, va);
    }
    for (; i < n; ++i) acc[i] += s * x[i];
}

void sgd_step_neon(double* p, const double* g, double lr, std::size_t n) {
    const float64x2_t vlr = vdupq_n_f64(lr);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t vp = vld1q_f64(p + i);
        float64x2_t vg = vld1q_f64(g + i);
        vp = vsubq_f64(vp, vmulq_f64(vlr, vg));
        vst1q_f64(p + i, vp);
    }
    for (; i < n; ++i) p[i] -= lr * g[i];
}

void blend_toward_neon(double* g, const double* w, double lam, std::size_t n) {
    const float64x2_t vlam = vdupq_n_f64(lam);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t vg = vld1q_f64(g + i);
        float64x2_t vw = vld1q_f64(w + i);
        float64x2_t diff = vsubq_f64(vw, vg);
        vg = vaddq_f64(vg, vmulq_f64(vlam, diff));
        vst1q_f64(g + i, vg);
    }
    for (; i < n; ++i) g[i] += lam * (w[i] - g[i]);
}

}  // namespace

namespace detail {
const KernelTable neon_table = {
    matvec_neon,
    rank1_neon,
    scaled_add_neon,
    sgd_step_neon,
    blend_toward_neon,
};
}  // namespace detail

}  // namespace ftlsim::kernels
