#include "ftlsim/kernels.hpp"

#include <immintrin.h>

// ============================================================================
// AVX2 kernels.
//
// Deliberately no FMA: each lane does the same mul-then-add the scalar loop
// does, so results match the scalar backend bit for bit. The matrix kernels
// vectorize over the output dimension; the remainder loops repeat the scalar
// body verbatim.
// ============================================================================

namespace ftlsim::kernels {
namespace {

void matvec_avx2(const double* w, const double* x,
                 std::size_t in_dim, std::size_t out_dim, double* y) {
    for (std::size_t i = 0; i < in_dim; ++i) {
        const double xi = x[i];
        const __m256d vx = _mm256_set1_pd(xi);
        const double* row = w + i * out_dim;
        std::size_t j = 0;
        for (; j + 4 <= out_dim; j += 4) {
            __m256d vy = _mm256_loadu_pd(y + j);
            __m256d vw = _mm256_loadu_pd(row + j);
            vy = _mm256_add_pd(vy, _mm256_mul_pd(vx, vw));
            _mm256_storeu_pd(y + j, vy);
        }
        for (; j < out_dim; ++j) y[j] += xi * row[j];
    }
}

void rank1_avx2(double* m, const double* x, std::size_t in_dim,
                const double* d, std::size_t out_dim) {
    for (std::size_t i = 0; i < in_dim; ++i) {
        const double xi = x[i];
        const __m256d vx = _mm256_set1_pd(xi);
        double* row = m + i * out_dim;
        std::size_t j = 0;
        for (; j + 4 <= out_dim; j += 4) {
            __m256d vm = _mm256_loadu_pd(row + j);
            __m256d vd = _mm256_loadu_pd(d + j);
            vm = _mm256_add_pd(vm, _mm256_mul_pd(vx, vd));
            _mm256_storeu_pd(row + j, vm);
        }
        for (; j < out_dim; ++j) row[j] += xi * d[j];
    }
}

void scaled_add_avx2(double* acc, const double* x, double s, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d va = _mm256_loadu_pd(acc + i);
        __m256d vx = _mm256_loadu_pd(x + i);
        va = _mm256_add_pd(va, _mm256_mul_pd(vs, vx));
        _mm256_storeu_pd(acc + i, va);
    }
    for (; i < n; ++i) acc[i] += s * x[i];
}

void sgd_step_avx2(double* p, const double* g, double lr, std::size_t n) {
    const __m256d vlr = _mm256_set1_pd(lr);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vp = _mm256_loadu_pd(p + i);
        __m256d vg = _mm256_loadu_pd(g + i);
        vp = _mm256_sub_pd(vp, _mm256_mul_pd(vlr, vg));
        _mm256_storeu_pd(p + i, vp);
    }
    for (; i < n; ++i) p[i] -= lr * g[i];
}

void blend_toward_avx2(double* g, const double* w, double lam, std::size_t n) {
    const __m256d vlam = _mm256_set1_pd(lam);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vw = _mm256_loadu_pd(w + i);
        __m256d diff = _mm256_sub_pd(vw, vg);
        vg = _mm256_add_pd(vg, _mm256_mul_pd(vlam, diff));
        _mm256_storeu_pd(g + i, vg);
    }
    for (; i < n; ++i) g[i] += lam * (w[i] - g[i]);
}

}  // namespace

namespace detail {
const KernelTable avx2_table = {
    matvec_avx2,
    rank1_avx2,
    scaled_add_avx2,
    sgd_step_avx2,
    blend_toward_avx2,
};
}  // namespace detail

}  // namespace ftlsim::kernels
