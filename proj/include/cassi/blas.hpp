#pragma once

#include <cstdlib>

#include <cblas.h>

#if defined(__x86_64__)
#include <cpuid.h>
#endif

namespace cassi::blas {

namespace detail {

#if defined(__x86_64__)
inline unsigned long xcr0() {
    unsigned eax, ebx, ecx, edx;
    if (!__get_cpuid(1, &eax, &ebx, &ecx, &edx)) return 0;
    if (!(ecx & (1u << 27))) return 0; // OSXSAVE
    unsigned lo, hi;
    __asm__ volatile("xgetbv" : "=a"(lo), "=d"(hi) : "c"(0));
    return (static_cast<unsigned long>(hi) << 32) | lo;
}

inline bool os_supports_avx() { return (xcr0() & 0x6) == 0x6; }
inline bool os_supports_avx512() { return (xcr0() & 0xe6) == 0xe6; }

inline bool cpu_has_avx512f() {
    unsigned eax, ebx, ecx, edx;
    if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
    return (ebx & (1u << 16)) && os_supports_avx512();
}

inline bool cpu_has_avx2_fma() {
    unsigned eax, ebx, ecx, edx;
    if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
    bool avx2 = ebx & (1u << 5);
    if (!__get_cpuid(1, &eax, &ebx, &ecx, &edx)) return false;
    bool fma = ecx & (1u << 12);
    return avx2 && fma && os_supports_avx();
}
#endif

// OpenBLAS's runtime dispatcher can fail to recognize virtualized CPUs and
// fall back to its generic pre-AVX kernel, costing ~3x in GEMM throughput.
// It reads OPENBLAS_CORETYPE in a library initializer, so the override has
// to be in place before that initializer runs: this constructor outranks it
// when OpenBLAS is linked statically. An OPENBLAS_CORETYPE set by the user
// always wins.
__attribute__((constructor(101))) inline void pick_core_type() {
#if defined(__x86_64__)
    if (detail::cpu_has_avx512f())
        setenv("OPENBLAS_CORETYPE", "SkylakeX", /*overwrite=*/0);
    else if (detail::cpu_has_avx2_fma())
        setenv("OPENBLAS_CORETYPE", "Haswell", /*overwrite=*/0);
#endif
}

} // namespace detail

// Thread count is pinned to 1: training must stay single-threaded so results
// are reproducible and independent sweeps can run in parallel without
// oversubscription.
inline void init() {
    static bool done = [] {
        openblas_set_num_threads(1);
        return true;
    }();
    (void)done;
}

// Row-major C = alpha * op(A) op(B) + beta * C.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
                 int lda, const double* b, int ldb, double beta, double* c, int ldc) {
    init();
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c,
                ldc);
}

} // namespace cassi::blas
