#pragma once

// Dense fp64 inner loops used by the numerics layer.
//
// Every kernel has a scalar reference implementation; SIMD variants are
// compiled in separate translation units and selected at runtime. The
// selection can be forced with TEMPORA_KERNELS=scalar|avx2. Variants are
// not bit-identical (FMA contracts the multiply-add), so a run is
// reproducible for a fixed kernel choice, and the equivalence tests bound
// the difference between variants.

#include <cstddef>
#include <string_view>

namespace tempora::kernels {

struct KernelTable {
    std::string_view name;

    // y += a * x
    void (*axpy)(std::size_t n, double a, const double* x, double* y);
    // sum_i x[i] * y[i]
    double (*dot)(std::size_t n, const double* x, const double* y);
    // out = x + y
    void (*add)(std::size_t n, const double* x, const double* y, double* out);
    // out = x * y
    void (*mul)(std::size_t n, const double* x, const double* y, double* out);
    // out += x * y
    void (*mul_acc)(std::size_t n, const double* x, const double* y, double* out);

    // Row-major products accumulated into c (c is not cleared).
    // nn: c[m,n] += a[m,k] * b[k,n]
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
    // nt: c[m,n] += a[m,k] * b[n,k]^T
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
    // tn: c[m,n] += a[k,m]^T * b[k,n]
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_kernels();

// The table in use for this process; chosen once on first call.
const KernelTable& active();

} // namespace tempora::kernels
