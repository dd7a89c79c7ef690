#include "tempora/kernels/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace tempora::kernels {

#if defined(TEMPORA_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

const KernelTable* avx2_kernels() {
#if defined(TEMPORA_HAVE_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &avx2_table() : nullptr;
#else
    return nullptr;
#endif
}

namespace {

const KernelTable& select() {
    const char* env = std::getenv("TEMPORA_KERNELS");
    const std::string choice = env ? env : "";
    if (choice == "scalar") return scalar_kernels();
    if (choice == "avx2") {
        if (const KernelTable* t = avx2_kernels()) return *t;
        throw std::runtime_error("TEMPORA_KERNELS=avx2 requested but AVX2/FMA is unavailable");
    }
    if (!choice.empty()) throw std::runtime_error("TEMPORA_KERNELS: unknown variant '" + choice + "'");
    if (const KernelTable* t = avx2_kernels()) return *t;
    return scalar_kernels();
}

} // namespace

const KernelTable& active() {
    static const KernelTable& table = select();
    return table;
}

} // namespace tempora::kernels
