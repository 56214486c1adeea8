#include "camox/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace camox::kern {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(__i386__)) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

const Backend& resolve() {
    const char* want = std::getenv("CAMOX_SIMD");
    if (want != nullptr && std::strcmp(want, "scalar") == 0) return scalar_backend();
    const Backend* avx2 = avx2_backend();
    if (avx2 != nullptr && cpu_has_avx2()) {
        if (want == nullptr || std::strcmp(want, "avx2") == 0) return *avx2;
    }
    return scalar_backend();
}

}  // namespace

const Backend& active_backend() {
    static const Backend& chosen = resolve();
    return chosen;
}

}  // namespace camox::kern
