#include <atomic>
#include <cstdlib>
#include <string>

#include "specctl/kernels.hpp"

namespace specctl::kernels {

#if !(defined(__x86_64__) || defined(_M_X64) || defined(__i386__))
const KernelTable* avx2_table() { return nullptr; }
#endif
#if !(defined(__aarch64__) || defined(_M_ARM64))
const KernelTable* neon_table() { return nullptr; }
#endif

namespace {

const KernelTable* best_available() {
    if (const auto* t = avx2_table()) return t;
    if (const auto* t = neon_table()) return t;
    return &scalar_table();
}

const KernelTable* by_name(std::string_view name) {
    if (name == "scalar") return &scalar_table();
    if (name == "avx2") return avx2_table();
    if (name == "neon") return neon_table();
    if (name == "auto") return best_available();
    return nullptr;
}

const KernelTable* initial() {
    if (const char* env = std::getenv("SPECCTL_KERNELS")) {
        if (const auto* t = by_name(env)) return t;
    }
    return best_available();
}

std::atomic<const KernelTable*>& slot() {
    static std::atomic<const KernelTable*> current{initial()};
    return current;
}

}  // namespace

std::vector<const KernelTable*> available_tables() {
    std::vector<const KernelTable*> out{&scalar_table()};
    if (const auto* t = avx2_table()) out.push_back(t);
    if (const auto* t = neon_table()) out.push_back(t);
    return out;
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

bool select(std::string_view name) {
    const auto* t = by_name(name);
    if (!t) return false;
    slot().store(t, std::memory_order_release);
    return true;
}

}  // namespace specctl::kernels
