#pragma once

#include <atomic>
#include <cstdint>
#include <string_view>

namespace ctl::coverage {

// Bitmask of library modules touched since the last reset. Used only by the
// experiment self-test; relaxed atomics keep it safe under OpenMP.
enum class Module : std::uint32_t {
    CostKernel = 1u << 0,
    Distributions = 1u << 1,
    Transport = 1u << 2,
    Couplings = 1u << 3,
    Tails = 1u << 4,
    Bounds = 1u << 5,
    Asymptotics = 1u << 6,
};

inline std::atomic<std::uint32_t>& mask() {
    static std::atomic<std::uint32_t> bits{0};
    return bits;
}

inline void touch(Module m) {
    mask().fetch_or(static_cast<std::uint32_t>(m), std::memory_order_relaxed);
}

inline void reset() { mask().store(0, std::memory_order_relaxed); }

inline bool touched(Module m) {
    return (mask().load(std::memory_order_relaxed) & static_cast<std::uint32_t>(m)) != 0;
}

inline std::string_view name(Module m) {
    switch (m) {
    case Module::CostKernel: return "cost_kernel";
    case Module::Distributions: return "distributions";
    case Module::Transport: return "transport";
    case Module::Couplings: return "couplings";
    case Module::Tails: return "tails";
    case Module::Bounds: return "bounds";
    case Module::Asymptotics: return "asymptotics";
    }
    return "?";
}

}  // namespace ctl::coverage
