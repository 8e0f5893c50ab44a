#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fmgnn {

/// Root of the seeded generator hierarchy. Every consumer of randomness asks
/// for a named child stream ("split", "atlas", "init", "dropout",
/// "negatives"), so changing how one component draws numbers never shifts
/// another component's sequence.
class seed_tree {
public:
    explicit seed_tree(std::uint64_t root) : root_(root) {}

    std::uint64_t root() const noexcept { return root_; }

    std::uint64_t child_seed(std::string_view name) const noexcept {
        std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
        for (unsigned char c : name) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return splitmix64(root_ ^ splitmix64(h));
    }

    std::mt19937_64 stream(std::string_view name) const { return std::mt19937_64(child_seed(name)); }

    seed_tree child(std::string_view name) const { return seed_tree(child_seed(name)); }

    static std::uint64_t splitmix64(std::uint64_t x) noexcept {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    std::uint64_t root_;
};

} // namespace fmgnn
