#pragma once

#include <array>
#include <cstdint>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tighthc {

using Vertex = std::int32_t;

// Vertex ids are packed 20 bits each into a 128-bit key, so n < 2^20 and
// set sizes up to 6 (r <= 6) are supported.
inline constexpr Vertex kMaxVertexCount = 1 << 20;
inline constexpr int kMaxUniformity = 6;

using SetKey = unsigned __int128;

// Fixed-capacity tuple for (r-1)-tuples and r-sets on the hot paths.
struct Tup {
    std::array<Vertex, 8> v{};
    std::uint8_t n = 0;

    Tup() = default;
    Tup(std::initializer_list<Vertex> xs) {
        for (Vertex x : xs) push(x);
    }
    explicit Tup(const std::vector<Vertex>& xs) {
        for (Vertex x : xs) push(x);
    }
    void push(Vertex x) {
        if (n >= 8) throw std::invalid_argument("Tup overflow");
        v[n++] = x;
    }
    int size() const { return n; }
    bool empty() const { return n == 0; }
    Vertex& operator[](int i) { return v[static_cast<size_t>(i)]; }
    Vertex operator[](int i) const { return v[static_cast<size_t>(i)]; }
    const Vertex* begin() const { return v.data(); }
    const Vertex* end() const { return v.data() + n; }
    bool contains(Vertex x) const {
        for (int i = 0; i < n; ++i)
            if (v[static_cast<size_t>(i)] == x) return true;
        return false;
    }
    Tup reversed() const {
        Tup r;
        for (int i = n - 1; i >= 0; --i) r.push(v[static_cast<size_t>(i)]);
        return r;
    }
    std::vector<Vertex> to_vector() const { return {begin(), end()}; }
    bool operator==(const Tup& o) const {
        if (n != o.n) return false;
        for (int i = 0; i < n; ++i)
            if (v[static_cast<size_t>(i)] != o.v[static_cast<size_t>(i)]) return false;
        return true;
    }
    bool distinct() const {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (v[static_cast<size_t>(i)] == v[static_cast<size_t>(j)]) return false;
        return true;
    }
};

// Canonical key of a vertex set: sorted ascending, 20 bits per entry.
inline SetKey set_key(const Vertex* xs, int k) {
    std::array<Vertex, 8> s{};
    for (int i = 0; i < k; ++i) s[static_cast<size_t>(i)] = xs[i];
    for (int i = 1; i < k; ++i) {  // insertion sort, k <= 8
        Vertex x = s[static_cast<size_t>(i)];
        int j = i - 1;
        while (j >= 0 && s[static_cast<size_t>(j)] > x) {
            s[static_cast<size_t>(j + 1)] = s[static_cast<size_t>(j)];
            --j;
        }
        s[static_cast<size_t>(j + 1)] = x;
    }
    SetKey key = static_cast<SetKey>(k);
    for (int i = 0; i < k; ++i) {
        key = (key << 20) | static_cast<SetKey>(static_cast<std::uint32_t>(s[static_cast<size_t>(i)]));
    }
    return key;
}

inline SetKey set_key(const Tup& t) { return set_key(t.begin(), t.size()); }
inline SetKey set_key(const std::vector<Vertex>& t) {
    return set_key(t.data(), static_cast<int>(t.size()));
}

// Inverse of set_key. The size field sits above the packed entries, so the
// remainder stays >= 2^20 until every entry has been peeled.
inline std::vector<Vertex> key_vertices(SetKey key) {
    SetKey rest = key;
    std::vector<Vertex> rev;
    while (rest >> 20) {
        rev.push_back(static_cast<Vertex>(static_cast<std::uint32_t>(rest) & 0xfffff));
        rest >>= 20;
    }
    return {rev.rbegin(), rev.rend()};
}

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct SetKeyHash {
    size_t operator()(SetKey k) const {
        std::uint64_t lo = static_cast<std::uint64_t>(k);
        std::uint64_t hi = static_cast<std::uint64_t>(k >> 64);
        return static_cast<size_t>(mix64(lo ^ mix64(hi)));
    }
};

// Raised in strict mode when an r-set's randomness would be consumed twice.
class DisciplineViolation : public std::runtime_error {
public:
    explicit DisciplineViolation(const std::string& what) : std::runtime_error(what) {}
};

// Probabilistic failure of a pipeline stage, as opposed to a contract bug.
enum class Stage { Reservoir, CoverU, CoverL, Close, Connect, SpikeConnect, Fan };

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Reservoir: return "reservoir";
        case Stage::CoverU: return "coverU";
        case Stage::CoverL: return "coverL";
        case Stage::Close: return "close";
        case Stage::Connect: return "connect";
        case Stage::SpikeConnect: return "spike_connect";
        case Stage::Fan: return "fan";
    }
    return "?";
}

struct Fail {
    Stage stage;
    std::string detail;
};

template <typename T>
struct Outcome {
    std::optional<T> value;
    std::optional<Fail> fail;

    bool ok() const { return value.has_value(); }
    static Outcome success(T v) { return Outcome{std::move(v), std::nullopt}; }
    static Outcome failure(Stage s, std::string d) {
        return Outcome{std::nullopt, Fail{s, std::move(d)}};
    }
    T& operator*() { return *value; }
    const T& operator*() const { return *value; }
    T* operator->() { return &*value; }
    const T* operator->() const { return &*value; }
};

// Simple fixed-size bitmap over vertex ids.
class VertexBitmap {
public:
    VertexBitmap() = default;
    explicit VertexBitmap(int n) : words_((static_cast<size_t>(n) + 63) / 64, 0), n_(n) {}
    void set(Vertex v) { words_[static_cast<size_t>(v) >> 6] |= (1ULL << (v & 63)); }
    void reset(Vertex v) { words_[static_cast<size_t>(v) >> 6] &= ~(1ULL << (v & 63)); }
    bool test(Vertex v) const {
        if (v < 0 || v >= n_) return false;
        return (words_[static_cast<size_t>(v) >> 6] >> (v & 63)) & 1ULL;
    }
    int size() const { return n_; }

private:
    std::vector<std::uint64_t> words_;
    int n_ = 0;
};

}  // namespace tighthc
