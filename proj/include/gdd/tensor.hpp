#ifndef GDD_TENSOR_HPP
#define GDD_TENSOR_HPP

#include <cassert>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace gdd {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Dense log-domain table. C-order: the last axis varies fastest.
struct Tensor {
    std::vector<int> dims;
    std::vector<double> vals;

    Tensor() = default;
    explicit Tensor(std::vector<int> d, double fill = 0.0)
        : dims(std::move(d)), vals(numel(dims), fill) {}

    static std::size_t numel(const std::vector<int>& d) {
        std::size_t n = 1;
        for (int x : d) n *= static_cast<std::size_t>(x);
        return n;
    }
    std::size_t size() const { return vals.size(); }
    int rank() const { return static_cast<int>(dims.size()); }
};

inline void unravel(std::size_t idx, const std::vector<int>& dims, std::vector<int>& out) {
    out.resize(dims.size());
    for (int a = static_cast<int>(dims.size()) - 1; a >= 0; --a) {
        out[a] = static_cast<int>(idx % static_cast<std::size_t>(dims[a]));
        idx /= static_cast<std::size_t>(dims[a]);
    }
}

inline std::size_t ravel(const std::vector<int>& multi, const std::vector<int>& dims) {
    std::size_t idx = 0;
    for (std::size_t a = 0; a < dims.size(); ++a)
        idx = idx * static_cast<std::size_t>(dims[a]) + static_cast<std::size_t>(multi[a]);
    return idx;
}

// Output axis j takes input axis perm[j].
inline Tensor permute_axes(const Tensor& in, const std::vector<int>& perm) {
    assert(perm.size() == in.dims.size());
    std::vector<int> out_dims(perm.size());
    for (std::size_t j = 0; j < perm.size(); ++j) out_dims[j] = in.dims[perm[j]];
    Tensor out(out_dims);
    std::vector<int> omi, imi(perm.size());
    for (std::size_t o = 0; o < out.size(); ++o) {
        unravel(o, out.dims, omi);
        for (std::size_t j = 0; j < perm.size(); ++j) imi[perm[j]] = omi[j];
        out.vals[o] = in.vals[ravel(imi, in.dims)];
    }
    return out;
}

} // namespace gdd

#endif
