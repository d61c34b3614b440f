#pragma once

// Monte-Carlo kernels for the selection probabilities
//
//   p_a(u, w) = E_Z prod_{b != a} Phi( sqrt(u_b) (w_a/u_a - w_b/u_b + Z/sqrt(u_a)) ),
//
// evaluated on a caller-supplied block of draws Z^(1..M) shared by every arm.
// Two implementations: a serial reference that accumulates directly, and an
// OpenMP kernel that fans the draws out over threads into a scratch buffer and
// then reduces each arm in draw order. Both evaluate identical expressions in
// identical order, so their outputs agree bit for bit.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace tsdyn::kernels {

// Per-state quantities hoisted out of the draw loop.
struct SelectionGeometry {
    std::vector<double> ratio;       // w_a / u_a
    std::vector<double> sqrt_u;      // sqrt(u_a)
    std::vector<double> inv_sqrt_u;  // 1 / sqrt(u_a)

    void assign(std::span<const double> u, std::span<const double> w) {
        const std::size_t m = u.size();
        ratio.resize(m);
        sqrt_u.resize(m);
        inv_sqrt_u.resize(m);
        for (std::size_t a = 0; a < m; ++a) {
            ratio[a] = w[a] / u[a];
            sqrt_u[a] = std::sqrt(u[a]);
            inv_sqrt_u[a] = 1.0 / sqrt_u[a];
        }
    }
};

template <class Dist>
inline double selection_product(const Dist& dist, const SelectionGeometry& g, std::size_t a,
                                double z) {
    const std::size_t m = g.ratio.size();
    const double shift = g.ratio[a] + z * g.inv_sqrt_u[a];
    double prod = 1.0;
    for (std::size_t b = 0; b < m; ++b) {
        if (b == a) continue;
        prod *= dist.cdf(g.sqrt_u[b] * (shift - g.ratio[b]));
    }
    return prod;
}

// raw[a] = (1/M) sum_l selection_product(a, z[l]).
template <class Dist>
void selection_mc_serial(const Dist& dist, const SelectionGeometry& g, std::span<const double> z,
                         std::span<double> raw) {
    const std::size_t m = g.ratio.size();
    const double inv_m = 1.0 / static_cast<double>(z.size());
    for (std::size_t a = 0; a < m; ++a) {
        double acc = 0.0;
        for (const double zl : z) acc += selection_product(dist, g, a, zl);
        raw[a] = acc * inv_m;
    }
}

template <class Dist>
void selection_mc_omp(const Dist& dist, const SelectionGeometry& g, std::span<const double> z,
                      std::span<double> raw, std::vector<double>& scratch, int threads) {
    const std::size_t m = g.ratio.size();
    const auto draws = static_cast<std::ptrdiff_t>(z.size());
    scratch.resize(z.size() * m);
    double* const out = scratch.data();

#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
    for (std::ptrdiff_t l = 0; l < draws; ++l) {
        for (std::size_t a = 0; a < m; ++a) {
            out[static_cast<std::size_t>(l) * m + a] = selection_product(dist, g, a, z[l]);
        }
    }

    const double inv_m = 1.0 / static_cast<double>(z.size());
    for (std::size_t a = 0; a < m; ++a) {
        double acc = 0.0;
        for (std::ptrdiff_t l = 0; l < draws; ++l) acc += out[static_cast<std::size_t>(l) * m + a];
        raw[a] = acc * inv_m;
    }
}

}  // namespace tsdyn::kernels
