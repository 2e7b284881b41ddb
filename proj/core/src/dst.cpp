#include "uxmc/dst.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "uxmc/errors.hpp"
#include "uxmc/parallel.hpp"

namespace uxmc {

std::string_view to_string(RegrowInit r) { return r == RegrowInit::Zero ? "zero" : "uniform"; }

RegrowInit parse_regrow_init(std::string_view s) {
    if (s == "zero") return RegrowInit::Zero;
    if (s == "uniform") return RegrowInit::Uniform;
    throw ConfigError("dst.regrow_init must be 'zero' or 'uniform', got '" + std::string(s) + "'");
}

std::size_t DstConfig::replaced_per_column(std::size_t fan_in) const {
    return static_cast<std::size_t>(std::floor(prune_fraction * static_cast<double>(fan_in)));
}

void DstConfig::validate(std::size_t fan_in, std::size_t in_dim) const {
    if (!(prune_fraction > 0.0 && prune_fraction < 1.0)) {
        throw ConfigError("dst.prune_fraction must lie in (0, 1), got " + std::to_string(prune_fraction));
    }
    if (!per_epoch && interval_steps == 0) throw ConfigError("dst.interval_steps must be positive");
    const std::size_t p = replaced_per_column(fan_in);
    if (p == 0) {
        throw ConfigError("dst: floor(" + std::to_string(prune_fraction) + " * " + std::to_string(fan_in) +
                          ") = 0 connections would be redistributed");
    }
    if (in_dim < fan_in || in_dim - fan_in < p) {
        throw ConfigError("dst: input dimension " + std::to_string(in_dim) + " leaves fewer than " +
                          std::to_string(p) + " unconnected rows for fan-in " + std::to_string(fan_in));
    }
}

double RedistributionReport::mean_pruned_magnitude() const noexcept {
    if (pruned_magnitudes.empty()) return 0.0;
    double sum = 0.0;
    for (float v : pruned_magnitudes) sum += v;
    return sum / static_cast<double>(pruned_magnitudes.size());
}

double RedistributionReport::max_pruned_magnitude() const noexcept {
    double best = 0.0;
    for (float v : pruned_magnitudes) best = std::max(best, static_cast<double>(v));
    return best;
}

template <typename T>
RedistributionReport prune_and_regrow(UniformSparseMatrix<T>& w, AdamMoments<T>& moments, const DstConfig& cfg,
                                      Rng& rng) {
    const std::size_t s = w.fan_in(), d = w.in_dim(), L = w.num_labels();
    if (s < 2) throw ConfigError("prune_and_regrow: fan-in must be at least 2");
    if (moments.m.size() != w.nnz() || moments.v.size() != w.nnz()) {
        throw DimensionError("prune_and_regrow: moments do not match the sparse weights");
    }
    const std::size_t p = cfg.replaced_per_column(s);
    if (p == 0) throw ConfigError("prune_and_regrow: no connection would be replaced");
    if (d - s < p) {
        throw ConfigError("prune_and_regrow: only " + std::to_string(d - s) + " structural zeros per column, need " +
                          std::to_string(p));
    }

    RedistributionReport report;
    report.per_column = p;
    report.columns = L;
    report.pruned_magnitudes.resize(p * L);

    const Rng base(rng.next_u64());
    const T init_bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(s)));
    // Dense enumeration of free rows beats rejection sampling once the
    // column covers a sizeable part of the input.
    const bool enumerate = d < 4 * s;

    parallel_for(L, [&](std::size_t begin, std::size_t end) {
        std::vector<std::size_t> order(s);
        std::vector<Index> fresh;
        std::vector<Index> free_rows;
        std::vector<Index> idx_new(s);
        std::vector<T> w_new(s), m_new(s), v_new(s);
        std::vector<std::size_t> perm(s);

        for (std::size_t j = begin; j < end; ++j) {
            Rng col_rng = base.split(j);
            auto idx = w.column_indices_mut(j);
            auto wt = w.column_weights(j);
            T* m = moments.m.data() + j * s;
            T* v = moments.v.data() + j * s;

            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return std::abs(wt[a]) < std::abs(wt[b]); });

            // Growth candidates exclude every row connected before the call,
            // including the ones about to be pruned.
            fresh.clear();
            if (enumerate) {
                free_rows.clear();
                std::size_t k = 0;
                for (Index r = 0; r < d; ++r) {
                    if (k < s && idx[k] == r) {
                        ++k;
                        continue;
                    }
                    free_rows.push_back(r);
                }
                for (std::size_t q = 0; q < p; ++q) {
                    const std::size_t pick = q + col_rng.below(free_rows.size() - q);
                    std::swap(free_rows[q], free_rows[pick]);
                    fresh.push_back(free_rows[q]);
                }
            } else {
                while (fresh.size() < p) {
                    const auto r = static_cast<Index>(col_rng.below(d));
                    if (std::binary_search(idx.begin(), idx.end(), r)) continue;
                    if (std::find(fresh.begin(), fresh.end(), r) != fresh.end()) continue;
                    fresh.push_back(r);
                }
            }

            std::size_t out = 0;
            for (std::size_t q = 0; q < p; ++q) {
                report.pruned_magnitudes[j * p + q] = static_cast<float>(std::abs(wt[order[q]]));
            }
            for (std::size_t q = p; q < s; ++q) {
                const std::size_t slot = order[q];
                idx_new[out] = idx[slot];
                w_new[out] = wt[slot];
                m_new[out] = m[slot];
                v_new[out] = v[slot];
                ++out;
            }
            for (std::size_t q = 0; q < p; ++q) {
                idx_new[out] = fresh[q];
                w_new[out] = cfg.regrow_init == RegrowInit::Zero
                                 ? T{0}
                                 : static_cast<T>(col_rng.uniform(-static_cast<double>(init_bound),
                                                                  static_cast<double>(init_bound)));
                m_new[out] = T{0};
                v_new[out] = T{0};
                ++out;
            }

            std::iota(perm.begin(), perm.end(), std::size_t{0});
            std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return idx_new[a] < idx_new[b]; });
            for (std::size_t q = 0; q < s; ++q) {
                idx[q] = idx_new[perm[q]];
                wt[q] = w_new[perm[q]];
                m[q] = m_new[perm[q]];
                v[q] = v_new[perm[q]];
            }
        }
    });
    return report;
}

template RedistributionReport prune_and_regrow(UniformSparseMatrix<float>&, AdamMoments<float>&, const DstConfig&,
                                               Rng&);
template RedistributionReport prune_and_regrow(UniformSparseMatrix<double>&, AdamMoments<double>&, const DstConfig&,
                                               Rng&);

}  // namespace uxmc
