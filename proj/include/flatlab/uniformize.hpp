#pragma once

// {2^{-jT}}-uniform cell sets: exact verification and a greedy extraction
// (popular rounded branching class, then trimming to exact branching).

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "flatlab/core.hpp"
#include "flatlab/grid.hpp"

namespace flatlab {

struct UniformSetRecord {
    int T = 1;
    int m = 1;
    std::vector<std::int64_t> branching;  // N_1..N_m
    CellSet cells;
};

struct UniformityViolation {
    int level = 0;  // j in 1..m
    Index parent{0, 0};  // Q at scale 2^{-(j-1)T}
    std::int64_t found = 0;
    std::int64_t expected = 0;
};

struct UniformVerdict {
    bool uniform = false;
    std::vector<std::int64_t> branching;
    std::optional<UniformityViolation> violation;
};

namespace detail {

inline void check_block_scale(const CellSet& cells, int T, int m) {
    if (T < 1 || m < 1) throw validation_error("uniformize: T and m must be >= 1");
    if (cells.scale().log2_inverse() != m * T)
        throw validation_error("uniformize: cell scale must be 2^{-mT} (m T = " + std::to_string(m * T) + ")");
}

// Children (at level j) of every node at level j - 1, in canonical order.
inline std::map<Index, std::vector<Index>> children_at(const std::vector<Index>& cells, int T, int m, int j) {
    std::map<Index, std::vector<Index>> out;
    for (const auto& c : cells) {
        const Index child = coarsen_index(c, (m - j) * T);
        const Index parent = coarsen_index(c, (m - j + 1) * T);
        auto& v = out[parent];
        if (v.empty() || v.back() != child) v.push_back(child);
    }
    for (auto& [k, v] : out) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return out;
}

}  // namespace detail

inline UniformVerdict verify_uniform(const CellSet& cells, int T, int m) {
    detail::check_block_scale(cells, T, m);
    if (cells.empty()) throw validation_error("verify_uniform: empty cell set");
    UniformVerdict v;
    const std::vector<Index> list(cells.begin(), cells.end());
    for (int j = 1; j <= m; ++j) {
        auto ch = detail::children_at(list, T, m, j);
        std::int64_t expected = -1;
        for (const auto& [q, kids] : ch) {
            const auto n = static_cast<std::int64_t>(kids.size());
            if (expected < 0) {
                expected = n;
                if (!is_power_of_two(n)) {
                    v.violation = UniformityViolation{j, q, n, floor_power_of_two(n)};
                    return v;
                }
            }
            if (n != expected) {
                v.violation = UniformityViolation{j, q, n, expected};
                return v;
            }
        }
        v.branching.push_back(expected);
    }
    v.uniform = true;
    return v;
}

namespace detail {

struct Tree {
    int T, m;
    // levels[j]: node -> list of child nodes (level j + 1), sorted.
    std::vector<std::map<Index, std::vector<Index>>> kids;
    std::vector<std::map<Index, std::int64_t>> size;  // cells below each node

    Tree(const std::vector<Index>& cells, int T_, int m_) : T(T_), m(m_), kids(m + 1), size(m + 1) {
        for (const auto& c : cells)
            for (int j = 0; j <= m; ++j) {
                const Index node = coarsen_index(c, (m - j) * T);
                ++size[j][node];
                if (j < m) {
                    auto& v = kids[j][node];
                    const Index child = coarsen_index(c, (m - j - 1) * T);
                    if (std::find(v.begin(), v.end(), child) == v.end()) v.push_back(child);
                }
            }
        for (auto& lvl : kids)
            for (auto& [k, v] : lvl) std::sort(v.begin(), v.end());
    }
};

// Trim the candidate cells to exact branching N; empty result if no root is viable.
inline std::vector<Index> trim_to(const std::vector<Index>& cells, int T, int m, const std::vector<std::int64_t>& N) {
    Tree tr(cells, T, m);
    std::vector<std::map<Index, bool>> viable(m + 1);
    for (const auto& [node, s] : tr.size[m]) viable[m][node] = true;
    for (int j = m - 1; j >= 0; --j)
        for (const auto& [node, ch] : tr.kids[j]) {
            std::int64_t good = 0;
            for (const auto& c : ch) good += viable[j + 1][c] ? 1 : 0;
            viable[j][node] = good >= N[j];
        }
    std::vector<Index> frontier;
    for (const auto& [node, ok] : viable[0])
        if (ok) frontier.push_back(node);
    for (int j = 0; j < m; ++j) {
        std::vector<Index> next;
        for (const auto& node : frontier) {
            std::vector<Index> ch;
            for (const auto& c : tr.kids[j][node])
                if (viable[j + 1][c]) ch.push_back(c);
            std::stable_sort(ch.begin(), ch.end(), [&](const Index& a, const Index& b) {
                const auto sa = tr.size[j + 1][a], sb = tr.size[j + 1][b];
                if (sa != sb) return sa > sb;
                return morton_code(a) < morton_code(b);
            });
            ch.resize(static_cast<std::size_t>(N[j]));
            next.insert(next.end(), ch.begin(), ch.end());
        }
        frontier = std::move(next);
    }
    std::sort(frontier.begin(), frontier.end());
    return frontier;
}

// Rounded branching vector of each cell, keyed by cell.
inline std::vector<std::vector<std::int64_t>> branching_vectors(const std::vector<Index>& cells, int T, int m) {
    std::vector<std::map<Index, std::vector<Index>>> ch(m + 1);
    for (int j = 1; j <= m; ++j) ch[j] = children_at(cells, T, m, j);
    std::vector<std::vector<std::int64_t>> out(cells.size(), std::vector<std::int64_t>(m));
    parallel_tiles(cells.size(), 256, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
            for (int j = 1; j <= m; ++j) {
                const Index parent = coarsen_index(cells[i], (m - j + 1) * T);
                out[i][j - 1] = floor_power_of_two(static_cast<std::int64_t>(ch[j].at(parent).size()));
            }
    });
    return out;
}

}  // namespace detail

struct ExtractionResult {
    std::vector<UniformSetRecord> records;
    CellSet remainder;
    std::size_t input_size = 0;
    std::size_t target_remainder = 0;  // ceil(delta^eps |P|)
    int rounds = 0;
    bool partial = false;  // round cap hit with remainder above target
    // Size guarantees, checked after the fact.
    double record_threshold = 0.0;  // delta^{2 eps} |P|
    std::size_t records_meeting_threshold = 0;
    bool remainder_ok = false;
};

inline ExtractionResult extract_uniform(const CellSet& P, int T, int m, double epsilon, int round_cap = 256) {
    detail::check_block_scale(P, T, m);
    if (P.empty()) throw validation_error("extract_uniform: empty input");
    if (!(epsilon > 0.0)) throw validation_error("extract_uniform: epsilon must be positive");
    if (round_cap < 1) throw validation_error("extract_uniform: round cap must be >= 1");
    const double delta = std::ldexp(1.0, -m * T);
    ExtractionResult res;
    res.input_size = P.size();
    res.target_remainder = static_cast<std::size_t>(std::ceil(std::pow(delta, epsilon) * P.size() - 1e-12));
    res.record_threshold = std::pow(delta, 2 * epsilon) * P.size();

    std::vector<Index> rest(P.begin(), P.end());
    // at least one round, so tiny inputs still yield a record
    while (!rest.empty() && (res.rounds == 0 || rest.size() > res.target_remainder)) {
        if (res.rounds >= round_cap) {
            res.partial = true;
            break;
        }
        ++res.rounds;
        auto vecs = detail::branching_vectors(rest, T, m);
        std::map<std::vector<std::int64_t>, std::size_t> pop;
        for (const auto& v : vecs) ++pop[v];
        std::vector<std::pair<std::vector<std::int64_t>, std::size_t>> classes(pop.begin(), pop.end());
        // Most popular first; map order already gives lexicographic ties.
        std::stable_sort(classes.begin(), classes.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

        std::vector<Index> picked;
        std::vector<std::int64_t> N;
        for (const auto& [cls, cnt] : classes) {
            std::vector<Index> members;
            for (std::size_t i = 0; i < rest.size(); ++i)
                if (vecs[i] == cls) members.push_back(rest[i]);
            picked = detail::trim_to(members, T, m, cls);
            if (picked.empty()) picked = detail::trim_to(rest, T, m, cls);
            if (!picked.empty()) {
                N = cls;
                break;
            }
        }
        if (picked.empty()) {
            N.assign(static_cast<std::size_t>(m), 1);
            picked = detail::trim_to(rest, T, m, N);
        }
        UniformSetRecord rec{T, m, N, CellSet(P.scale(), picked)};
        auto verdict = verify_uniform(rec.cells, T, m);
        if (!verdict.uniform || verdict.branching != N)
            throw property_error("extract_uniform: emitted record failed exact uniformity verification");
        res.records.push_back(std::move(rec));
        std::vector<Index> keep;
        keep.reserve(rest.size());
        std::set_difference(rest.begin(), rest.end(), picked.begin(), picked.end(), std::back_inserter(keep));
        rest = std::move(keep);
    }
    res.remainder = CellSet(P.scale(), rest);
    res.remainder_ok = rest.size() <= res.target_remainder;
    for (const auto& r : res.records)
        if (static_cast<double>(r.cells.size()) >= res.record_threshold) ++res.records_meeting_threshold;
    return res;
}

}  // namespace flatlab
