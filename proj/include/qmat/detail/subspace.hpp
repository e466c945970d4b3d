// Copyright 2026 The qmat authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <vector>

#include "qmat/matrix.hpp"
#include "qmat/state.hpp"

namespace qmat::detail {

// Offsets for acting on a register subset of a product space. `sub[m]`
// enumerates composite offsets of the target registers (target list order,
// first most significant), `rest[k]` the offsets of the remaining registers.
struct SubspaceMap {
    std::vector<Index> sub;
    std::vector<Index> rest;
};

inline SubspaceMap subspace_map(const std::vector<Register>& regs, const std::vector<int>& targets) {
    const int nregs = static_cast<int>(regs.size());
    std::vector<Index> strides(static_cast<std::size_t>(nregs));
    Index s = 1;
    for (int i = nregs - 1; i >= 0; --i) {
        strides[static_cast<std::size_t>(i)] = s;
        s *= regs[static_cast<std::size_t>(i)].dim;
    }
    std::vector<bool> is_target(static_cast<std::size_t>(nregs), false);
    for (int t : targets) is_target[static_cast<std::size_t>(t)] = true;

    SubspaceMap map;
    map.sub.assign(1, 0);
    for (int t : targets) {
        std::vector<Index> next;
        next.reserve(map.sub.size() * static_cast<std::size_t>(regs[static_cast<std::size_t>(t)].dim));
        for (Index base : map.sub)
            for (Index d = 0; d < regs[static_cast<std::size_t>(t)].dim; ++d)
                next.push_back(base + d * strides[static_cast<std::size_t>(t)]);
        map.sub = std::move(next);
    }
    map.rest.assign(1, 0);
    for (int i = 0; i < nregs; ++i) {
        if (is_target[static_cast<std::size_t>(i)]) continue;
        std::vector<Index> next;
        next.reserve(map.rest.size() * static_cast<std::size_t>(regs[static_cast<std::size_t>(i)].dim));
        for (Index base : map.rest)
            for (Index d = 0; d < regs[static_cast<std::size_t>(i)].dim; ++d)
                next.push_back(base + d * strides[static_cast<std::size_t>(i)]);
        map.rest = std::move(next);
    }
    return map;
}

inline Vector apply_to_vector(const Vector& v, const Matrix& u, const SubspaceMap& map) {
    const Index m = static_cast<Index>(map.sub.size());
    Vector out = v;
    Vector x(m), y(m);
    for (Index base : map.rest) {
        for (Index i = 0; i < m; ++i) x(i) = v(base + map.sub[static_cast<std::size_t>(i)]);
        y = u * x;
        for (Index i = 0; i < m; ++i) out(base + map.sub[static_cast<std::size_t>(i)]) = y(i);
    }
    return out;
}

/// op acting on `targets`, identity elsewhere, as a full-space matrix.
inline Matrix expand_operator(const std::vector<Register>& regs, const std::vector<int>& targets,
                              const Matrix& op) {
    SubspaceMap map = subspace_map(regs, targets);
    Index total = 1;
    for (const auto& r : regs) total *= r.dim;
    Matrix out = Matrix::Zero(total, total);
    const Index m = static_cast<Index>(map.sub.size());
    for (Index base : map.rest)
        for (Index i = 0; i < m; ++i)
            for (Index j = 0; j < m; ++j)
                out(base + map.sub[static_cast<std::size_t>(i)],
                    base + map.sub[static_cast<std::size_t>(j)]) = op(i, j);
    return out;
}

}  // namespace qmat::detail
