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

#include "qmat/embedding.hpp"

#include <cmath>

#include "qmat/errors.hpp"

namespace qmat::embedding {

namespace {

void check_slot(int slot) {
    if (slot < 1 || slot > 3)
        throw Error(ErrorCategory::Internal, "BadSlot", "slot must be 1, 2 or 3");
}

// Row/column block pair holding A for each slot.
constexpr int kBlockRow[4] = {0, 0, 1, 0};
constexpr int kBlockCol[4] = {0, 1, 2, 2};

}  // namespace

Matrix r_matrix(int slot) {
    check_slot(slot);
    Matrix r = Matrix::Zero(3, 3);
    r(kBlockRow[slot], kBlockCol[slot]) = 1.0;
    return r;
}

EmbeddedHermitian embed(const Matrix& a, int slot) {
    check_slot(slot);
    if (a.rows() != a.cols())
        throw Error(ErrorCategory::Dim, "NonSquare", "embedding requires a square matrix");
    const Index n = a.rows();
    Matrix x = Matrix::Zero(3 * n, 3 * n);
    const int br = kBlockRow[slot], bc = kBlockCol[slot];
    x.block(br * n, bc * n, n, n) = a;
    x.block(bc * n, br * n, n, n) = a.adjoint();
    return {slot, n, std::move(x)};
}

EmbeddedVector embed_vector(const Vector& v, int which) {
    if (which != 1 && which != 2)
        throw Error(ErrorCategory::Internal, "BadSlot", "embedded vectors use which in {1,2}");
    if (v.size() == 0) throw Error(ErrorCategory::Dim, "EmptyVector", "cannot embed an empty vector");
    const Index n = v.size();
    Vector out = Vector::Zero(3 * n);
    out.segment(which == 1 ? 0 : 2 * n, n) = v;
    return {which, n, std::move(out)};
}

Matrix permutation3(int i) {
    check_slot(i);
    Matrix p = Matrix::Zero(3, 3);
    if (i == 1) {  // cycle |0>->|1>->|2>->|0>
        p(1, 0) = p(2, 1) = p(0, 2) = 1.0;
    } else if (i == 2) {  // swap |0><->|1>
        p(1, 0) = p(0, 1) = p(2, 2) = 1.0;
    } else {  // swap |1><->|2>
        p(0, 0) = p(2, 1) = p(1, 2) = 1.0;
    }
    return p;
}

Matrix permutation(int i, Index n) { return kron(permutation3(i), Matrix::Identity(n, n)); }

Matrix slot_conjugator(int slot, Index n) {
    check_slot(slot);
    // X_1 = P_3 X_3 P_3^dag and X_2 = P_1 P_3 X_3 (P_1 P_3)^dag, both read off
    // the permutation relations; slot 3 needs no conjugation.
    if (slot == 3) return Matrix::Identity(3 * n, 3 * n);
    if (slot == 1) return permutation(3, n);
    return permutation(1, n) * permutation(3, n);
}

Matrix phase_unitary_u1(Index n) {
    const double s = std::sqrt(0.5);
    Matrix u = Matrix::Zero(3 * n, 3 * n);
    u.block(0, 0, n, n) = Complex(s, -s) * Matrix::Identity(n, n);  // e^{-i pi/4}
    u.block(n, n, n, n) = Matrix::Identity(n, n);
    u.block(2 * n, 2 * n, n, n) = Complex(s, s) * Matrix::Identity(n, n);  // e^{+i pi/4}
    return u;
}

Matrix swap02(Index n) {
    Matrix p = Matrix::Zero(3, 3);
    p(2, 0) = p(1, 1) = p(0, 2) = 1.0;
    return kron(p, Matrix::Identity(n, n));
}

Matrix selector_matrix(Index n) {
    if (n < 1) throw Error(ErrorCategory::Dim, "EmptyVector", "selector dimension must be positive");
    Matrix s = Matrix::Zero(n * n, n * n);
    for (Index i = 0; i < n; ++i) s(i * n + 0, i * n + i) = 1.0;
    return s;
}

Matrix unembed(const Matrix& x, int slot, double tol) {
    check_slot(slot);
    if (x.rows() != x.cols() || x.rows() % 3 != 0)
        throw Error(ErrorCategory::Dim, "MalformedEmbedding", "embedded matrix must be square with side 3N");
    const Index n = x.rows() / 3;
    const int br = kBlockRow[slot], bc = kBlockCol[slot];
    const double scale = std::max(1.0, max_norm(x));
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            if ((r == br && c == bc) || (r == bc && c == br)) continue;
            if (max_norm(x.block(r * n, c * n, n, n)) > tol * scale)
                throw Error(ErrorCategory::Domain, "MalformedEmbedding",
                            "nonzero weight outside the slot block pair");
        }
    }
    return x.block(br * n, bc * n, n, n);
}

Matrix unembed(const EmbeddedHermitian& x, double tol) { return unembed(x.matrix, x.slot, tol); }

}  // namespace qmat::embedding
