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

#include "qmat/matrix.hpp"

namespace qmat::embedding {

// A possibly non-Hermitian N x N matrix A is placed into a Hermitian 3N x 3N
// operator X_i(A) = R_i (x) A + R_i^dag (x) A^dag, where R_i is one of three
// 3x3 matrices with a single unit entry. The slot index i in {1,2,3} selects
// which off-diagonal block pair holds A:
//   slot 1 -> blocks (0,1)/(1,0), slot 2 -> (1,2)/(2,1), slot 3 -> (0,2)/(2,0).
// Embedded vectors live in block 0 (V_1) or block 2 (V_2), which makes
// V_1(x)^dag X_3(A) V_2(y) = x^dag A y.

/// Hermitian embedding of A in the given slot.
struct EmbeddedHermitian {
    int slot;  // 1, 2 or 3
    Index base_dim;
    Matrix matrix;  // 3N x 3N, Hermitian
};

struct EmbeddedVector {
    int which;  // 1 or 2
    Index base_dim;
    Vector vector;  // length 3N, supported on block 0 (which=1) or block 2 (which=2)
};

/// The 3x3 single-entry matrix R_slot.
Matrix r_matrix(int slot);

/// X_slot(A). Throws NonSquare for rectangular input.
EmbeddedHermitian embed(const Matrix& a, int slot);

/// r_which (x) v. Throws EmptyVector.
EmbeddedVector embed_vector(const Vector& v, int which);

/// Block permutation P_i (x) I_N with P_i X_i(A) P_i^dag = X_{i%3+1}(A).
Matrix permutation(int i, Index n);

/// The 3x3 block form of P_i.
Matrix permutation3(int i);

/// Conjugator Q with Q X_3(A) Q^dag = X_slot(A); identity for slot 3.
Matrix slot_conjugator(int slot, Index n);

/// Block-diagonal diag(sqrt(-i) I, I, sqrt(i) I), principal branch, with
/// U_1 e^{iX_3(iM)} U_1^dag = e^{iX_3(M)}.
Matrix phase_unitary_u1(Index n);

/// Block swap of blocks 0 and 2; conjugation sends X_3(A) to X_3(A^dag).
Matrix swap02(Index n);

/// Selector S = sum_i |i><i| (x) |0><i| of size N^2 x N^2. Conjugation
/// compresses a tensor product onto entrywise pairs:
/// S (A (x) B) S^dag = (A o B) (x) |0><0|.
Matrix selector_matrix(Index n);

/// Reads A back out of its block. Throws MalformedEmbedding when blocks other
/// than the slot pair carry weight above `tol` (relative to the max entry).
Matrix unembed(const EmbeddedHermitian& x, double tol = 1e-9);
Matrix unembed(const Matrix& x, int slot, double tol = 1e-9);

}  // namespace qmat::embedding
