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

#include <complex>
#include <cstdint>

#include <Eigen/Dense>

namespace qmat {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Index = Eigen::Index;

/// Kronecker product, left factor most significant (row-major composite
/// index i*cols(B)+k). All tensor-space conventions in the library follow
/// this ordering.
Matrix kron(const Matrix& a, const Matrix& b);
Vector kron(const Vector& a, const Vector& b);

/// Largest entry magnitude, max_ij |A_ij|.
double max_norm(const Matrix& a);

/// Largest singular value.
double spectral_norm(const Matrix& a);

bool is_hermitian(const Matrix& a, double tol);
bool is_unitary(const Matrix& a, double tol);

/// A^e by repeated squaring; e may be very large (loop repetition counts).
Matrix matrix_power(Matrix base, std::uint64_t e);

}  // namespace qmat
