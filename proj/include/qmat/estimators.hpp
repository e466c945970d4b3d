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

#include <json.hpp>

#include "qmat/compiler.hpp"
#include "qmat/densesim.hpp"

namespace qmat {

struct EstimationResult {
    Complex value{0.0, 0.0};
    bool value_is_complex = false;
    double std_error = 0.0;
    std::uint64_t samples = 0;     // shots m or eigenvalue samples T
    double confidence_a = 0.01;    // target failure probability
    double error_bound = 0.0;      // reported guarantee (see `bound_kind`)
    std::string bound_kind;        // "relative" or "absolute"
    nlohmann::ordered_json diagnostics;

    nlohmann::ordered_json to_json() const;
};

/// Hadamard-test estimate of <x|y> after normalization: m shots for the real
/// part and m for the imaginary part, each with standard error <= 1/sqrt(m).
EstimationResult estimate_inner_product(const Vector& x, const Vector& y, std::uint64_t m,
                                        std::uint64_t seed);

/// x^dag f y through the phase-estimation + controlled-rotation pipeline on
/// |V_2(y)>, postselected and Hadamard-tested against |V_1(x)>. The program
/// must be compiled with controlled=true.
EstimationResult estimate_quadratic_form(const Vector& x, const Vector& y,
                                         const CompiledProgram& program, const Backend& backend,
                                         std::uint64_t m, int qpe_bits, std::uint64_t seed);

/// One eigenvalue draw from uniform eigenvector sampling of the program's
/// generator (block-0/2 sector).
EigenSample sample_eigenvalue(const CompiledProgram& program, const Backend& backend, int qpe_bits,
                              double t_pe, std::uint64_t seed);

/// Schatten p-norm via (N/T sum |l_j|^p)^{1/p}. T = 0 auto-sizes from the
/// Chebyshev bound T = ceil(C K_p^2 (1+eps_sigma^2) / (eps^2 a)).
EstimationResult estimate_schatten_p(const CompiledProgram& program, const Backend& backend,
                                     double p, std::uint64_t T, double eps_sampling,
                                     double eps_sigma, double confidence_a, std::uint64_t seed);

/// Trace by shifted eigenvalue sampling. `shift_c` <= 0 requests the
/// automatic shift 1.1 * Frobenius norm of the operand. Non-Hermitian
/// operands are split into (f + f^dag)/2 and the Hermitian i(f - f^dag)
/// companion, each sampled separately.
EstimationResult estimate_trace(const CompiledProgram& program, const Backend& backend,
                                double shift_c, std::uint64_t T, double eps_sampling,
                                double confidence_a, std::uint64_t seed);

/// det(A) = exp(Tr log A) for Hermitian positive definite operands; the
/// program must lower fn:log(...). Error propagates through exp with the
/// Lipschitz constant K_e (1 when Tr log A stays nonpositive).
EstimationResult estimate_determinant(const CompiledProgram& log_program, const Backend& backend,
                                      std::uint64_t T, double eps_sampling, double confidence_a,
                                      std::uint64_t seed);

}  // namespace qmat
