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

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "qmat/expr.hpp"
#include "qmat/matrix.hpp"
#include "qmat/registry.hpp"
#include "qmat/rng.hpp"
#include "qmat/state.hpp"

namespace qmat {

/// Backend configuration. Everything that influences results is recorded in
/// run reports so seeded runs are reproducible.
struct SimConfig {
    std::uint64_t seed = 1;

    enum class Mode { CircuitQpe, IdealSampler };
    /// CircuitQpe runs the phase-estimation circuit on a statevector;
    /// IdealSampler draws (eigenvector, eigenvalue) pairs from the exact
    /// spectrum of the executed program and adds relative noise eps_sigma.
    /// The mode is always explicit, never switched silently.
    Mode mode = Mode::CircuitQpe;

    int qpe_bits = 6;
    double tau_max = 1.0;       // cap on |tau| * max-norm per primitive query
    double c_add = 2.0;         // repetition constant, n = ceil(c_add t^2 / eps)
    double c_mult = 2.0;        // repetition constant, n' = ceil(c_mult t^2 / eps)
    double rep_cap = 1e15;      // BudgetInfeasible above this repetition count
    double postselect_floor = 1e-9;
    double eps_sigma = 0.05;    // ideal-sampler relative eigenvalue noise
    double confidence_a = 0.01; // target failure probability
    double chebyshev_c = 1.0;   // constant C in the sample-count formulas
    Index circuit_dim_cap = 4096;  // max joint statevector dimension for QPE
    double sigma_band_lo = 0.1; // singular values outside this band void the
    double sigma_band_hi = 10.0;  // reported sampling guarantee (diagnostic)
};

/// Dense classical realization of the input model: exact unitaries generated
/// by embedded matrices, controlled variants, and query tallies.
class Backend {
  public:
    explicit Backend(const MatrixRegistry& registry, SimConfig cfg = {});

    const MatrixRegistry& registry() const { return *registry_; }
    const SimConfig& config() const { return cfg_; }
    SimConfig& config() { return cfg_; }

    /// e^{iHt} via Hermitian eigendecomposition (exact to machine precision).
    static Matrix expm_hermitian(const Matrix& h, double t);

    /// Recovers H from U = e^{iHt} with eigenphases taken in (-pi, pi].
    static Matrix hermitian_log(const Matrix& u, double t);

    /// e^{sign i X_slot(A_name) tau}; slots 1 and 2 are realized by
    /// permutation conjugation of the slot-3 unitary. With controlled=true
    /// returns I (+) U on a doubled space, control qubit most significant.
    /// Every call is tallied per name.
    Matrix query_exp(const std::string& name, int slot, int sign, double tau,
                     bool controlled = false) const;

    std::uint64_t query_count() const { return total_queries_; }
    std::uint64_t query_count(const std::string& name) const;
    void reset_query_counts();

  private:
    const MatrixRegistry* registry_;
    SimConfig cfg_;
    mutable std::map<std::string, std::uint64_t> queries_;
    mutable std::uint64_t total_queries_ = 0;
};

/// f applied to the eigenvalues of a Hermitian matrix.
Matrix hermitian_function(const Matrix& h, const std::function<double(double)>& f);

// ---------------------------------------------------------------------------
// Quantum phase estimation (circuit level).
//
// The phase register is m qubit registers prepended to the state, most
// significant first. The forward pass applies a Hadamard to each phase qubit,
// bit-controlled powers U^{2^j}, and the inverse Fourier transform on the
// phase register. Outcome k encodes the eigenphase 2*pi*k/2^m of U, reported
// in (-pi, pi].

/// Prepend m phase qubits in |0...0> to a pure state.
QuantumState qpe_attach_phase(const QuantumState& system, int m);

/// Forward QPE pass. `system_targets` are the registers U acts on (the phase
/// qubits occupy registers [0, m)). Throws when the joint dimension exceeds
/// cfg.circuit_dim_cap.
QuantumState qpe_forward(const QuantumState& joint, const Matrix& u, int m,
                         const std::vector<int>& system_targets, const SimConfig& cfg);

/// Exact inverse of the forward pass.
QuantumState qpe_inverse(const QuantumState& joint, const Matrix& u, int m,
                         const std::vector<int>& system_targets, const SimConfig& cfg);

struct EigenSample {
    double raw_phase = 0.0;            // in (-pi, pi]
    double eigenvalue_estimate = 0.0;  // raw_phase / t_pe
    int bits = 0;
    double t_pe = 1.0;
    std::uint64_t outcome = 0;  // phase register integer
};

double phase_from_outcome(std::uint64_t k, int m);  // maps to (-pi, pi]

/// One QPE round on `system` with generator bound `norm_bound` (caller
/// supplied; PrecisionOverflow when norm_bound * t_pe > pi(1 - 2^-m)).
/// Returns the sampled eigenvalue and the post-measurement system state.
std::pair<EigenSample, QuantumState> phase_estimate(const QuantumState& system, const Matrix& u,
                                                    int m, double t_pe, double norm_bound,
                                                    Rng& rng, const SimConfig& cfg);

/// Controlled rotation of a fresh ancilla qubit by the eigenvalue register
/// (Eq.-style amplitudes sqrt(1 - c^2 l^2)|0> + c l |1>), uncomputation of
/// the phase register, and postselection on ancilla outcome 1.
/// `joint` must be a forward-QPE output. Returns the postselected state
/// (phase qubits retained, approximately |0...0>) and the success
/// probability sum_k |gamma_k|^2 c^2 lambda_k^2.
std::pair<QuantumState, double> controlled_rotation_and_postselect(
    const QuantumState& joint, double c, const Matrix& u, int m,
    const std::vector<int>& system_targets, double t_pe, const SimConfig& cfg);

// ---------------------------------------------------------------------------
// Spectral sampling.

/// Uniform eigenvector sampling of an executed unitary's generator,
/// restricted to the block-0/2 subspace of the slot register (the +-sigma
/// sector; the middle block of an embedding carries only trivial zeros) with
/// every ancilla register in |0>.
class SpectralSampler {
  public:
    /// u is the executed program unitary at time t over `regs`
    /// ([index, data..., ancilla...]); `norm_bound` bounds the generator.
    SpectralSampler(const Matrix& u, double t, std::vector<Register> regs, double norm_bound,
                    const SimConfig& cfg);

    /// Number of sector states (2N for data dimension N).
    Index sector_dim() const { return static_cast<Index>(sector_indices_.size()); }
    double norm_bound() const { return norm_bound_; }

    /// One eigenvalue draw. Ideal mode: exact eigenvalue with relative
    /// Gaussian noise eps_sigma. Circuit mode: sector basis state -> QPE ->
    /// measured estimate at resolution 2*pi / (2^m t_pe).
    double sample(Rng& rng) const;

    /// Same draw with the full sample record.
    EigenSample sample_detailed(Rng& rng) const;

    /// Effective relative eigenvalue error for reporting: eps_sigma in ideal
    /// mode, half a grid step relative to sigma_band_lo in circuit mode.
    double effective_eps_sigma() const;

    double t_pe() const { return t_; }
    int bits() const { return bits_; }

  private:
    std::vector<Register> regs_;
    Matrix u_;
    double t_;
    double norm_bound_;
    SimConfig cfg_;
    int bits_;
    std::vector<Index> sector_indices_;
    // ideal mode data
    std::vector<double> eigenvalues_;
    std::vector<double> weights_;
};

// ---------------------------------------------------------------------------
// Brute-force oracle. Evaluates f({A_j}) directly with dense primitives.
// Used only by tests and the `verify` command, never by the compiler.
Matrix oracle_eval(const ExprNode& node, const MatrixRegistry& registry,
                   const FunctionRegistry& functions = FunctionRegistry::builtins());

}  // namespace qmat
