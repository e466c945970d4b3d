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

#include <map>
#include <string>
#include <vector>

#include "qmat/matrix.hpp"
#include "qmat/rng.hpp"

namespace qmat {

enum class RegKind { Control, IndexSlot, Data, Ancilla, Phase, Rotation };

struct Register {
    std::string name;
    Index dim = 1;
    RegKind kind = RegKind::Data;
};

/// Pure-vector or density-matrix state over an ordered register list.
/// Composite indexing is row-major with the first register most significant.
/// Values are immutable snapshots: apply/project return new states.
class QuantumState {
  public:
    static QuantumState pure(std::vector<Register> regs, Vector amplitudes);
    static QuantumState density(std::vector<Register> regs, Matrix rho);

    bool is_pure() const { return pure_; }
    Index dim() const { return pure_ ? amps_.size() : rho_.rows(); }
    const std::vector<Register>& registers() const { return regs_; }
    const Vector& amplitudes() const { return amps_; }
    const Matrix& density_matrix() const { return rho_; }
    int register_index(const std::string& name) const;  // throws on unknown name

    /// Applies U to the listed registers (operator tensor order = target list
    /// order, first target most significant), identity elsewhere. Checks
    /// unitarity to 1e-8 and dimension agreement.
    QuantumState apply(const Matrix& u, const std::vector<int>& targets) const;

    /// Marginal outcome distribution of one register.
    std::vector<double> probabilities(int reg) const;

    /// Joint distribution over several registers (composite index in target
    /// list order, first target most significant).
    std::vector<double> probabilities_joint(const std::vector<int>& targets) const;

    /// Project several registers onto one composite value and renormalize.
    std::pair<QuantumState, double> project_joint(const std::vector<int>& targets,
                                                  Index value) const;

    /// Born-rule sampling without collapse; deterministic for a fixed rng.
    std::map<Index, std::uint64_t> measure(int reg, std::uint64_t shots, Rng& rng) const;

    /// Sample one outcome and collapse. Returns (outcome, posterior, probability).
    std::tuple<Index, QuantumState, double> measure_collapse(int reg, Rng& rng) const;

    /// Project a register onto a basis value and renormalize.
    /// Returns the projected state and the projection probability.
    std::pair<QuantumState, double> project(int reg, Index value) const;

    double norm() const;

  private:
    QuantumState() = default;
    std::vector<Register> regs_;
    Vector amps_;
    Matrix rho_;
    bool pure_ = true;

    Index stride(int reg) const;
    friend QuantumState tensor_append(const QuantumState&, const Register&, Index basis_value);
};

/// Appends a fresh register in a basis state (pure states only).
QuantumState tensor_append(const QuantumState& st, const Register& reg, Index basis_value);

/// Normalized embedded vector state |V_which(v)> on one 3N register pair
/// (index slot x data). Throws ZeroVector.
QuantumState prepare_state(const Vector& v, int which);

/// Density matrix I/N on a single register.
QuantumState maximally_mixed(Index n);

}  // namespace qmat
