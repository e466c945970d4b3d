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

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmat/densesim.hpp"
#include "qmat/expr.hpp"

namespace qmat {

// A compiled program is a sequence of steps over a register layout
// [index(3), data registers..., ancilla registers...]. Steps are listed in
// matrix-product order: the first step is the leftmost operator factor (the
// one applied last to a state), so step lists read like the formulas they
// implement. Repetition steps and shared sub-fragments keep nested
// commutator constructions representable and executable in logarithmic cost;
// fully unrolled step lists would be astronomically long at tight error
// targets.

enum class StepKind { Query, Fixed, Spectral, Sub, Repeat, AncillaInit };

enum class FixedKind {
    U1,          // block phase unitary diag(sqrt(-i) I, I, sqrt(i) I)
    U1Dag,
    P1, P1Dag,   // slot permutations
    P2, P2Dag,
    P3, P3Dag,
    Swap02,      // block swap sending X_3(A) to X_3(A^dag)
    SelectorExp  // e^{sign i X_3(S or S^dag) tau} for the selector matrix
};

const char* fixed_kind_name(FixedKind k);

/// How a spectral step derives its scalar transform from a registered
/// function h: directly, via the odd extension sign(x) h(|x|), as the odd
/// factor h(x)/x of an even function, as the odd factor of the even half of
/// a general function, or as the odd half (h(x) - h(-x))/2.
enum class FnVariant { Direct = 0, OddExt, GFactor, GFactorEven, OddPart };

struct Step;
using StepBlock = std::vector<Step>;

struct Fragment;
using FragmentPtr = std::shared_ptr<const Fragment>;

struct Step {
    StepKind kind = StepKind::Query;
    std::vector<int> targets;  // register indices, first most significant

    // Query: e^{sign i X_slot(A_name) tau}
    std::string name;
    int slot = 3;
    int sign = 1;
    double tau = 0.0;

    // Fixed
    FixedKind fixed = FixedKind::U1;
    bool selector_dag = false;  // SelectorExp embeds S^dag instead of S

    // Spectral: realizes sum_l e^{i h(l) t} |u_l><u_l| on the generator
    // recovered from the child fragment executed at t_ref. Eigenvalues
    // within zero_tol of 0 (the embedding's middle block) map to phase 0.
    std::string fn;
    int fn_variant = 0;
    double t = 0.0;
    double t_ref = 0.0;
    double zero_tol = 1e-9;

    // Sub / Spectral child
    FragmentPtr child;
    bool dagger = false;

    // Repeat: (product of body)^count
    std::uint64_t count = 0;
    StepBlock body;

    // AncillaInit: declares the register starts in |0>
    int reg = -1;
};

/// A step block over its own register world. Fragments are shared between
/// steps; the executor folds each one once.
struct Fragment {
    std::vector<Register> registers;
    StepBlock steps;
};

/// Per-node error-budget bookkeeping. At every node,
/// sum(child eps_alloc * occurrences) + eps_own <= eps_alloc.
struct BudgetEntry {
    std::string node;        // e.g. "mult", "leaf:A1", "had.outer"
    double eps_alloc = 0.0;  // budget handed to this node (per occurrence)
    double eps_own = 0.0;    // share consumed by this node's own repetitions
    double reps = 0.0;       // n or n' (0 when exact)
    double occurrences = 1.0;
    std::vector<BudgetEntry> children;
};

struct CompiledProgram {
    std::vector<Register> registers;  // [index, data..., ancilla...]
    StepBlock steps;
    double t = 0.0;
    double eps = 0.0;
    bool controlled = false;  // control qubit implicit, most significant
    BudgetEntry budget;
    std::map<std::string, double> query_tally;  // per input matrix
    double total_queries = 0.0;
    double norm_bound = 0.0;  // spectral bound on the generator X_3(f)
    int depth = 0;            // expression tree depth (diagnostic)

    Index data_dim() const;   // product of data register dims
    Index space_dim() const;  // product of all register dims (no control)
};

/// Lower an expression to a program approximating e^{i X_3(f) t} within eps
/// (spectral norm) on its data sector. Hadamard-product nodes extend the
/// space by ancilla registers initialized to |0>; the contract holds on the
/// all-ancillas-zero sector.
CompiledProgram compile(const ExprNode& node, double t, double eps, bool controlled,
                        const Backend& backend,
                        const FunctionRegistry& functions = FunctionRegistry::builtins());

/// Folds the program into its operator on the register space; repeated
/// blocks are folded once and raised by fast powering. With controlled=true
/// the result is I (+) U, control most significant.
Matrix execute(const CompiledProgram& program, const Backend& backend,
               const FunctionRegistry& functions = FunctionRegistry::builtins());

/// Operator restricted to the all-ancillas-zero sector (rows and columns
/// with every ancilla digit 0); the compile contract targets this subspace.
Matrix restrict_to_ancilla_sector(const Matrix& u, const std::vector<Register>& regs);

/// Executed program applied to a state over the program's registers
/// (uncontrolled form).
QuantumState apply_program(const CompiledProgram& program, const Backend& backend,
                           const QuantumState& state,
                           const FunctionRegistry& functions = FunctionRegistry::builtins());

nlohmann::ordered_json program_to_json(const CompiledProgram& program);
CompiledProgram program_from_json(const nlohmann::json& j);

/// Spectral-norm distance between the executed program (ancilla sector) and
/// the brute-force oracle exponential e^{i X_3(oracle_eval(node)) t}.
double verify_deviation(const ExprNode& node, const CompiledProgram& program,
                        const Backend& backend,
                        const FunctionRegistry& functions = FunctionRegistry::builtins());

/// Compositional spectral-norm bound on X_3(f) without compiling (registry
/// norms propagated through the tree).
double norm_bound_estimate(const ExprNode& node, const Backend& backend,
                           const FunctionRegistry& functions = FunctionRegistry::builtins());

}  // namespace qmat
