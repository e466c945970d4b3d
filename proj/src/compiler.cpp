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

#include "qmat/compiler.hpp"

#include <cmath>
#include <functional>

#include "qmat/detail/subspace.hpp"
#include "qmat/embedding.hpp"
#include "qmat/errors.hpp"

namespace qmat {

const char* fixed_kind_name(FixedKind k) {
    switch (k) {
        case FixedKind::U1: return "U1";
        case FixedKind::U1Dag: return "U1dag";
        case FixedKind::P1: return "P1";
        case FixedKind::P1Dag: return "P1dag";
        case FixedKind::P2: return "P2";
        case FixedKind::P2Dag: return "P2dag";
        case FixedKind::P3: return "P3";
        case FixedKind::P3Dag: return "P3dag";
        case FixedKind::Swap02: return "swap02";
        case FixedKind::SelectorExp: return "selector_exp";
    }
    return "?";
}

namespace {

constexpr double kTiny = 1e-300;

Index regs_dim(const std::vector<Register>& regs) {
    Index d = 1;
    for (const auto& r : regs) d *= r.dim;
    return d;
}

std::function<double(double)> make_transform(const FunctionSpec& fn, FnVariant v, double ztol) {
    switch (v) {
        case FnVariant::Direct:
            return [fn, ztol](double x) { return std::abs(x) < ztol ? 0.0 : fn.eval(x); };
        case FnVariant::OddExt:
            return [fn, ztol](double x) {
                if (std::abs(x) < ztol) return 0.0;
                return x > 0 ? fn.eval(x) : -fn.eval(-x);
            };
        case FnVariant::GFactor: {
            const double g0 = fn.g_at_zero.value_or(0.0);
            return [fn, ztol, g0](double x) { return std::abs(x) < ztol ? g0 : fn.eval(x) / x; };
        }
        case FnVariant::GFactorEven:
            return [fn, ztol](double x) {
                return std::abs(x) < ztol ? 0.0 : 0.5 * (fn.eval(x) + fn.eval(-x)) / x;
            };
        case FnVariant::OddPart:
            return [fn, ztol](double x) {
                return std::abs(x) < ztol ? 0.0 : 0.5 * (fn.eval(x) - fn.eval(-x));
            };
    }
    throw Error(ErrorCategory::Internal, "BadNode", "unknown function variant");
}

// ---------------------------------------------------------------------------
// Folding

class Folder {
  public:
    Folder(const Backend& backend, const FunctionRegistry& fns)
        : backend_(&backend), fns_(&fns) {}

    Matrix fragment(const FragmentPtr& f, bool dagger) {
        const auto key = std::make_pair(static_cast<const void*>(f.get()), dagger ? 1 : 0);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        Matrix m = dagger ? Matrix(fragment(f, false).adjoint()) : block(f->steps, f->registers);
        cache_.emplace(key, m);
        return m;
    }

    Matrix block(const StepBlock& steps, const std::vector<Register>& regs) {
        Matrix acc = Matrix::Identity(regs_dim(regs), regs_dim(regs));
        // List order is matrix-product order (first step = leftmost factor).
        for (const Step& s : steps) acc = acc * step(s, regs);
        return acc;
    }

    Matrix step(const Step& s, const std::vector<Register>& regs) {
        switch (s.kind) {
            case StepKind::Query:
                return detail::expand_operator(
                    regs, s.targets, backend_->query_exp(s.name, s.slot, s.sign, s.tau, false));
            case StepKind::Fixed:
                return detail::expand_operator(regs, s.targets, fixed_matrix(s, regs));
            case StepKind::Sub:
                return detail::expand_operator(regs, s.targets, fragment(s.child, s.dagger));
            case StepKind::Spectral:
                return detail::expand_operator(regs, s.targets, spectral_matrix(s));
            case StepKind::Repeat:
                return matrix_power(block(s.body, regs), s.count);
            case StepKind::AncillaInit:
                return Matrix::Identity(regs_dim(regs), regs_dim(regs));
        }
        throw Error(ErrorCategory::Internal, "BadNode", "unknown step kind");
    }

  private:
    Matrix fixed_matrix(const Step& s, const std::vector<Register>& regs) {
        switch (s.fixed) {
            case FixedKind::U1: return embedding::phase_unitary_u1(1);
            case FixedKind::U1Dag: return embedding::phase_unitary_u1(1).adjoint();
            case FixedKind::P1: return embedding::permutation3(1);
            case FixedKind::P1Dag: return embedding::permutation3(1).adjoint();
            case FixedKind::P2: return embedding::permutation3(2);
            case FixedKind::P2Dag: return embedding::permutation3(2).adjoint();
            case FixedKind::P3: return embedding::permutation3(3);
            case FixedKind::P3Dag: return embedding::permutation3(3).adjoint();
            case FixedKind::Swap02: return embedding::swap02(1);
            case FixedKind::SelectorExp: {
                Index data = 1;
                for (std::size_t i = 1; i < s.targets.size(); ++i)
                    data *= regs[static_cast<std::size_t>(s.targets[i])].dim;
                const Index n = static_cast<Index>(std::llround(std::sqrt(double(data))));
                Matrix sel = embedding::selector_matrix(n);
                if (s.selector_dag) sel = sel.adjoint().eval();
                return Backend::expm_hermitian(embedding::embed(sel, 3).matrix,
                                               s.sign >= 0 ? s.tau : -s.tau);
            }
        }
        throw Error(ErrorCategory::Internal, "BadNode", "unknown fixed kind");
    }

    Matrix spectral_matrix(const Step& s) {
        Matrix u = fragment(s.child, false);
        Matrix h = Backend::hermitian_log(u, s.t_ref);
        auto f = make_transform(fns_->get(s.fn), static_cast<FnVariant>(s.fn_variant), s.zero_tol);
        Eigen::SelfAdjointEigenSolver<Matrix> es(h);
        Vector phases(h.rows());
        for (Index k = 0; k < h.rows(); ++k)
            phases(k) = std::exp(Complex(0.0, f(es.eigenvalues()(k)) * s.t));
        return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    }

    const Backend* backend_;
    const FunctionRegistry* fns_;
    std::map<std::pair<const void*, int>, Matrix> cache_;
};

// ---------------------------------------------------------------------------
// Step construction helpers

Step make_query(std::string name, int slot, int sign, double tau, std::vector<int> targets) {
    Step s;
    s.kind = StepKind::Query;
    s.name = std::move(name);
    s.slot = slot;
    s.sign = sign;
    s.tau = tau;
    s.targets = std::move(targets);
    return s;
}

Step make_fixed(FixedKind k, std::vector<int> targets) {
    Step s;
    s.kind = StepKind::Fixed;
    s.fixed = k;
    s.targets = std::move(targets);
    return s;
}

Step make_selector_exp(bool dag, int sign, double tau, std::vector<int> targets) {
    Step s;
    s.kind = StepKind::Fixed;
    s.fixed = FixedKind::SelectorExp;
    s.selector_dag = dag;
    s.sign = sign;
    s.tau = tau;
    s.targets = std::move(targets);
    return s;
}

Step make_sub(FragmentPtr frag, bool dagger, std::vector<int> targets) {
    Step s;
    s.kind = StepKind::Sub;
    s.child = std::move(frag);
    s.dagger = dagger;
    s.targets = std::move(targets);
    return s;
}

Step make_repeat(std::uint64_t count, StepBlock body) {
    Step s;
    s.kind = StepKind::Repeat;
    s.count = count;
    s.body = std::move(body);
    return s;
}

Step make_spectral(std::string fn, FnVariant v, double t, double t_ref, double ztol,
                   FragmentPtr child, std::vector<int> targets) {
    Step s;
    s.kind = StepKind::Spectral;
    s.fn = std::move(fn);
    s.fn_variant = static_cast<int>(v);
    s.t = t;
    s.t_ref = t_ref;
    s.zero_tol = ztol;
    s.child = std::move(child);
    s.targets = std::move(targets);
    return s;
}

Step make_ancilla_init(int reg) {
    Step s;
    s.kind = StepKind::AncillaInit;
    s.reg = reg;
    return s;
}

void append(StepBlock& out, StepBlock more) {
    for (auto& s : more) out.push_back(std::move(s));
}

// ---------------------------------------------------------------------------
// Register worlds

struct World {
    std::vector<Register> regs;    // [index, spans..., ancillas...]
    std::vector<int> targets_l;    // [0, span, child ancillas...]
    std::vector<int> targets_r;
    std::vector<int> targets_sel;  // hadamard: [0, data span, own ancilla]
    std::vector<int> all;
    int anc_self = -1;
};

std::vector<Index> ancilla_profile(const ExprNode& n) {
    std::vector<Index> out;
    auto extend = [&out](const std::vector<Index>& v) { out.insert(out.end(), v.begin(), v.end()); };
    switch (n.kind) {
        case NodeKind::Leaf: break;
        case NodeKind::Hadamard:
            out.push_back(n.dim);
            extend(ancilla_profile(n.children[0]));
            extend(ancilla_profile(n.children[1]));
            break;
        case NodeKind::Func:
            extend(ancilla_profile(n.children[0]));
            break;
        default:
            extend(ancilla_profile(n.children[0]));
            extend(ancilla_profile(n.children[1]));
            break;
    }
    return out;
}

World make_world(const ExprNode& n) {
    World w;
    w.regs.push_back({"index", 3, RegKind::IndexSlot});
    auto add_ancs = [&w](const std::vector<Index>& dims, std::vector<int>* targets) {
        for (Index d : dims) {
            if (targets) targets->push_back(static_cast<int>(w.regs.size()));
            w.regs.push_back({"a" + std::to_string(w.regs.size()), d, RegKind::Ancilla});
        }
    };
    switch (n.kind) {
        case NodeKind::Leaf:
            w.regs.push_back({"d", n.dim, RegKind::Data});
            w.targets_l = {0, 1};
            break;
        case NodeKind::Add:
        case NodeKind::Mult:
            w.regs.push_back({"d", n.dim, RegKind::Data});
            w.targets_l = {0, 1};
            w.targets_r = {0, 1};
            add_ancs(ancilla_profile(n.children[0]), &w.targets_l);
            add_ancs(ancilla_profile(n.children[1]), &w.targets_r);
            break;
        case NodeKind::KronSum:
        case NodeKind::Tensor:
            w.regs.push_back({"dl", n.children[0].dim, RegKind::Data});
            w.regs.push_back({"dr", n.children[1].dim, RegKind::Data});
            w.targets_l = {0, 1};
            w.targets_r = {0, 2};
            add_ancs(ancilla_profile(n.children[0]), &w.targets_l);
            add_ancs(ancilla_profile(n.children[1]), &w.targets_r);
            break;
        case NodeKind::Hadamard:
            w.regs.push_back({"d", n.dim, RegKind::Data});
            w.regs.push_back({"h_anc", n.dim, RegKind::Ancilla});
            w.anc_self = 2;
            w.targets_l = {0, 1};
            w.targets_r = {0, 2};
            w.targets_sel = {0, 1, 2};
            add_ancs(ancilla_profile(n.children[0]), &w.targets_l);
            add_ancs(ancilla_profile(n.children[1]), &w.targets_r);
            break;
        case NodeKind::Func:
            w.regs.push_back({"d", n.dim, RegKind::Data});
            w.targets_l = {0, 1};
            add_ancs(ancilla_profile(n.children[0]), &w.targets_l);
            break;
    }
    for (std::size_t i = 0; i < w.regs.size(); ++i) w.all.push_back(static_cast<int>(i));
    return w;
}

// ---------------------------------------------------------------------------
// Lowering

struct Lowered {
    FragmentPtr frag;
    double norm_bound = 0.0;  // spectral bound on the represented operand
    double max_bound = 0.0;   // entrywise bound
    std::map<std::string, double> tally;
    double total = 0.0;
    BudgetEntry budget;
};

void merge_tally(std::map<std::string, double>& into, const std::map<std::string, double>& from,
                 double factor) {
    for (const auto& [k, v] : from) into[k] += v * factor;
}

struct Bounds {
    double norm = 0.0;
    double maxn = 0.0;
};

/// One operand of a commutator product: emits steps realizing
/// e^{sign i X_slot(B) tau} for slot in {1, 2, 3}.
struct Operand {
    std::function<StepBlock(int slot, int sign)> block;
    std::map<std::string, double> tally;  // per emitted block
    double total = 0.0;
};

StepBlock slot_wrap(StepBlock inner, int slot) {
    if (slot == 3) return inner;
    StepBlock out;
    if (slot == 1) {
        // X_1 = P_3 X_3 P_3^dag
        out.push_back(make_fixed(FixedKind::P3, {0}));
        append(out, std::move(inner));
        out.push_back(make_fixed(FixedKind::P3Dag, {0}));
    } else {
        // X_2 = P_2^dag X_3 P_2
        out.push_back(make_fixed(FixedKind::P2Dag, {0}));
        append(out, std::move(inner));
        out.push_back(make_fixed(FixedKind::P2, {0}));
    }
    return out;
}

class Lowerer {
  public:
    Lowerer(const Backend& backend, const FunctionRegistry& fns)
        : backend_(&backend), fns_(&fns), folder_(backend, fns) {}

    Lowered lower(const ExprNode& n, double t, double eps) {
        if (std::abs(t) < kTiny) return empty_program(n, eps);
        switch (n.kind) {
            case NodeKind::Leaf: return lower_leaf(n, t, eps);
            case NodeKind::Add: return lower_add(n, t, eps);
            case NodeKind::KronSum: return lower_ksum(n, t, eps);
            case NodeKind::Mult: return lower_mult(n, t, eps);
            case NodeKind::Tensor: return lower_tensor(n, t, eps);
            case NodeKind::Hadamard: return lower_hadamard(n, t, eps);
            case NodeKind::Func: return lower_func(n, t, eps);
        }
        throw Error(ErrorCategory::Internal, "BadNode", "unknown node kind");
    }

    Bounds analyze(const ExprNode& n) {
        switch (n.kind) {
            case NodeKind::Leaf: {
                const auto& rec = backend_->registry().get(n.name);
                return {rec.spectral_norm, rec.max_norm};
            }
            case NodeKind::Add:
            case NodeKind::KronSum: {
                Bounds l = analyze(n.children[0]), r = analyze(n.children[1]);
                return {l.norm + r.norm, l.maxn + r.maxn};
            }
            case NodeKind::Mult: {
                Bounds l = analyze(n.children[0]), r = analyze(n.children[1]);
                return {l.norm * r.norm,
                        std::min(l.norm * r.norm, double(n.dim) * l.maxn * r.maxn)};
            }
            case NodeKind::Tensor:
            case NodeKind::Hadamard: {
                Bounds l = analyze(n.children[0]), r = analyze(n.children[1]);
                return {l.norm * r.norm, l.maxn * r.maxn};
            }
            case NodeKind::Func: {
                Bounds c = analyze(n.children[0]);
                double b = fn_grid_bound(fns_->get(n.name), c.norm).first;
                return {b, b};
            }
        }
        throw Error(ErrorCategory::Internal, "BadNode", "unknown node kind");
    }

  private:
    const Backend* backend_;
    const FunctionRegistry* fns_;
    Folder folder_;

    const SimConfig& cfg() const { return backend_->config(); }

    // (max |h|, max |h'|) of the odd-extended function over a symmetric grid,
    // skipping a radius/1024 hole around zero where one-sided functions blow
    // up. Conservative inputs for repetition counts and Lipschitz budgets;
    // spectral steps refine bounds from recovered spectra.
    std::pair<double, double> fn_grid_bound(const FunctionSpec& fn, double radius) const {
        const double b = std::max(radius, 1e-9);
        double vmax = 0.0, dmax = 0.0;
        const int samples = 2048;
        for (int k = 0; k <= samples; ++k) {
            double x = -b + 2.0 * b * k / samples;
            double ax = std::abs(x);
            if (ax < b / 1024.0 || !fn.in_domain(ax)) continue;
            vmax = std::max(vmax, std::abs(fn.eval(ax)));
            dmax = std::max(dmax, std::abs(fn.deriv(ax)));
        }
        return {vmax, dmax};
    }

    Lowered empty_program(const ExprNode& n, double eps) {
        World w = make_world(n);
        Bounds b = analyze(n);
        Lowered out;
        out.frag = std::make_shared<Fragment>(Fragment{w.regs, {}});
        out.norm_bound = b.norm;
        out.max_bound = b.maxn;
        out.budget = {std::string(node_kind_name(n.kind)), eps, 0.0, 0.0, 1.0, {}};
        return out;
    }

    void check_reps(double reps, const std::string& where) const {
        if (!(reps >= 0) || reps > cfg().rep_cap)
            throw Error(ErrorCategory::Budget, "BudgetInfeasible",
                        "repetition count " + std::to_string(reps) + " exceeds the cap in " + where);
    }

    // ------------------------------------------------------------------
    Lowered lower_leaf(const ExprNode& n, double t, double eps) {
        const auto& rec = backend_->registry().get(n.name);
        World w = make_world(n);
        const int sign = t >= 0 ? 1 : -1;
        const double at = std::abs(t);
        double reps = std::max(1.0, std::ceil(at * rec.max_norm / cfg().tau_max));
        check_reps(reps, "leaf " + n.name);
        const auto k = static_cast<std::uint64_t>(reps);
        const double tau = at / reps;

        StepBlock steps;
        if (k == 1)
            steps.push_back(make_query(n.name, 3, sign, tau, w.targets_l));
        else
            steps.push_back(make_repeat(k, {make_query(n.name, 3, sign, tau, w.targets_l)}));

        Lowered out;
        out.frag = std::make_shared<Fragment>(Fragment{w.regs, std::move(steps)});
        out.norm_bound = rec.spectral_norm;
        out.max_bound = rec.max_norm;
        out.tally[n.name] = double(k);
        out.total = double(k);
        out.budget = {"leaf:" + n.name, eps, 0.0, double(k), 1.0, {}};
        return out;
    }

    // Child fragment embedded on a parent world. Leaf children become direct
    // queries (the backend realizes slots by permutation); composite children
    // are conjugated by explicit permutation steps.
    Operand child_operand(const ExprNode& n, double tau, double eps_occ,
                          const std::vector<int>& targets, BudgetEntry& budget_out,
                          double occurrences) {
        Operand op;
        if (n.kind == NodeKind::Leaf) {
            const auto& rec = backend_->registry().get(n.name);
            double reps = std::max(1.0, std::ceil(tau * rec.max_norm / cfg().tau_max));
            check_reps(reps, "leaf " + n.name);
            const auto k = static_cast<std::uint64_t>(reps);
            const double step_tau = tau / reps;
            const std::string name = n.name;
            op.block = [name, k, step_tau, targets](int slot, int sign) -> StepBlock {
                Step q = make_query(name, slot, sign, step_tau, targets);
                if (k == 1) return {q};
                return {make_repeat(k, {q})};
            };
            op.tally[n.name] = double(k);
            op.total = double(k);
            budget_out = {"leaf:" + n.name, eps_occ, 0.0, double(k), occurrences, {}};
            return op;
        }
        Lowered low = lower(n, tau, eps_occ);
        FragmentPtr frag = low.frag;
        op.block = [frag, targets](int slot, int sign) -> StepBlock {
            return slot_wrap({make_sub(frag, sign < 0, targets)}, slot);
        };
        op.tally = low.tally;
        op.total = low.total;
        budget_out = low.budget;
        budget_out.occurrences = occurrences;
        return op;
    }

    struct MultReps {
        std::uint64_t n_prime;
        double tau;
    };

    MultReps mult_reps(double t, double eps_own, double norm_a, double norm_b,
                       const std::string& where) const {
        if (eps_own <= 0)
            throw Error(ErrorCategory::Budget, "BudgetInfeasible", "empty budget in " + where);
        const double at = std::abs(t);
        const double bmax = std::max({norm_a, norm_b, 1e-12});
        double reps = std::max({std::ceil(cfg().c_mult * at * at / eps_own),
                                std::ceil(at * bmax * bmax / (2.0 * cfg().tau_max * cfg().tau_max)),
                                1.0});
        check_reps(reps, where);
        return {static_cast<std::uint64_t>(reps), std::sqrt(at / (2.0 * reps))};
    }

    // U_1 [ e^{x1} e^{x2} e^{-x1} e^{-x2} e^{-x1} e^{-x2} e^{x1} e^{x2} ]^{n'} U_1^dag
    // with x1 = i X_1(B1) tau, x2 = i X_2(B2) tau. A negative overall time
    // flips the first factor's signs only; flipping both would leave the
    // commutator unchanged.
    StepBlock commutator_steps(const Operand& a, const Operand& b, std::uint64_t n_prime,
                               bool flip) const {
        auto sa = [flip](int s) { return flip ? -s : s; };
        StepBlock body;
        append(body, a.block(1, sa(+1)));
        append(body, b.block(2, +1));
        append(body, a.block(1, sa(-1)));
        append(body, b.block(2, -1));
        append(body, a.block(1, sa(-1)));
        append(body, b.block(2, -1));
        append(body, a.block(1, sa(+1)));
        append(body, b.block(2, +1));
        StepBlock out;
        out.push_back(make_fixed(FixedKind::U1, {0}));
        out.push_back(make_repeat(n_prime, std::move(body)));
        out.push_back(make_fixed(FixedKind::U1Dag, {0}));
        return out;
    }

    // ------------------------------------------------------------------
    Lowered lower_add(const ExprNode& n, double t, double eps) {
        const ExprNode& l = n.children[0];
        const ExprNode& r = n.children[1];
        Bounds bl = analyze(l), br = analyze(r);
        World w = make_world(n);

        const double eps_own = eps / 2.0;
        double reps = std::max({std::ceil(cfg().c_add * t * t / eps_own),
                                std::ceil(std::abs(t) * std::max(bl.norm, br.norm) / cfg().tau_max),
                                1.0});
        check_reps(reps, "add");
        const auto nrep = static_cast<std::uint64_t>(reps);
        const double slice = t / reps;

        BudgetEntry bel, ber;
        Operand ol = child_operand(l, std::abs(slice), (eps / 4.0) / reps, w.targets_l, bel, reps);
        Operand orr = child_operand(r, std::abs(slice), (eps / 4.0) / reps, w.targets_r, ber, reps);
        const int sgn = slice >= 0 ? 1 : -1;

        StepBlock body;
        append(body, ol.block(3, sgn));
        append(body, orr.block(3, sgn));
        StepBlock steps;
        if (nrep == 1)
            steps = std::move(body);
        else
            steps.push_back(make_repeat(nrep, std::move(body)));

        Lowered out;
        out.frag = std::make_shared<Fragment>(Fragment{w.regs, std::move(steps)});
        out.norm_bound = bl.norm + br.norm;
        out.max_bound = bl.maxn + br.maxn;
        merge_tally(out.tally, ol.tally, double(nrep));
        merge_tally(out.tally, orr.tally, double(nrep));
        out.total = (ol.total + orr.total) * double(nrep);
        out.budget = {"add", eps, eps_own, double(nrep), 1.0, {bel, ber}};
        return out;
    }

    // ------------------------------------------------------------------
    Lowered lower_ksum(const ExprNode& n, double t, double eps) {
        const ExprNode& l = n.children[0];
        const ExprNode& r = n.children[1];
        Bounds bl = analyze(l), br = analyze(r);
        World w = make_world(n);

        // X_3(A (x) I) and X_3(I (x) B) act on disjoint data registers and
        // commute; a single interleaving is exact.
        BudgetEntry bel, ber;
        Operand ol = child_operand(l, std::abs(t), eps / 2.0, w.targets_l, bel, 1.0);
        Operand orr = child_operand(r, std::abs(t), eps / 2.0, w.targets_r, ber, 1.0);
        const int sgn = t >= 0 ? 1 : -1;

        StepBlock steps;
        append(steps, ol.block(3, sgn));
        append(steps, orr.block(3, sgn));

        Lowered out;
        out.frag = std::make_shared<Fragment>(Fragment{w.regs, std::move(steps)});
        out.norm_bound = bl.norm + br.norm;
        out.max_bound = bl.maxn + br.maxn;
        out.tally = ol.tally;
        merge_tally(out.tally, orr.tally, 1.0);
        out.total = ol.total + orr.total;
        out.budget = {"ksum", eps, 0.0, 1.0, 1.0, {bel, ber}};
        return out;
    }

    // ------------------------------------------------------------------
    Lowered lower_pair_product(const ExprNode& n, double t, double eps, const char* label) {
        const ExprNode& l = n.children[0];
        const ExprNode& r = n.children[1];
        Bounds bl = analyze(l), br = analyze(r);
        World w = make_world(n);

        const double eps_own = eps / 2.0;
        MultReps mr = mult_reps(t, eps_own, bl.norm, br.norm, label);
        const double occ = 4.0 * double(mr.n_prime);

        BudgetEntry bel, ber;
        Operand ol = child_operand(l, mr.tau, (eps / 4.0) / occ, w.targets_l, bel, occ);
        Operand orr = child_operand(r, mr.tau, (eps / 4.0) / occ, w.targets_r, ber, occ);

        Lowered out;
        out.frag = std::make_shared<Fragment>(
            Fragment{w.regs, commutator_steps(ol, orr, mr.n_prime, t < 0)});
        merge_tally(out.tally, ol.tally, occ);
        merge_tally(out.tally, orr.tally, occ);
        out.total = (ol.total + orr.total) * occ;
        out.budget = {label, eps, eps_own, double(mr.n_prime), 1.0, {bel, ber}};
        out.norm_bound = bl.norm * br.norm;
        if (n.kind == NodeKind::Mult)
            out.max_bound = std::min(bl.norm * br.norm, double(n.dim) * bl.maxn * br.maxn);
        else
            out.max_bound = bl.maxn * br.maxn;
        return out;
    }

    Lowered lower_mult(const ExprNode& n, double t, double eps) {
        return lower_pair_product(n, t, eps, "mult");
    }

    // A (x) B = (A (x) I)(I (x) B); the factors live on disjoint data
    // registers and feed the same commutator-product machinery.
    Lowered lower_tensor(const ExprNode& n, double t, double eps) {
        return lower_pair_product(n, t, eps, "tensor");
    }

    // ------------------------------------------------------------------
    Operand selector_operand(bool dag, double tau, const std::vector<int>& sel_targets) const {
        // ||X_3(S)||_max = 1, so the usual tau cap applies.
        double reps = std::max(1.0, std::ceil(tau / cfg().tau_max));
        const auto k = static_cast<std::uint64_t>(reps);
        const double step_tau = tau / reps;
        Operand op;
        op.block = [dag, k, step_tau, sel_targets](int slot, int sign) -> StepBlock {
            Step q = make_selector_exp(dag, sign, step_tau, sel_targets);
            StepBlock inner = (k == 1) ? StepBlock{q} : StepBlock{make_repeat(k, {q})};
            return slot_wrap(std::move(inner), slot);
        };
        return op;
    }

    Operand fragment_operand(FragmentPtr frag, const std::vector<int>& targets,
                             std::map<std::string, double> tally, double total) const {
        Operand op;
        op.block = [frag, targets](int slot, int sign) -> StepBlock {
            return slot_wrap({make_sub(frag, sign < 0, targets)}, slot);
        };
        op.tally = std::move(tally);
        op.total = total;
        return op;
    }

    // S (A1 (x) A2) S^dag realized as two nested commutator products with
    // fixed selector exponentials. The node's data register carries the
    // entrywise product on the |0> sector of the fresh ancilla.
    Lowered lower_hadamard(const ExprNode& n, double t, double eps) {
        const ExprNode& l = n.children[0];
        const ExprNode& r = n.children[1];
        Bounds bl = analyze(l), br = analyze(r);
        World w = make_world(n);
        const double bt = bl.norm * br.norm;  // tensor factor bound

        const double eps_own = eps / 2.0;
        const double e_outer = eps_own / 3.0, e_inner = eps_own / 3.0, e_tensor = eps_own / 3.0;

        // outer: S * [(l (x) r) S^dag]
        MultReps outer = mult_reps(t, e_outer, 1.0, bt, "had.outer");
        const double occ_inner = 4.0 * double(outer.n_prime);
        // inner: (l (x) r) * S^dag at tau_outer
        MultReps inner = mult_reps(outer.tau, e_inner / occ_inner, bt, 1.0, "had.inner");
        const double occ_tensor = occ_inner * 4.0 * double(inner.n_prime);
        // tensor: (l (x) I)(I (x) r) at tau_inner
        MultReps tens = mult_reps(inner.tau, e_tensor / occ_tensor, bl.norm, br.norm, "had.tensor");
        const double occ_children = occ_tensor * 4.0 * double(tens.n_prime);

        BudgetEntry bel, ber;
        Operand ol =
            child_operand(l, tens.tau, (eps / 4.0) / occ_children, w.targets_l, bel, occ_children);
        Operand orr =
            child_operand(r, tens.tau, (eps / 4.0) / occ_children, w.targets_r, ber, occ_children);

        auto tensor_frag = std::make_shared<Fragment>(
            Fragment{w.regs, commutator_steps(ol, orr, tens.n_prime, false)});
        std::map<std::string, double> tensor_tally;
        merge_tally(tensor_tally, ol.tally, 4.0 * double(tens.n_prime));
        merge_tally(tensor_tally, orr.tally, 4.0 * double(tens.n_prime));
        const double tensor_total = (ol.total + orr.total) * 4.0 * double(tens.n_prime);

        Operand op_tensor = fragment_operand(tensor_frag, w.all, tensor_tally, tensor_total);
        Operand op_sdag = selector_operand(true, inner.tau, w.targets_sel);
        auto inner_frag = std::make_shared<Fragment>(
            Fragment{w.regs, commutator_steps(op_tensor, op_sdag, inner.n_prime, false)});
        std::map<std::string, double> inner_tally;
        merge_tally(inner_tally, tensor_tally, 4.0 * double(inner.n_prime));
        const double inner_total = tensor_total * 4.0 * double(inner.n_prime);

        Operand op_s = selector_operand(false, outer.tau, w.targets_sel);
        Operand op_inner = fragment_operand(inner_frag, w.all, inner_tally, inner_total);

        StepBlock steps;
        steps.push_back(make_ancilla_init(w.anc_self));
        append(steps, commutator_steps(op_s, op_inner, outer.n_prime, t < 0));

        Lowered out;
        out.frag = std::make_shared<Fragment>(Fragment{w.regs, std::move(steps)});
        out.norm_bound = bl.norm * br.norm;
        out.max_bound = bl.maxn * br.maxn;
        merge_tally(out.tally, inner_tally, 4.0 * double(outer.n_prime));
        out.total = inner_total * 4.0 * double(outer.n_prime);

        BudgetEntry own_outer{"had.outer", e_outer, e_outer, double(outer.n_prime), 1.0, {}};
        BudgetEntry own_inner{"had.inner", e_inner / occ_inner, e_inner / occ_inner,
                              double(inner.n_prime), occ_inner, {}};
        BudgetEntry own_tensor{"had.tensor", e_tensor / occ_tensor, e_tensor / occ_tensor,
                               double(tens.n_prime), occ_tensor, {}};
        out.budget = {"had", eps, 0.0, double(outer.n_prime), 1.0,
                      {own_outer, own_inner, own_tensor, bel, ber}};
        return out;
    }

    // ------------------------------------------------------------------
    struct Probe {
        Lowered low;             // child compiled at t_ref
        double t_ref;
        double err_scale;        // generator error per unit time
        Matrix operand;          // C read from the recovered (0,2) block
        std::vector<double> eigenvalues;  // of Hermitian C
        double ztol;
    };

    // Compiles the child at a short reference time, recovers its operand from
    // the executed unitary and checks Hermiticity. This is the desk-scale
    // stand-in for the spectrum knowledge the cited circuit constructions
    // assume. The probe budget keeps the transform's propagated error within
    // `share`: err ~ sensitivity * (eps_probe / t_ref) <= share.
    Probe probe_child(const ExprNode& child, double bc_norm, double share, double sensitivity) {
        Probe p;
        p.t_ref = std::min(0.5 * 1.5707963267948966 / std::max(bc_norm, 1e-9), 100.0);
        double eps_probe =
            std::max(share * p.t_ref / std::max(sensitivity, 1e-9), 1e-13);
        p.low = lower(child, p.t_ref, eps_probe);
        p.err_scale = eps_probe / p.t_ref;
        p.ztol = std::max(1e-9, 20.0 * p.err_scale);

        Matrix u = folder_.fragment(p.low.frag, false);
        Matrix h = Backend::hermitian_log(u, p.t_ref);
        Matrix hs = restrict_to_ancilla_sector(h, p.low.frag->registers);
        const Index nd = hs.rows() / 3;
        p.operand = hs.block(0, 2 * nd, nd, nd);
        if (!is_hermitian(p.operand, std::max(1e-8, 10.0 * p.err_scale)))
            throw Error(ErrorCategory::Domain, "DomainViolation",
                        "operator functions require a Hermitian operand");
        Matrix sym = 0.5 * (p.operand + Matrix(p.operand.adjoint()));
        Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
        for (Index k = 0; k < nd; ++k) p.eigenvalues.push_back(es.eigenvalues()(k));
        return p;
    }

    void check_domain(const FunctionSpec& fn, const Probe& p) const {
        const double slack = 10.0 * p.err_scale + 1e-10;
        for (double lam : p.eigenvalues) {
            if (lam < fn.domain_lo - slack || lam > fn.domain_hi + slack)
                throw Error(ErrorCategory::Domain, "DomainViolation",
                            "operand eigenvalue " + std::to_string(lam) +
                                " outside the domain of '" + fn.name + "'");
        }
    }

    // Largest |h| over the recovered spectrum. The embedding spectrum is
    // {+-|lambda_k|}, and every route here applies an odd transform, so the
    // magnitude at either sign is |h(|lambda|)|.
    double refined_bound(const FunctionSpec& fn, const Probe& p) const {
        double b = 1e-12;
        for (double lam : p.eigenvalues) {
            const double s = std::abs(lam);
            if (s < p.ztol || !fn.in_domain(s)) continue;
            b = std::max(b, std::abs(fn.eval(s)));
        }
        return b;
    }

    Lowered lower_func(const ExprNode& n, double t, double eps) {
        const FunctionSpec& fn = fns_->get(n.name);
        const ExprNode& child = n.children[0];
        Bounds bc = analyze(child);
        World w = make_world(n);

        if (fn.name == "identity") {
            Lowered out = lower(child, t, eps);
            out.budget = {"fn:identity", eps, 0.0, 0.0, 1.0, {out.budget}};
            return out;
        }

        auto [grid_bound, grid_lips] = fn_grid_bound(fn, bc.norm);
        const double lips = std::max(grid_lips, 1e-9);
        const bool one_sided = fn.domain_lo > -1e299;

        if (fn.parity == Parity::Odd || (fn.parity == Parity::General && one_sided)) {
            // Odd functions commute with the embedding; one-sided general
            // functions (log) use the odd extension sign(x) h(|x|), which
            // agrees with h on the admissible spectrum.
            const FnVariant variant =
                fn.parity == Parity::Odd ? FnVariant::Direct : FnVariant::OddExt;
            Probe p = probe_child(child, bc.norm, eps / 2.0, std::abs(t) * lips);
            check_domain(fn, p);
            const double nb = refined_bound(fn, p);

            StepBlock steps;
            steps.push_back(
                make_spectral(fn.name, variant, t, p.t_ref, p.ztol, p.low.frag, w.all));
            Lowered out;
            out.frag = std::make_shared<Fragment>(Fragment{w.regs, std::move(steps)});
            out.norm_bound = nb;
            out.max_bound = nb;
            out.tally = p.low.tally;
            out.total = p.low.total;
            BudgetEntry bp = p.low.budget;
            out.budget = {"fn:" + fn.name, eps, eps / 2.0, 0.0, 1.0, {bp}};
            return out;
        }

        if (fn.parity == Parity::Even) {
            return lower_even_factorization(fn, child, t, eps, bc, w, FnVariant::GFactor,
                                            "fn:" + fn.name);
        }

        // General function over a symmetric domain: split into the even half
        // (h(x)+h(-x))/2 lowered by factorization and the odd half
        // (h(x)-h(-x))/2 lowered directly, then interleave.
        const double eps_own = eps / 4.0;
        const double eps_even = 3.0 * eps / 8.0;
        const double eps_odd = 3.0 * eps / 8.0;
        double reps = std::max({std::ceil(cfg().c_add * t * t / eps_own),
                                std::ceil(std::abs(t) * grid_bound / cfg().tau_max), 1.0});
        check_reps(reps, "fn.split");
        const auto nrep = static_cast<std::uint64_t>(reps);
        const double slice = t / reps;

        Lowered even_half = lower_even_factorization(fn, child, slice, eps_even / reps, bc, w,
                                                     FnVariant::GFactorEven, "fn.even-half");
        even_half.budget.occurrences = reps;

        Probe podd = probe_child(child, bc.norm, eps_odd, std::abs(t) * lips);
        check_domain(fn, podd);

        StepBlock body;
        body.push_back(make_sub(even_half.frag, false, w.all));
        body.push_back(make_spectral(fn.name, FnVariant::OddPart, slice, podd.t_ref, podd.ztol,
                                     podd.low.frag, w.all));
        StepBlock steps;
        if (nrep == 1)
            steps = std::move(body);
        else
            steps.push_back(make_repeat(nrep, std::move(body)));

        double nb = 1e-12;
        for (double lam : podd.eigenvalues)
            if (fn.in_domain(lam)) nb = std::max(nb, std::abs(fn.eval(lam)));

        Lowered out;
        out.frag = std::make_shared<Fragment>(Fragment{w.regs, std::move(steps)});
        out.norm_bound = nb;
        out.max_bound = nb;
        merge_tally(out.tally, even_half.tally, double(nrep));
        merge_tally(out.tally, podd.low.tally, double(nrep));
        out.total = (even_half.total + podd.low.total) * double(nrep);
        BudgetEntry bodd = podd.low.budget;
        bodd.occurrences = reps;
        out.budget = {"fn:" + fn.name, eps, eps_own, double(nrep), 1.0,
                      {even_half.budget, bodd}};
        return out;
    }

    // h(A) = g(A) A with g(x) = h(x)/x odd; both factors feed the
    // commutator-product machinery (g via a spectral step on the probed
    // child, A via the child itself).
    Lowered lower_even_factorization(const FunctionSpec& fn, const ExprNode& child, double t,
                                     double eps, const Bounds& bc, World& w, FnVariant g_variant,
                                     const std::string& label) {
        const double eps_own = eps / 2.0;

        // Seed probe to learn the operand spectrum.
        Probe p = probe_child(child, bc.norm, eps / 8.0, 1.0);
        check_domain(fn, p);

        auto g = make_transform(fn, g_variant, p.ztol);
        double g_bound = 1e-12, g_lips = 1e-9;
        bool spectrum_touches_zero = false;
        for (double lam : p.eigenvalues) {
            const double s = std::abs(lam);
            if (s < 4.0 * p.ztol) {
                spectrum_touches_zero = true;
                continue;
            }
            g_bound = std::max(g_bound, std::abs(g(s)));
            // |g'| <= |h'(s)/s| + |h(s)/s^2|
            g_lips = std::max(g_lips, std::abs(fn.deriv(s)) / s + std::abs(fn.eval(s)) / (s * s));
        }
        if (spectrum_touches_zero && g_variant == FnVariant::GFactor && !fn.g_at_zero)
            throw Error(ErrorCategory::Domain, "DomainViolation",
                        "h(x)/x has no finite limit at 0 and the operand spectrum touches zero");
        if (fn.g_at_zero) g_bound = std::max(g_bound, std::abs(*fn.g_at_zero));

        MultReps mr = mult_reps(t, eps_own, g_bound, bc.norm, label);
        const double occ = 4.0 * double(mr.n_prime);

        // Tighten the probe so the g-factor error stays inside its share
        // (each of the 4n' spectral blocks propagates the probe error).
        if (occ * mr.tau * g_lips > 1.0) {
            p = probe_child(child, bc.norm, eps / 8.0, occ * mr.tau * g_lips);
            check_domain(fn, p);
            g = make_transform(fn, g_variant, p.ztol);
        }

        Operand op_g;
        {
            FragmentPtr pf = p.low.frag;
            const double tref = p.t_ref;
            const double ztol = p.ztol;
            const std::string fname = fn.name;
            const std::vector<int> targets = w.all;
            op_g.block = [pf, tref, ztol, fname, g_variant, targets, tau = mr.tau](
                             int slot, int sign) -> StepBlock {
                return slot_wrap({make_spectral(fname, g_variant, sign >= 0 ? tau : -tau, tref,
                                                ztol, pf, targets)},
                                 slot);
            };
            op_g.tally = p.low.tally;
            op_g.total = p.low.total;
        }

        BudgetEntry bdirect;
        Operand op_c = child_operand(child, mr.tau, (eps / 4.0) / occ, w.targets_l, bdirect, occ);

        Lowered out;
        out.frag = std::make_shared<Fragment>(
            Fragment{w.regs, commutator_steps(op_g, op_c, mr.n_prime, t < 0)});
        double nb = 1e-12;
        for (double lam : p.eigenvalues) {
            const double s = std::abs(lam);
            nb = std::max(nb, std::abs(g(lam)) * s);
        }
        out.norm_bound = nb;
        out.max_bound = nb;
        merge_tally(out.tally, op_g.tally, occ);
        merge_tally(out.tally, op_c.tally, occ);
        out.total = (op_g.total + op_c.total) * occ;
        BudgetEntry bprobe = p.low.budget;
        bprobe.node = "probe:" + bprobe.node;
        bprobe.occurrences = occ;
        out.budget = {label, eps, eps_own, double(mr.n_prime), 1.0, {bprobe, bdirect}};
        return out;
    }
};

}  // namespace

// ---------------------------------------------------------------------------

Index CompiledProgram::data_dim() const {
    Index d = 1;
    for (const auto& r : registers)
        if (r.kind == RegKind::Data) d *= r.dim;
    return d;
}

Index CompiledProgram::space_dim() const { return regs_dim(registers); }

CompiledProgram compile(const ExprNode& node, double t, double eps, bool controlled,
                        const Backend& backend, const FunctionRegistry& functions) {
    if (!(eps > 0.0))
        throw Error(ErrorCategory::Budget, "BudgetInfeasible", "error budget must be positive");
    if (node.dim <= 0)
        throw Error(ErrorCategory::Dim, "DimensionMismatch", "expression tree is not annotated");

    Lowerer lowerer(backend, functions);
    Lowered low = lowerer.lower(node, t, eps);

    CompiledProgram p;
    p.registers = low.frag->registers;
    p.steps = low.frag->steps;
    p.t = t;
    p.eps = eps;
    p.controlled = controlled;
    p.budget = low.budget;
    p.query_tally = low.tally;
    p.total_queries = low.total;
    p.norm_bound = low.norm_bound;
    p.depth = node.depth();
    return p;
}

Matrix execute(const CompiledProgram& program, const Backend& backend,
               const FunctionRegistry& functions) {
    Folder folder(backend, functions);
    Matrix u = folder.block(program.steps, program.registers);
    if (!program.controlled) return u;
    const Index d = u.rows();
    Matrix cu = Matrix::Identity(2 * d, 2 * d);
    cu.block(d, d, d, d) = u;
    return cu;
}

Matrix restrict_to_ancilla_sector(const Matrix& u, const std::vector<Register>& regs) {
    const int nregs = static_cast<int>(regs.size());
    std::vector<Index> strides(static_cast<std::size_t>(nregs));
    Index total = 1;
    for (int i = nregs - 1; i >= 0; --i) {
        strides[static_cast<std::size_t>(i)] = total;
        total *= regs[static_cast<std::size_t>(i)].dim;
    }
    std::vector<Index> keep;
    for (Index idx = 0; idx < total; ++idx) {
        bool ok = true;
        for (int i = 0; i < nregs && ok; ++i) {
            if (regs[static_cast<std::size_t>(i)].kind != RegKind::Ancilla) continue;
            ok = ((idx / strides[static_cast<std::size_t>(i)]) %
                  regs[static_cast<std::size_t>(i)].dim) == 0;
        }
        if (ok) keep.push_back(idx);
    }
    Matrix out(static_cast<Index>(keep.size()), static_cast<Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i)
        for (std::size_t j = 0; j < keep.size(); ++j) out(Index(i), Index(j)) = u(keep[i], keep[j]);
    return out;
}

QuantumState apply_program(const CompiledProgram& program, const Backend& backend,
                           const QuantumState& state, const FunctionRegistry& functions) {
    Folder folder(backend, functions);
    Matrix u = folder.block(program.steps, program.registers);
    std::vector<int> all;
    for (std::size_t i = 0; i < state.registers().size(); ++i) all.push_back(static_cast<int>(i));
    return state.apply(u, all);
}

double norm_bound_estimate(const ExprNode& node, const Backend& backend,
                           const FunctionRegistry& functions) {
    Lowerer lowerer(backend, functions);
    return lowerer.analyze(node).norm;
}

double verify_deviation(const ExprNode& node, const CompiledProgram& program,
                        const Backend& backend, const FunctionRegistry& functions) {
    Matrix f = oracle_eval(node, backend.registry(), functions);
    Matrix target = Backend::expm_hermitian(embedding::embed(f, 3).matrix, program.t);
    Matrix u = execute(program, backend, functions);
    if (program.controlled) {
        const Index d = u.rows() / 2;
        u = u.block(d, d, d, d).eval();
    }
    Matrix restricted = restrict_to_ancilla_sector(u, program.registers);
    return spectral_norm(restricted - target);
}

// ---------------------------------------------------------------------------
// JSON serialization. Shared fragments are emitted once in a table and
// referenced by id, so deeply nested programs serialize in linear size.

namespace {

const char* reg_kind_name(RegKind k) {
    switch (k) {
        case RegKind::Control: return "control";
        case RegKind::IndexSlot: return "index";
        case RegKind::Data: return "data";
        case RegKind::Ancilla: return "ancilla";
        case RegKind::Phase: return "phase";
        case RegKind::Rotation: return "rotation";
    }
    return "?";
}

RegKind reg_kind_from(const std::string& s) {
    if (s == "control") return RegKind::Control;
    if (s == "index") return RegKind::IndexSlot;
    if (s == "data") return RegKind::Data;
    if (s == "ancilla") return RegKind::Ancilla;
    if (s == "phase") return RegKind::Phase;
    if (s == "rotation") return RegKind::Rotation;
    throw Error(ErrorCategory::Io, "BadProgramFile", "unknown register kind '" + s + "'");
}

FixedKind fixed_kind_from(const std::string& s) {
    for (FixedKind k : {FixedKind::U1, FixedKind::U1Dag, FixedKind::P1, FixedKind::P1Dag,
                        FixedKind::P2, FixedKind::P2Dag, FixedKind::P3, FixedKind::P3Dag,
                        FixedKind::Swap02, FixedKind::SelectorExp})
        if (s == fixed_kind_name(k)) return k;
    throw Error(ErrorCategory::Io, "BadProgramFile", "unknown fixed kind '" + s + "'");
}

nlohmann::ordered_json registers_json(const std::vector<Register>& regs) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : regs)
        arr.push_back({{"name", r.name}, {"dim", r.dim}, {"kind", reg_kind_name(r.kind)}});
    return arr;
}

std::vector<Register> registers_from(const nlohmann::json& j) {
    std::vector<Register> regs;
    for (const auto& r : j)
        regs.push_back({r.at("name").get<std::string>(), r.at("dim").get<Index>(),
                        reg_kind_from(r.at("kind").get<std::string>())});
    return regs;
}

struct FragmentTable {
    std::map<const Fragment*, int> ids;
    nlohmann::ordered_json blocks = nlohmann::ordered_json::array();

    nlohmann::ordered_json steps_json(const StepBlock& steps);

    int fragment_id(const FragmentPtr& f) {
        auto it = ids.find(f.get());
        if (it != ids.end()) return it->second;
        nlohmann::ordered_json body;
        body["registers"] = registers_json(f->registers);
        body["steps"] = steps_json(f->steps);
        const int id = static_cast<int>(blocks.size());
        blocks.push_back(std::move(body));
        ids[f.get()] = id;
        return id;
    }
};

nlohmann::ordered_json FragmentTable::steps_json(const StepBlock& steps) {
    auto arr = nlohmann::ordered_json::array();
    for (const Step& s : steps) {
        nlohmann::ordered_json js;
        switch (s.kind) {
            case StepKind::Query:
                js["step"] = "query";
                js["name"] = s.name;
                js["slot"] = s.slot;
                js["sign"] = s.sign;
                js["tau"] = s.tau;
                js["targets"] = s.targets;
                break;
            case StepKind::Fixed:
                js["step"] = "fixed";
                js["kind"] = fixed_kind_name(s.fixed);
                if (s.fixed == FixedKind::SelectorExp) {
                    js["dag"] = s.selector_dag;
                    js["sign"] = s.sign;
                    js["tau"] = s.tau;
                }
                js["targets"] = s.targets;
                break;
            case StepKind::Spectral:
                js["step"] = "spectral";
                js["fn"] = s.fn;
                js["variant"] = s.fn_variant;
                js["t"] = s.t;
                js["t_ref"] = s.t_ref;
                js["zero_tol"] = s.zero_tol;
                js["child"] = fragment_id(s.child);
                js["targets"] = s.targets;
                break;
            case StepKind::Sub:
                js["step"] = "sub";
                js["child"] = fragment_id(s.child);
                js["dagger"] = s.dagger;
                js["targets"] = s.targets;
                break;
            case StepKind::Repeat:
                js["step"] = "repeat";
                js["count"] = s.count;
                js["body"] = steps_json(s.body);
                break;
            case StepKind::AncillaInit:
                js["step"] = "ancilla_init";
                js["reg"] = s.reg;
                break;
        }
        arr.push_back(std::move(js));
    }
    return arr;
}

nlohmann::ordered_json budget_json(const BudgetEntry& b) {
    nlohmann::ordered_json j;
    j["node"] = b.node;
    j["eps_alloc"] = b.eps_alloc;
    j["eps_own"] = b.eps_own;
    j["reps"] = b.reps;
    j["occurrences"] = b.occurrences;
    if (!b.children.empty()) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& c : b.children) arr.push_back(budget_json(c));
        j["children"] = arr;
    }
    return j;
}

BudgetEntry budget_from(const nlohmann::json& j) {
    BudgetEntry b;
    b.node = j.at("node").get<std::string>();
    b.eps_alloc = j.at("eps_alloc").get<double>();
    b.eps_own = j.at("eps_own").get<double>();
    b.reps = j.at("reps").get<double>();
    b.occurrences = j.value("occurrences", 1.0);
    if (j.contains("children"))
        for (const auto& c : j["children"]) b.children.push_back(budget_from(c));
    return b;
}

StepBlock steps_from(const nlohmann::json& arr, const std::vector<FragmentPtr>& frags) {
    StepBlock out;
    for (const auto& js : arr) {
        Step s;
        const std::string kind = js.at("step").get<std::string>();
        if (kind == "query") {
            s.kind = StepKind::Query;
            s.name = js.at("name").get<std::string>();
            s.slot = js.at("slot").get<int>();
            s.sign = js.at("sign").get<int>();
            s.tau = js.at("tau").get<double>();
            s.targets = js.at("targets").get<std::vector<int>>();
        } else if (kind == "fixed") {
            s.kind = StepKind::Fixed;
            s.fixed = fixed_kind_from(js.at("kind").get<std::string>());
            if (s.fixed == FixedKind::SelectorExp) {
                s.selector_dag = js.at("dag").get<bool>();
                s.sign = js.at("sign").get<int>();
                s.tau = js.at("tau").get<double>();
            }
            s.targets = js.at("targets").get<std::vector<int>>();
        } else if (kind == "spectral") {
            s.kind = StepKind::Spectral;
            s.fn = js.at("fn").get<std::string>();
            s.fn_variant = js.at("variant").get<int>();
            s.t = js.at("t").get<double>();
            s.t_ref = js.at("t_ref").get<double>();
            s.zero_tol = js.at("zero_tol").get<double>();
            s.child = frags.at(js.at("child").get<std::size_t>());
            s.targets = js.at("targets").get<std::vector<int>>();
        } else if (kind == "sub") {
            s.kind = StepKind::Sub;
            s.child = frags.at(js.at("child").get<std::size_t>());
            s.dagger = js.at("dagger").get<bool>();
            s.targets = js.at("targets").get<std::vector<int>>();
        } else if (kind == "repeat") {
            s.kind = StepKind::Repeat;
            s.count = js.at("count").get<std::uint64_t>();
            s.body = steps_from(js.at("body"), frags);
        } else if (kind == "ancilla_init") {
            s.kind = StepKind::AncillaInit;
            s.reg = js.at("reg").get<int>();
        } else {
            throw Error(ErrorCategory::Io, "BadProgramFile", "unknown step kind '" + kind + "'");
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

nlohmann::ordered_json program_to_json(const CompiledProgram& program) {
    nlohmann::ordered_json j;
    j["t"] = program.t;
    j["eps"] = program.eps;
    j["controlled"] = program.controlled;
    j["norm_bound"] = program.norm_bound;
    j["depth"] = program.depth;
    j["registers"] = registers_json(program.registers);
    FragmentTable table;
    j["steps"] = table.steps_json(program.steps);
    j["fragments"] = table.blocks;
    j["budget"] = budget_json(program.budget);
    nlohmann::ordered_json tally;
    for (const auto& [k, v] : program.query_tally) tally[k] = v;
    j["query_tally"] = tally;
    j["total_queries"] = program.total_queries;
    return j;
}

CompiledProgram program_from_json(const nlohmann::json& j) {
    CompiledProgram p;
    p.t = j.at("t").get<double>();
    p.eps = j.at("eps").get<double>();
    p.controlled = j.at("controlled").get<bool>();
    p.norm_bound = j.at("norm_bound").get<double>();
    p.depth = j.at("depth").get<int>();
    p.registers = registers_from(j.at("registers"));

    // Fragments only reference earlier table entries, so one ordered pass
    // resolves every child pointer.
    std::vector<FragmentPtr> frags;
    for (const auto& body : j.at("fragments")) {
        auto f = std::make_shared<Fragment>();
        f->registers = registers_from(body.at("registers"));
        f->steps = steps_from(body.at("steps"), frags);
        frags.push_back(f);
    }
    p.steps = steps_from(j.at("steps"), frags);
    p.budget = budget_from(j.at("budget"));
    if (j.contains("query_tally"))
        for (auto it = j["query_tally"].begin(); it != j["query_tally"].end(); ++it)
            p.query_tally[it.key()] = it.value().get<double>();
    p.total_queries = j.value("total_queries", 0.0);
    return p;
}

}  // namespace qmat
