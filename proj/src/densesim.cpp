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

#include "qmat/densesim.hpp"

#include <cmath>

#include "qmat/embedding.hpp"
#include "qmat/errors.hpp"

namespace qmat {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Backend::Backend(const MatrixRegistry& registry, SimConfig cfg)
    : registry_(&registry), cfg_(cfg) {}

Matrix Backend::expm_hermitian(const Matrix& h, double t) {
    if (!is_hermitian(h, 1e-10))
        throw Error(ErrorCategory::Domain, "NotHermitian", "generator is not Hermitian within 1e-10");
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    const auto& lam = es.eigenvalues();
    Vector phases(lam.size());
    for (Index k = 0; k < lam.size(); ++k)
        phases(k) = std::exp(Complex(0.0, lam(k) * t));
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

Matrix Backend::hermitian_log(const Matrix& u, double t) {
    if (std::abs(t) < 1e-300)
        throw Error(ErrorCategory::Internal, "ZeroTime", "cannot recover a generator at t = 0");
    // U is normal (unitary), so its Schur form is diagonal and the Schur
    // basis is an orthonormal eigenbasis.
    Eigen::ComplexSchur<Matrix> schur(u, true);
    const Matrix& q = schur.matrixU();
    Vector lam(u.rows());
    for (Index k = 0; k < u.rows(); ++k)
        lam(k) = std::arg(schur.matrixT()(k, k)) / t;
    Matrix h = q * lam.asDiagonal() * q.adjoint();
    return 0.5 * (h + Matrix(h.adjoint()));
}

Matrix Backend::query_exp(const std::string& name, int slot, int sign, double tau,
                          bool controlled) const {
    const MatrixRecord& rec = registry_->get(name);
    if (!std::isfinite(tau))
        throw Error(ErrorCategory::Domain, "NonFinite", "query time must be finite");
    queries_[name] += 1;
    total_queries_ += 1;

    Matrix u = expm_hermitian(embedding::embed(rec.padded, 3).matrix, sign >= 0 ? tau : -tau);
    if (slot != 3) {
        Matrix q = embedding::slot_conjugator(slot, rec.dim());
        u = q * u * q.adjoint();
    }
    if (!controlled) return u;
    const Index d = u.rows();
    Matrix cu = Matrix::Identity(2 * d, 2 * d);
    cu.block(d, d, d, d) = u;
    return cu;
}

std::uint64_t Backend::query_count(const std::string& name) const {
    auto it = queries_.find(name);
    return it == queries_.end() ? 0 : it->second;
}

void Backend::reset_query_counts() {
    queries_.clear();
    total_queries_ = 0;
}

Matrix hermitian_function(const Matrix& h, const std::function<double(double)>& f) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    Vector vals(es.eigenvalues().size());
    for (Index k = 0; k < vals.size(); ++k) vals(k) = f(es.eigenvalues()(k));
    return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().adjoint();
}

// ---------------------------------------------------------------------------
// QPE

namespace {

Matrix hadamard_gate() {
    Matrix h(2, 2);
    const double s = std::sqrt(0.5);
    h << s, s, s, -s;
    return h;
}

Matrix fourier_matrix(int m, bool inverse) {
    const Index big_m = Index(1) << m;
    Matrix f(big_m, big_m);
    const double sgn = inverse ? -1.0 : 1.0;
    const double norm = 1.0 / std::sqrt(static_cast<double>(big_m));
    for (Index j = 0; j < big_m; ++j)
        for (Index k = 0; k < big_m; ++k)
            f(j, k) = norm * std::exp(Complex(0.0, sgn * 2.0 * kPi * static_cast<double>(j * k) /
                                                       static_cast<double>(big_m)));
    return f;
}

Matrix controlled_block(const Matrix& u) {
    const Index d = u.rows();
    Matrix cu = Matrix::Identity(2 * d, 2 * d);
    cu.block(d, d, d, d) = u;
    return cu;
}

std::vector<int> phase_targets(int m) {
    std::vector<int> t(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) t[static_cast<std::size_t>(i)] = i;
    return t;
}

}  // namespace

QuantumState qpe_attach_phase(const QuantumState& system, int m) {
    if (!system.is_pure())
        throw Error(ErrorCategory::Internal, "DimMismatch",
                    "phase estimation operates on pure states; decompose mixed inputs per shot");
    std::vector<Register> regs;
    for (int j = 0; j < m; ++j)
        regs.push_back({"q" + std::to_string(m - 1 - j), 2, RegKind::Phase});
    for (const auto& r : system.registers()) regs.push_back(r);
    Vector zero = Vector::Zero(Index(1) << m);
    zero(0) = 1.0;
    return QuantumState::pure(std::move(regs), kron(zero, system.amplitudes()));
}

QuantumState qpe_forward(const QuantumState& joint, const Matrix& u, int m,
                         const std::vector<int>& system_targets, const SimConfig& cfg) {
    if (joint.dim() > cfg.circuit_dim_cap)
        throw Error(ErrorCategory::Budget, "CircuitTooLarge",
                    "joint dimension " + std::to_string(joint.dim()) +
                        " exceeds the circuit cap; use the ideal-sampler mode");
    QuantumState st = joint;
    const Matrix h = hadamard_gate();
    for (int j = 0; j < m; ++j) st = st.apply(h, {j});
    // Bit j (weight 2^j) of the outcome lives in register m-1-j.
    Matrix upow = u;
    for (int j = 0; j < m; ++j) {
        std::vector<int> targets = {m - 1 - j};
        targets.insert(targets.end(), system_targets.begin(), system_targets.end());
        st = st.apply(controlled_block(upow), targets);
        if (j + 1 < m) upow = upow * upow;
    }
    return st.apply(fourier_matrix(m, true), phase_targets(m));
}

QuantumState qpe_inverse(const QuantumState& joint, const Matrix& u, int m,
                         const std::vector<int>& system_targets, const SimConfig& cfg) {
    (void)cfg;
    QuantumState st = joint.apply(fourier_matrix(m, false), phase_targets(m));
    Matrix upow_dag = u.adjoint();
    for (int j = 0; j < m; ++j) {
        std::vector<int> targets = {m - 1 - j};
        targets.insert(targets.end(), system_targets.begin(), system_targets.end());
        st = st.apply(controlled_block(upow_dag), targets);
        if (j + 1 < m) upow_dag = upow_dag * upow_dag;
    }
    const Matrix h = hadamard_gate();
    for (int j = 0; j < m; ++j) st = st.apply(h, {j});
    return st;
}

double phase_from_outcome(std::uint64_t k, int m) {
    const double big_m = static_cast<double>(Index(1) << m);
    double phase = 2.0 * kPi * static_cast<double>(k) / big_m;
    if (phase > kPi + 1e-15) phase -= 2.0 * kPi;
    return phase;
}

std::pair<EigenSample, QuantumState> phase_estimate(const QuantumState& system, const Matrix& u,
                                                    int m, double t_pe, double norm_bound,
                                                    Rng& rng, const SimConfig& cfg) {
    if (m < 1 || m > 20)
        throw Error(ErrorCategory::Budget, "PrecisionOverflow", "phase bits out of range");
    const double cap = kPi * (1.0 - std::pow(2.0, -m));
    if (norm_bound * std::abs(t_pe) > cap * (1.0 + 1e-12))
        throw Error(ErrorCategory::Budget, "PrecisionOverflow",
                    "norm bound times t_pe exceeds the aliasing-safe range");

    QuantumState joint = qpe_attach_phase(system, m);
    std::vector<int> sys;
    for (std::size_t i = 0; i < system.registers().size(); ++i)
        sys.push_back(m + static_cast<int>(i));
    joint = qpe_forward(joint, u, m, sys, cfg);

    std::vector<double> probs = joint.probabilities_joint(phase_targets(m));
    const Index k = static_cast<Index>(rng.discrete(probs));
    auto [collapsed, prob] = joint.project_joint(phase_targets(m), k);
    (void)prob;

    // Phase registers lead the layout, so the system block is contiguous.
    const Index sys_dim = system.dim();
    Vector sys_amps = collapsed.amplitudes().segment(k * sys_dim, sys_dim);
    QuantumState post = QuantumState::pure(system.registers(), std::move(sys_amps));

    EigenSample sample;
    sample.outcome = static_cast<std::uint64_t>(k);
    sample.bits = m;
    sample.t_pe = t_pe;
    sample.raw_phase = phase_from_outcome(sample.outcome, m);
    sample.eigenvalue_estimate = sample.raw_phase / t_pe;
    return {sample, post};
}

std::pair<QuantumState, double> controlled_rotation_and_postselect(
    const QuantumState& joint, double c, const Matrix& u, int m,
    const std::vector<int>& system_targets, double t_pe, const SimConfig& cfg) {
    const Index big_m = Index(1) << m;
    std::vector<double> probs = joint.probabilities_joint(phase_targets(m));

    // The rotation must be unitary on every populated eigenvalue-register
    // value; unpopulated grid values are left untouched.
    for (Index y = 0; y < big_m; ++y) {
        const double lam = phase_from_outcome(static_cast<std::uint64_t>(y), m) / t_pe;
        if (probs[static_cast<std::size_t>(y)] > 1e-12 && std::abs(c * lam) > 1.0 + 1e-9)
            throw Error(ErrorCategory::Domain, "RotationOverflow",
                        "c * |lambda| exceeds 1 on a populated eigenvalue");
    }

    QuantumState st = tensor_append(joint, {"rot", 2, RegKind::Rotation}, 0);
    const int rot = static_cast<int>(st.registers().size()) - 1;

    Matrix rotation = Matrix::Identity(2 * big_m, 2 * big_m);
    for (Index y = 0; y < big_m; ++y) {
        const double lam = phase_from_outcome(static_cast<std::uint64_t>(y), m) / t_pe;
        const double cl = c * lam;
        if (std::abs(cl) > 1.0) continue;  // unpopulated, keep identity
        const double s = std::sqrt(std::max(0.0, 1.0 - cl * cl));
        rotation(2 * y + 0, 2 * y + 0) = s;
        rotation(2 * y + 0, 2 * y + 1) = -cl;
        rotation(2 * y + 1, 2 * y + 0) = cl;
        rotation(2 * y + 1, 2 * y + 1) = s;
    }
    std::vector<int> rot_targets = phase_targets(m);
    rot_targets.push_back(rot);
    st = st.apply(rotation, rot_targets);

    st = qpe_inverse(st, u, m, system_targets, cfg);
    auto [post, p_succ] = st.project(rot, 1);
    return {post, p_succ};
}

// ---------------------------------------------------------------------------
// SpectralSampler

SpectralSampler::SpectralSampler(const Matrix& u, double t, std::vector<Register> regs,
                                 double norm_bound, const SimConfig& cfg)
    : regs_(std::move(regs)), u_(u), t_(t), norm_bound_(norm_bound), cfg_(cfg),
      bits_(cfg.qpe_bits) {
    // Enumerate the sampled sector: slot digit in {0, 2}, ancillas in |0>.
    const int nregs = static_cast<int>(regs_.size());
    std::vector<Index> strides(static_cast<std::size_t>(nregs));
    Index total = 1;
    for (int i = nregs - 1; i >= 0; --i) {
        strides[static_cast<std::size_t>(i)] = total;
        total *= regs_[static_cast<std::size_t>(i)].dim;
    }
    for (Index idx = 0; idx < total; ++idx) {
        bool in_sector = true;
        for (int i = 0; i < nregs && in_sector; ++i) {
            const Index digit = (idx / strides[static_cast<std::size_t>(i)]) %
                                regs_[static_cast<std::size_t>(i)].dim;
            if (regs_[static_cast<std::size_t>(i)].kind == RegKind::IndexSlot)
                in_sector = (digit == 0 || digit == 2);
            else if (regs_[static_cast<std::size_t>(i)].kind == RegKind::Ancilla)
                in_sector = (digit == 0);
        }
        if (in_sector) sector_indices_.push_back(idx);
    }

    if (cfg_.mode == SimConfig::Mode::IdealSampler) {
        Matrix h = Backend::hermitian_log(u_, t_);
        Eigen::SelfAdjointEigenSolver<Matrix> es(h);
        for (Index k = 0; k < h.rows(); ++k) {
            double w = 0.0;
            for (Index idx : sector_indices_) w += std::norm(es.eigenvectors()(idx, k));
            eigenvalues_.push_back(es.eigenvalues()(k));
            weights_.push_back(w);
        }
    }
}

double SpectralSampler::effective_eps_sigma() const {
    if (cfg_.mode == SimConfig::Mode::IdealSampler) return cfg_.eps_sigma;
    const double grid = 2.0 * kPi / (static_cast<double>(Index(1) << bits_) * t_);
    return 0.5 * grid / cfg_.sigma_band_lo;
}

double SpectralSampler::sample(Rng& rng) const { return sample_detailed(rng).eigenvalue_estimate; }

EigenSample SpectralSampler::sample_detailed(Rng& rng) const {
    if (cfg_.mode == SimConfig::Mode::IdealSampler) {
        const std::size_t k = rng.discrete(weights_);
        EigenSample s;
        s.bits = bits_;
        s.t_pe = t_;
        s.eigenvalue_estimate = eigenvalues_[k] * (1.0 + cfg_.eps_sigma * rng.normal());
        s.raw_phase = s.eigenvalue_estimate * t_;
        return s;
    }
    // Circuit mode: a uniformly random sector basis state realizes the
    // maximally mixed state on the sector, shot by shot.
    const Index idx = sector_indices_[rng.pick(sector_indices_.size())];
    Vector amps = Vector::Zero(u_.rows());
    amps(idx) = 1.0;
    QuantumState basis = QuantumState::pure(regs_, std::move(amps));
    auto [sample, post] = phase_estimate(basis, u_, bits_, t_, norm_bound_, rng, cfg_);
    (void)post;
    return sample;
}

// ---------------------------------------------------------------------------
// Oracle

Matrix oracle_eval(const ExprNode& node, const MatrixRegistry& registry,
                   const FunctionRegistry& functions) {
    switch (node.kind) {
        case NodeKind::Leaf:
            return registry.get(node.name).padded;
        case NodeKind::Add:
            return oracle_eval(node.children[0], registry, functions) +
                   oracle_eval(node.children[1], registry, functions);
        case NodeKind::Mult:
            return oracle_eval(node.children[0], registry, functions) *
                   oracle_eval(node.children[1], registry, functions);
        case NodeKind::Tensor:
            return kron(oracle_eval(node.children[0], registry, functions),
                        oracle_eval(node.children[1], registry, functions));
        case NodeKind::KronSum: {
            Matrix l = oracle_eval(node.children[0], registry, functions);
            Matrix r = oracle_eval(node.children[1], registry, functions);
            return kron(l, Matrix::Identity(r.rows(), r.cols())) +
                   kron(Matrix::Identity(l.rows(), l.cols()), r);
        }
        case NodeKind::Hadamard:
            return oracle_eval(node.children[0], registry, functions)
                .cwiseProduct(oracle_eval(node.children[1], registry, functions));
        case NodeKind::Func: {
            const FunctionSpec& fn = functions.get(node.name);
            Matrix a = oracle_eval(node.children[0], registry, functions);
            if (!is_hermitian(a, 1e-10))
                throw Error(ErrorCategory::Domain, "DomainViolation",
                            "operator function '" + fn.name + "' needs a Hermitian operand");
            Eigen::SelfAdjointEigenSolver<Matrix> es(a);
            for (Index k = 0; k < a.rows(); ++k)
                if (!fn.in_domain(es.eigenvalues()(k)))
                    throw Error(ErrorCategory::Domain, "DomainViolation",
                                "eigenvalue outside the domain of '" + fn.name + "'");
            return hermitian_function(a, fn.eval);
        }
    }
    throw Error(ErrorCategory::Internal, "BadNode", "unreachable");
}

}  // namespace qmat
