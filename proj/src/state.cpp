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

#include "qmat/state.hpp"

#include <numeric>

#include "qmat/detail/subspace.hpp"
#include "qmat/embedding.hpp"
#include "qmat/errors.hpp"

namespace qmat {

using detail::SubspaceMap;
using detail::apply_to_vector;
using detail::subspace_map;

namespace {

Index total_dim(const std::vector<Register>& regs) {
    Index d = 1;
    for (const auto& r : regs) d *= r.dim;
    return d;
}

}  // namespace

QuantumState QuantumState::pure(std::vector<Register> regs, Vector amplitudes) {
    if (total_dim(regs) != amplitudes.size())
        throw Error(ErrorCategory::Dim, "DimMismatch", "amplitude length does not match registers");
    QuantumState st;
    st.regs_ = std::move(regs);
    st.amps_ = std::move(amplitudes);
    st.pure_ = true;
    if (std::abs(st.norm() - 1.0) > 1e-10)
        throw Error(ErrorCategory::Domain, "NotNormalized", "pure state must have unit norm");
    return st;
}

QuantumState QuantumState::density(std::vector<Register> regs, Matrix rho) {
    if (total_dim(regs) != rho.rows() || rho.rows() != rho.cols())
        throw Error(ErrorCategory::Dim, "DimMismatch", "density matrix does not match registers");
    if (!is_hermitian(rho, 1e-9))
        throw Error(ErrorCategory::Domain, "NotHermitian", "density matrix must be Hermitian");
    if (std::abs(rho.trace().real() - 1.0) > 1e-9)
        throw Error(ErrorCategory::Domain, "NotNormalized", "density matrix must have unit trace");
    QuantumState st;
    st.regs_ = std::move(regs);
    st.rho_ = std::move(rho);
    st.pure_ = false;
    return st;
}

int QuantumState::register_index(const std::string& name) const {
    for (std::size_t i = 0; i < regs_.size(); ++i)
        if (regs_[i].name == name) return static_cast<int>(i);
    throw Error(ErrorCategory::Internal, "UnknownRegister", "no register named '" + name + "'");
}

Index QuantumState::stride(int reg) const {
    Index s = 1;
    for (std::size_t i = regs_.size(); i-- > static_cast<std::size_t>(reg) + 1;) s *= regs_[i].dim;
    return s;
}

QuantumState QuantumState::apply(const Matrix& u, const std::vector<int>& targets) const {
    Index udim = 1;
    for (int t : targets) {
        if (t < 0 || t >= static_cast<int>(regs_.size()))
            throw Error(ErrorCategory::Dim, "DimMismatch", "target register out of range");
        udim *= regs_[static_cast<std::size_t>(t)].dim;
    }
    if (u.rows() != udim || u.cols() != udim)
        throw Error(ErrorCategory::Dim, "DimMismatch", "operator does not match target registers");
    if (!is_unitary(u, 1e-8))
        throw Error(ErrorCategory::Domain, "NonUnitary", "operator is not unitary within 1e-8");

    SubspaceMap map = subspace_map(regs_, targets);
    QuantumState out = *this;
    if (pure_) {
        out.amps_ = apply_to_vector(amps_, u, map);
    } else {
        Matrix rho = rho_;
        for (Index c = 0; c < rho.cols(); ++c)
            rho.col(c) = apply_to_vector(rho.col(c), u, map);
        for (Index r = 0; r < rho.rows(); ++r)
            rho.row(r) = apply_to_vector(rho.row(r).conjugate().transpose(), u, map).conjugate().transpose();
        out.rho_ = std::move(rho);
    }
    return out;
}

std::vector<double> QuantumState::probabilities(int reg) const {
    return probabilities_joint({reg});
}

std::vector<double> QuantumState::probabilities_joint(const std::vector<int>& targets) const {
    SubspaceMap map = subspace_map(regs_, targets);
    std::vector<double> p(map.sub.size(), 0.0);
    for (std::size_t o = 0; o < map.sub.size(); ++o) {
        double acc = 0.0;
        for (Index base : map.rest) {
            Index idx = base + map.sub[o];
            acc += pure_ ? std::norm(amps_(idx)) : rho_(idx, idx).real();
        }
        p[o] = acc;
    }
    return p;
}

std::map<Index, std::uint64_t> QuantumState::measure(int reg, std::uint64_t shots, Rng& rng) const {
    std::vector<double> p = probabilities(reg);
    std::map<Index, std::uint64_t> hist;
    for (std::uint64_t s = 0; s < shots; ++s)
        hist[static_cast<Index>(rng.discrete(p))] += 1;
    return hist;
}

std::tuple<Index, QuantumState, double> QuantumState::measure_collapse(int reg, Rng& rng) const {
    std::vector<double> p = probabilities(reg);
    Index outcome = static_cast<Index>(rng.discrete(p));
    auto [post, prob] = project(reg, outcome);
    return {outcome, post, prob};
}

std::pair<QuantumState, double> QuantumState::project(int reg, Index value) const {
    return project_joint({reg}, value);
}

std::pair<QuantumState, double> QuantumState::project_joint(const std::vector<int>& targets,
                                                            Index value) const {
    SubspaceMap map = subspace_map(regs_, targets);
    QuantumState out = *this;
    double prob = 0.0;
    if (pure_) {
        Vector v = Vector::Zero(amps_.size());
        for (Index base : map.rest) {
            Index idx = base + map.sub[static_cast<std::size_t>(value)];
            v(idx) = amps_(idx);
            prob += std::norm(amps_(idx));
        }
        if (prob > 0.0) v /= std::sqrt(prob);
        out.amps_ = std::move(v);
    } else {
        Matrix proj = Matrix::Zero(rho_.rows(), rho_.cols());
        for (Index b1 : map.rest) {
            Index i = b1 + map.sub[static_cast<std::size_t>(value)];
            prob += rho_(i, i).real();
            for (Index b2 : map.rest) {
                Index j = b2 + map.sub[static_cast<std::size_t>(value)];
                proj(i, j) = rho_(i, j);
            }
        }
        if (prob > 0.0) proj /= prob;
        out.rho_ = std::move(proj);
    }
    return {out, prob};
}

double QuantumState::norm() const {
    return pure_ ? amps_.norm() : std::sqrt(std::abs(rho_.squaredNorm()));
}

QuantumState tensor_append(const QuantumState& st, const Register& reg, Index basis_value) {
    if (!st.is_pure())
        throw Error(ErrorCategory::Internal, "DimMismatch", "tensor_append needs a pure state");
    Vector basis = Vector::Zero(reg.dim);
    basis(basis_value) = 1.0;
    QuantumState out;
    out.regs_ = st.regs_;
    out.regs_.push_back(reg);
    out.amps_ = kron(st.amps_, basis);
    out.pure_ = true;
    return out;
}

QuantumState prepare_state(const Vector& v, int which) {
    if (v.size() == 0 || v.norm() == 0.0)
        throw Error(ErrorCategory::Domain, "ZeroVector", "state preparation needs a nonzero vector");
    auto emb = embedding::embed_vector(v, which);
    Vector amps = emb.vector / v.norm();
    std::vector<Register> regs = {{"index", 3, RegKind::IndexSlot},
                                  {"data", v.size(), RegKind::Data}};
    return QuantumState::pure(std::move(regs), std::move(amps));
}

QuantumState maximally_mixed(Index n) {
    if (n < 1) throw Error(ErrorCategory::Dim, "DimMismatch", "dimension must be positive");
    Matrix rho = Matrix::Identity(n, n) / static_cast<double>(n);
    return QuantumState::density({{"data", n, RegKind::Data}}, std::move(rho));
}

}  // namespace qmat
