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

#include "qmat/estimators.hpp"

#include <cmath>

#include "qmat/detail/subspace.hpp"
#include "qmat/embedding.hpp"
#include "qmat/errors.hpp"

namespace qmat {

namespace {

constexpr double kPi = 3.14159265358979323846;

nlohmann::ordered_json complex_json(Complex z) {
    return nlohmann::ordered_json::array({z.real(), z.imag()});
}

// Bernoulli estimate of p from `shots` draws.
std::pair<double, double> bernoulli_estimate(double p, std::uint64_t shots, Rng& rng) {
    std::uint64_t hits = 0;
    for (std::uint64_t s = 0; s < shots; ++s)
        if (rng.bernoulli(p)) ++hits;
    const double phat = double(hits) / double(shots);
    const double se = std::sqrt(std::max(phat * (1.0 - phat), 0.0) / double(shots));
    return {phat, se};
}

struct HadamardTest {
    Complex value;
    double se_re, se_im;
};

// Appendix-style two-part Hadamard test between unit vectors.
HadamardTest hadamard_test(const Vector& a, const Vector& b, std::uint64_t m, std::uint64_t seed) {
    const Complex overlap = a.dot(b);  // conjugates a
    Rng rng_re = Rng::derive(seed, 1);
    Rng rng_im = Rng::derive(seed, 2);
    auto [p_re, se_pre] = bernoulli_estimate(0.5 * (1.0 + overlap.real()), m, rng_re);
    auto [p_im, se_pim] = bernoulli_estimate(0.5 * (1.0 + overlap.imag()), m, rng_im);
    return {Complex(2.0 * p_re - 1.0, 2.0 * p_im - 1.0), 2.0 * se_pre, 2.0 * se_pim};
}

// The operand block C of a program's realized generator X_3(C), read off the
// ancilla-restricted (0,2) block. Requires the program clock to stay inside
// the log branch.
struct RecoveredGenerator {
    Matrix h;        // full-space generator
    Matrix operand;  // C
};

RecoveredGenerator recover_generator(const CompiledProgram& program, const Backend& backend) {
    if (program.norm_bound * std::abs(program.t) > kPi * 0.999)
        throw Error(ErrorCategory::Budget, "PrecisionOverflow",
                    "program time is too long to recover the generator; compile at smaller t");
    if (std::abs(program.t) < 1e-300)
        throw Error(ErrorCategory::Budget, "PrecisionOverflow",
                    "cannot sample from an empty (t = 0) program");
    CompiledProgram plain = program;
    plain.controlled = false;
    Matrix u = execute(plain, backend);
    RecoveredGenerator rec;
    rec.h = Backend::hermitian_log(u, program.t);
    Matrix hs = restrict_to_ancilla_sector(rec.h, program.registers);
    const Index nd = hs.rows() / 3;
    rec.operand = hs.block(0, 2 * nd, nd, nd);
    return rec;
}

// X_3(I) on the program's index+data registers, identity on ancillas.
Matrix embedded_identity(const CompiledProgram& program) {
    std::vector<int> targets;
    for (std::size_t i = 0; i < program.registers.size(); ++i)
        if (program.registers[i].kind == RegKind::IndexSlot ||
            program.registers[i].kind == RegKind::Data)
            targets.push_back(static_cast<int>(i));
    Matrix x3i = embedding::embed(Matrix::Identity(program.data_dim(), program.data_dim()), 3).matrix;
    return detail::expand_operator(program.registers, targets, x3i);
}

// QPE-friendly sampler over a synthesized generator: the clock is chosen to
// saturate the aliasing-safe range for the given bound.
SpectralSampler make_sampler(const Matrix& h, const CompiledProgram& program, double bound,
                             const SimConfig& cfg) {
    const double cap = kPi * (1.0 - std::pow(2.0, -cfg.qpe_bits));
    const double t_s = cap / std::max(bound, 1e-12);
    Matrix u = Backend::expm_hermitian(h, t_s);
    return SpectralSampler(u, t_s, program.registers, bound, cfg);
}

struct TracePart {
    double estimate = 0.0;
    double std_error = 0.0;
    double bound_abs = 0.0;
    double shift = 0.0;
    std::uint64_t samples = 0;
    double eps_sigma_eff = 0.0;
    std::uint64_t band_violations = 0;
};

// N * mean(|l'| - c) over uniform block-0/2 eigenvector samples of h + c X3(I).
TracePart trace_part(const Matrix& h, const Matrix& operand, const CompiledProgram& program,
                     const Backend& backend, double shift_c, std::uint64_t T, double eps_sampling,
                     double confidence_a, std::uint64_t seed, std::uint64_t stream_base) {
    const Index n = operand.rows();
    TracePart part;

    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (operand + Matrix(operand.adjoint())));
    const double fro = operand.norm();
    part.shift = shift_c > 0 ? shift_c : 1.1 * std::max(fro, 1e-9);
    const double lam_min = es.eigenvalues().minCoeff();
    const double bound = es.eigenvalues().cwiseAbs().maxCoeff() + part.shift;

    const SimConfig& cfg = backend.config();
    const double cap = kPi * (1.0 - std::pow(2.0, -cfg.qpe_bits));
    const double resolution = 2.0 * kPi / (std::pow(2.0, cfg.qpe_bits) * (cap / bound));
    if (lam_min + part.shift <= std::max(1e-9, 0.5 * resolution))
        throw Error(ErrorCategory::Domain, "ShiftTooSmall",
                    "shift does not move the spectrum clear of zero");

    Matrix h_shifted = h + part.shift * embedded_identity(program);
    SpectralSampler sampler = make_sampler(h_shifted, program, bound, cfg);
    part.eps_sigma_eff = sampler.effective_eps_sigma();

    if (T == 0) {
        const double e2 = part.eps_sigma_eff * part.eps_sigma_eff;
        T = static_cast<std::uint64_t>(
            std::ceil(cfg.chebyshev_c * (1.0 + e2) /
                      (eps_sampling * eps_sampling * confidence_a)));
    }
    part.samples = T;

    double acc = 0.0, acc2 = 0.0;
    for (std::uint64_t j = 0; j < T; ++j) {
        Rng rng = Rng::derive(seed, stream_base + j);
        const double lam = std::abs(sampler.sample(rng));
        if (lam < std::max(1e-9, 0.25 * resolution))
            throw Error(ErrorCategory::Domain, "ShiftTooSmall",
                        "sampled eigenvalue at zero; the shift is too small");
        if (lam < cfg.sigma_band_lo || lam > cfg.sigma_band_hi) ++part.band_violations;
        const double v = lam - part.shift;
        acc += v;
        acc2 += v * v;
    }
    const double mean = acc / double(T);
    const double var = std::max(acc2 / double(T) - mean * mean, 0.0);
    part.estimate = double(n) * mean;
    part.std_error = double(n) * std::sqrt(var / double(T));
    // Guarantee relative to the shifted trace: |est - Tr| <= (eps + eps_l) Tr(A').
    part.bound_abs = (eps_sampling + part.eps_sigma_eff) *
                     (std::abs(part.estimate) + double(n) * part.shift);
    return part;
}

nlohmann::ordered_json part_json(const TracePart& p) {
    nlohmann::ordered_json j;
    j["estimate"] = p.estimate;
    j["std_error"] = p.std_error;
    j["bound_abs"] = p.bound_abs;
    j["shift"] = p.shift;
    j["samples"] = p.samples;
    j["eps_sigma_eff"] = p.eps_sigma_eff;
    j["band_violations"] = p.band_violations;
    return j;
}

}  // namespace

nlohmann::ordered_json EstimationResult::to_json() const {
    nlohmann::ordered_json j;
    if (value_is_complex)
        j["value"] = complex_json(value);
    else
        j["value"] = value.real();
    j["std_error"] = std_error;
    j["samples"] = samples;
    j["confidence_a"] = confidence_a;
    j["error_bound"] = error_bound;
    j["bound_kind"] = bound_kind;
    j["diagnostics"] = diagnostics;
    return j;
}

EstimationResult estimate_inner_product(const Vector& x, const Vector& y, std::uint64_t m,
                                        std::uint64_t seed) {
    if (x.size() == 0 || y.size() == 0 || x.norm() == 0.0 || y.norm() == 0.0)
        throw Error(ErrorCategory::Domain, "ZeroVector", "inner product needs nonzero vectors");
    if (x.size() != y.size())
        throw Error(ErrorCategory::Dim, "DimMismatch", "vector lengths differ");
    if (m < 1) throw Error(ErrorCategory::Stat, "BadShots", "need at least one shot");

    Vector xn = x / x.norm(), yn = y / y.norm();
    HadamardTest ht = hadamard_test(xn, yn, m, seed);

    EstimationResult res;
    res.value = ht.value;
    res.value_is_complex = true;
    res.samples = m;
    res.std_error = std::sqrt(ht.se_re * ht.se_re + ht.se_im * ht.se_im);
    res.error_bound = 1.0 / std::sqrt(double(m));  // per part
    res.bound_kind = "absolute";
    res.diagnostics["se_re"] = ht.se_re;
    res.diagnostics["se_im"] = ht.se_im;
    return res;
}

EstimationResult estimate_quadratic_form(const Vector& x, const Vector& y,
                                         const CompiledProgram& program, const Backend& backend,
                                         std::uint64_t m, int qpe_bits, std::uint64_t seed) {
    if (!program.controlled)
        throw Error(ErrorCategory::Domain, "ProgramNotControlled",
                    "the quadratic-form pipeline needs a controlled program");
    const Index n = program.data_dim();
    if (x.size() != n || y.size() != n)
        throw Error(ErrorCategory::Dim, "DimMismatch", "vector length does not match the program");
    if (x.norm() == 0.0 || y.norm() == 0.0)
        throw Error(ErrorCategory::Domain, "ZeroVector", "quadratic form needs nonzero vectors");

    const SimConfig& cfg = backend.config();
    const double t_pe = program.t;
    const double cap = kPi * (1.0 - std::pow(2.0, -qpe_bits));
    if (program.norm_bound * std::abs(t_pe) > cap * (1.0 + 1e-12))
        throw Error(ErrorCategory::Budget, "PrecisionOverflow",
                    "norm bound times program time exceeds the aliasing-safe range");

    CompiledProgram plain = program;
    plain.controlled = false;
    Matrix u = execute(plain, backend);

    // |V_2(y)> on (index x data), ancillas in |0>. Data registers sit right
    // after the index register, ancillas after them.
    const Index anc_dim = program.space_dim() / (3 * n);
    Vector emb = embedding::embed_vector(y, 2).vector / y.norm();
    Vector full = Vector::Zero(program.space_dim());
    for (Index i = 0; i < 3 * n; ++i) full(i * anc_dim) = emb(i);
    QuantumState sys = QuantumState::pure(program.registers, std::move(full));

    QuantumState joint = qpe_attach_phase(sys, qpe_bits);
    std::vector<int> sys_targets;
    for (std::size_t i = 0; i < program.registers.size(); ++i)
        sys_targets.push_back(qpe_bits + static_cast<int>(i));
    joint = qpe_forward(joint, u, qpe_bits, sys_targets, cfg);

    // c l <= 1 over the whole grid: the largest representable |l| is pi/t.
    const double c = std::abs(t_pe) / kPi;
    auto [post, p_succ] =
        controlled_rotation_and_postselect(joint, c, u, qpe_bits, sys_targets, t_pe, cfg);
    if (p_succ < cfg.postselect_floor)
        throw Error(ErrorCategory::Stat, "PostselectionStarved",
                    "postselection success probability " + std::to_string(p_succ) +
                        " fell below the configured floor");

    Rng rng_ps = Rng::derive(seed, 3);
    auto [p_hat, se_p] = bernoulli_estimate(p_succ, m, rng_ps);

    // Reference |0...0>|V_1(x)>|rot=1> on the postselected layout.
    Vector v1 = embedding::embed_vector(x, 1).vector / x.norm();
    Vector ref = Vector::Zero(post.dim());
    for (Index i = 0; i < 3 * n; ++i) ref(i * anc_dim * 2 + 1) = v1(i);
    HadamardTest ht = hadamard_test(ref, post.amplitudes(), m, seed);

    const double scale = std::sqrt(std::max(p_hat, 0.0)) / c * x.norm() * y.norm();
    EstimationResult res;
    res.value = ht.value * scale;
    res.value_is_complex = true;
    res.samples = m;
    const double se_inner = std::sqrt(ht.se_re * ht.se_re + ht.se_im * ht.se_im);
    res.std_error = se_inner * scale +
                    std::abs(res.value) * (p_hat > 0 ? 0.5 * se_p / p_hat : 0.0);
    res.error_bound = 3.0 * res.std_error;
    res.bound_kind = "absolute";
    res.diagnostics["success_prob"] = p_succ;
    res.diagnostics["success_prob_sampled"] = p_hat;
    res.diagnostics["success_prob_se"] = se_p;
    res.diagnostics["rotation_c"] = c;
    res.diagnostics["qpe_bits"] = qpe_bits;
    res.diagnostics["t_pe"] = t_pe;
    res.diagnostics["overlap"] = complex_json(ht.value);
    return res;
}

EigenSample sample_eigenvalue(const CompiledProgram& program, const Backend& backend, int qpe_bits,
                              double t_pe, std::uint64_t seed) {
    RecoveredGenerator rec = recover_generator(program, backend);
    SimConfig cfg = backend.config();
    if (qpe_bits > 0) cfg.qpe_bits = qpe_bits;
    const double bound = std::max(program.norm_bound, 1e-12);
    SpectralSampler sampler = [&] {
        if (t_pe > 0) {
            const double cap = kPi * (1.0 - std::pow(2.0, -cfg.qpe_bits));
            if (bound * t_pe > cap * (1.0 + 1e-12))
                throw Error(ErrorCategory::Budget, "PrecisionOverflow",
                            "requested t_pe exceeds the aliasing-safe range");
            Matrix u = Backend::expm_hermitian(rec.h, t_pe);
            return SpectralSampler(u, t_pe, program.registers, bound, cfg);
        }
        return make_sampler(rec.h, program, bound, cfg);
    }();
    Rng rng = Rng::derive(seed, 0);
    return sampler.sample_detailed(rng);
}

EstimationResult estimate_schatten_p(const CompiledProgram& program, const Backend& backend,
                                     double p, std::uint64_t T, double eps_sampling,
                                     double eps_sigma, double confidence_a, std::uint64_t seed) {
    if (!(p > 0.0) || !std::isfinite(p))
        throw Error(ErrorCategory::Domain, "InvalidP", "Schatten order must be finite and positive");
    if (T == 0 && p < 1.0)
        throw Error(ErrorCategory::Domain, "InvalidP",
                    "auto-sized sampling needs p >= 1 (x^p is not Lipschitz near 0 otherwise)");
    if (!(eps_sampling > 0.0) || !(confidence_a > 0.0) || confidence_a >= 1.0)
        throw Error(ErrorCategory::Stat, "BadConfig", "need eps > 0 and 0 < a < 1");

    RecoveredGenerator rec = recover_generator(program, backend);
    SimConfig cfg = backend.config();
    cfg.eps_sigma = eps_sigma;
    const Index n = program.data_dim();
    const double sigma_max = std::max(program.norm_bound, 1e-12);
    const double k_p = p * std::pow(sigma_max, p - 1.0);

    SpectralSampler sampler = make_sampler(rec.h, program, sigma_max, cfg);
    const double eps_sigma_eff = sampler.effective_eps_sigma();

    if (T == 0)
        T = static_cast<std::uint64_t>(
            std::ceil(cfg.chebyshev_c * k_p * k_p * (1.0 + eps_sigma_eff * eps_sigma_eff) /
                      (eps_sampling * eps_sampling * confidence_a)));
    if (T < 1) T = 1;

    double acc = 0.0, acc2 = 0.0, acc_abs = 0.0;
    std::uint64_t band_violations = 0;
    for (std::uint64_t j = 0; j < T; ++j) {
        Rng rng = Rng::derive(seed, j);
        const double lam = std::abs(sampler.sample(rng));
        if (lam > 1e-12 && (lam < cfg.sigma_band_lo || lam > cfg.sigma_band_hi)) ++band_violations;
        const double v = std::pow(lam, p);
        acc += v;
        acc2 += v * v;
        acc_abs += lam;
    }
    const double mean = acc / double(T);
    const double var = std::max(acc2 / double(T) - mean * mean, 0.0);
    const double y_tilde = double(n) * mean;
    const double se_y = double(n) * std::sqrt(var / double(T));

    EstimationResult res;
    res.value = std::pow(std::max(y_tilde, 0.0), 1.0 / p);
    res.samples = T;
    res.confidence_a = confidence_a;
    if (y_tilde > 0)
        res.std_error = (1.0 / p) * std::pow(y_tilde, 1.0 / p - 1.0) * se_y;
    // relative bound |eps|^{1/p} + kappa_p |eps_sigma|^{1/p}, with kappa_p
    // reported from the measured trace-norm ratio.
    const double trace_norm_est = double(n) * acc_abs / double(T);
    const double kappa_measured =
        y_tilde > 0 ? std::pow(k_p * trace_norm_est / y_tilde, 1.0 / p) : 0.0;
    res.error_bound = std::pow(eps_sampling, 1.0 / p) +
                      kappa_measured * std::pow(eps_sigma_eff, 1.0 / p);
    res.bound_kind = "relative";
    res.diagnostics["p"] = p;
    res.diagnostics["k_p"] = k_p;
    res.diagnostics["kappa_measured"] = kappa_measured;
    res.diagnostics["eps_sampling"] = eps_sampling;
    res.diagnostics["eps_sigma_eff"] = eps_sigma_eff;
    res.diagnostics["y_tilde"] = y_tilde;
    res.diagnostics["band_violations"] = band_violations;
    res.diagnostics["mode"] = cfg.mode == SimConfig::Mode::IdealSampler ? "ideal-sampler"
                                                                        : "circuit-qpe";
    return res;
}

EstimationResult estimate_trace(const CompiledProgram& program, const Backend& backend,
                                double shift_c, std::uint64_t T, double eps_sampling,
                                double confidence_a, std::uint64_t seed) {
    if (!(eps_sampling > 0.0) || !(confidence_a > 0.0) || confidence_a >= 1.0)
        throw Error(ErrorCategory::Stat, "BadConfig", "need eps > 0 and 0 < a < 1");
    RecoveredGenerator rec = recover_generator(program, backend);

    EstimationResult res;
    res.confidence_a = confidence_a;
    res.bound_kind = "absolute";

    if (is_hermitian(rec.operand, 1e-8)) {
        TracePart part = trace_part(rec.h, rec.operand, program, backend, shift_c, T, eps_sampling,
                                    confidence_a, seed, 0);
        res.value = part.estimate;
        res.std_error = part.std_error;
        res.samples = part.samples;
        res.error_bound = part.bound_abs;
        res.diagnostics["part"] = part_json(part);
        return res;
    }

    // Non-Hermitian operand: Tr f = (1/2) Tr(f + f^dag) - (i/2) Tr(i(f - f^dag)).
    // Both companions are Hermitian; their generators come from conjugating
    // the realized generator with the 0<->2 block swap (adjoint) and U_1
    // (imaginary factor).
    const Index nd = rec.operand.rows();
    const Index anc = program.space_dim() / (3 * nd);
    auto conj_full = [&](const Matrix& small) {
        std::vector<int> targets;
        for (std::size_t i = 0; i < program.registers.size(); ++i)
            if (program.registers[i].kind != RegKind::Ancilla)
                targets.push_back(static_cast<int>(i));
        (void)anc;
        return detail::expand_operator(program.registers, targets, small);
    };
    Matrix swap = conj_full(embedding::swap02(nd));
    Matrix u1 = conj_full(embedding::phase_unitary_u1(nd));

    Matrix h_sym = rec.h + swap * rec.h * swap.adjoint();
    Matrix h_if = u1.adjoint() * rec.h * u1;  // X_3(i f)
    Matrix h_anti = h_if + swap * h_if * swap.adjoint();

    Matrix op_sym = rec.operand + rec.operand.adjoint();
    Matrix op_anti = Complex(0, 1) * rec.operand + (Complex(0, 1) * rec.operand).adjoint();

    TracePart sym = trace_part(h_sym, op_sym, program, backend, shift_c, T, eps_sampling,
                               confidence_a, seed, 0);
    TracePart anti = trace_part(h_anti, op_anti, program, backend, shift_c, T, eps_sampling,
                                confidence_a, seed, (std::uint64_t(1) << 40));

    res.value = Complex(0.5 * sym.estimate, -0.5 * anti.estimate);
    res.value_is_complex = true;
    res.std_error = 0.5 * std::sqrt(sym.std_error * sym.std_error +
                                    anti.std_error * anti.std_error);
    res.samples = sym.samples + anti.samples;
    res.error_bound = 0.5 * (sym.bound_abs + anti.bound_abs);
    res.diagnostics["hermitian_part"] = part_json(sym);
    res.diagnostics["antihermitian_part"] = part_json(anti);
    return res;
}

EstimationResult estimate_determinant(const CompiledProgram& log_program, const Backend& backend,
                                      std::uint64_t T, double eps_sampling, double confidence_a,
                                      std::uint64_t seed) {
    RecoveredGenerator rec = recover_generator(log_program, backend);
    if (!is_hermitian(rec.operand, 1e-7))
        throw Error(ErrorCategory::Domain, "NotPositiveDefinite",
                    "determinant estimation needs the Hermitian log of a positive definite operand");

    EstimationResult tr = estimate_trace(log_program, backend, 0.0, T, eps_sampling, confidence_a,
                                         seed);
    const double tr_log = tr.value.real();

    EstimationResult res;
    res.value = std::exp(tr_log);
    res.samples = tr.samples;
    res.confidence_a = confidence_a;
    // |e^a - e^b| <= e^{max(a,b)} |a - b|, and the exponent stays below
    // tr_log + bound; K_e <= 1 whenever that is nonpositive.
    const double k_e = std::exp(std::min(tr_log + tr.error_bound, 700.0));
    res.error_bound = k_e * tr.error_bound;
    res.bound_kind = "absolute";
    res.std_error = res.value.real() * tr.std_error;
    res.diagnostics["trace_log"] = tr.to_json();
    res.diagnostics["k_e"] = k_e;
    return res;
}

}  // namespace qmat
