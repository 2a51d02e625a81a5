#ifndef KINETIC_COCYCLE_HPP
#define KINETIC_COCYCLE_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "kinetic/baseflow.hpp"
#include "kinetic/error.hpp"
#include "kinetic/generator.hpp"
#include "kinetic/mat2.hpp"
#include "kinetic/quadrature.hpp"
#include "kinetic/random.hpp"

namespace kinetic {

inline constexpr double renorm_upper = 1e8;
inline constexpr double renorm_lower = 1e-8;

/// Run f(0..n-1) on the available hardware threads; the first exception is rethrown.
template <class F>
void parallel_for(std::size_t n, F&& f)
{
    const std::size_t workers =
        std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

/// Exact RK4 propagator of one step h for the constant system X' = A X.
inline Mat2 rk4_step_matrix(const Mat2& a, double h)
{
    const Mat2 ha = h * a;
    const Mat2 id = Mat2::identity();
    return id + ha * (id + 0.5 * ha * (id + (1.0 / 3.0) * ha * (id + 0.25 * ha)));
}

inline Mat2 matrix_power(Mat2 m, std::uint64_t n)
{
    Mat2 out = Mat2::identity();
    while (n > 0) {
        if (n & 1u)
            out = m * out;
        n >>= 1u;
        if (n > 0)
            m = m * m;
    }
    return out;
}

/// Number of equal RK4 steps covering `length` with steps no longer than `step`.
inline std::uint64_t step_count(double length, double step)
{
    const double raw = std::ceil(length / step - 1e-9);
    return static_cast<std::uint64_t>(std::max(1.0, raw));
}

/// Fourth-order fixed-step propagation of X' = A X over [0, length] for constant A.
inline Mat2 rk4_constant(const Mat2& a, double length, double step)
{
    const std::uint64_t n = step_count(length, step);
    return matrix_power(rk4_step_matrix(a, length / static_cast<double>(n)), n);
}

/// Closed form for constant R_theta, S and zero generators, if `a` is one of them.
inline std::optional<Mat2> closed_form_flow(const Mat2& a, double t)
{
    if (a == Mat2::zero())
        return Mat2::identity();
    if (a.a11 == 0.0 && a.a12 == 1.0 && a.a22 == 0.0) {
        if (a.a21 < 0.0)
            return rotation_flow(std::sqrt(-a.a21), t);
        if (a.a21 == 1.0)
            return stretch_flow(t);
    }
    return std::nullopt;
}

/// Transition matrix and trace integral of the generator over one orbit piece.
struct PieceTransition
{
    Mat2 matrix;
    double trace_integral;
};

namespace detail {

inline double piece_trace_integral(const GeneratorField& gen, const OrbitPiece& piece)
{
    const double len = piece.length();
    if (piece.box >= 0 && static_cast<std::size_t>(piece.box) < gen.overrides().size()) {
        const Override& o = gen.overrides()[static_cast<std::size_t>(piece.box)];
        if (const auto* m = std::get_if<Mat2>(&o.value))
            return trace(*m) * len;
        return 0.0;  // tuned rotations are traceless
    }
    if (const auto* m = std::get_if<Mat2>(&gen.base()))
        return trace(*m) * len;
    const FieldExpr& alpha = std::get<KineticBase>(gen.base()).alpha;
    if (alpha.is_zero())
        return 0.0;
    const double panels = std::max(1.0, std::ceil(len));
    return -gauss_legendre([&](double s) { return alpha(piece.base, s); }, piece.h0, piece.h1,
                           static_cast<std::size_t>(panels));
}

/// Classical RK4 for X' = A(w, s) X over the piece heights, A kinetic with height dependence.
inline Mat2 rk4_kinetic_varying(const KineticBase& k, const OrbitPiece& piece, double step)
{
    const std::uint64_t n = step_count(piece.length(), step);
    const double h = piece.length() / static_cast<double>(n);
    const double alpha_b = k.alpha.base_part(piece.base);
    const double beta_b = k.beta.base_part(piece.base);
    auto a_at = [&](double s) {
        return kinetic_matrix(alpha_b + k.alpha.height_part(s), beta_b + k.beta.height_part(s));
    };
    Mat2 x = Mat2::identity();
    for (std::uint64_t i = 0; i < n; ++i) {
        const double s = piece.h0 + h * static_cast<double>(i);
        const Mat2 a0 = a_at(s);
        const Mat2 am = a_at(s + 0.5 * h);
        const Mat2 a1 = a_at(s + h);
        const Mat2 k1 = a0 * x;
        const Mat2 k2 = am * (x + 0.5 * h * k1);
        const Mat2 k3 = am * (x + 0.5 * h * k2);
        const Mat2 k4 = a1 * (x + h * k3);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return x;
}

} // namespace detail

/**
 * Fundamental solution over one orbit piece. Constant overrides of R_theta / S /
 * zero form and tuned rotations use the closed forms; everything else is RK4.
 * piece.box indexes gen.overrides(); indices past the end are treated as base.
 */
inline PieceTransition piece_transition(const GeneratorField& gen, const OrbitPiece& piece, double step)
{
    const double len = piece.length();
    const double tr = detail::piece_trace_integral(gen, piece);
    if (!(len > 0.0))
        return {Mat2::identity(), 0.0};

    if (piece.box >= 0 && static_cast<std::size_t>(piece.box) < gen.overrides().size()) {
        const Override& o = gen.overrides()[static_cast<std::size_t>(piece.box)];
        if (const auto* m = std::get_if<Mat2>(&o.value)) {
            if (auto exact = closed_form_flow(*m, len))
                return {*exact, tr};
            return {rk4_constant(*m, len, step), tr};
        }
        const double theta = std::get<std::shared_ptr<const TunedRotationRule>>(o.value)->theta_at(piece.base);
        return {rotation_flow(theta, len), tr};
    }

    if (const auto* m = std::get_if<Mat2>(&gen.base()))
        return {rk4_constant(*m, len, step), tr};
    const KineticBase& k = std::get<KineticBase>(gen.base());
    if (k.alpha.height_free() && k.beta.height_free()) {
        const Mat2 a = kinetic_matrix(k.alpha.base_part(piece.base), k.beta.base_part(piece.base));
        return {rk4_constant(a, len, step), tr};
    }
    return {detail::rk4_kinetic_varying(k, piece, step), tr};
}

inline void check_step(double step)
{
    if (!(step > 0.0) || !std::isfinite(step))
        throw DomainError("integration step must be positive");
}

/// Phi(t, p) = matrix * exp(renorm_log); log_det accumulates int_0^t tr A.
struct PropagationResult
{
    Mat2 matrix = Mat2::identity();
    double log_det = 0.0;
    double renorm_log = 0.0;

    /// log|det Phi| recovered from the stored matrix and the renormalizations.
    double matrix_log_det() const { return std::log(std::abs(det(matrix))) + 2.0 * renorm_log; }
};

/// Fundamental matrix Phi_A(t, p) of the cocycle, split exactly at roof and box crossings.
inline PropagationResult propagate(const SuspensionFlow& flow, const GeneratorField& gen, const SuspensionPoint& p,
                                   double t, double step = 1e-3)
{
    if (!(t >= 0.0))
        throw DomainError("propagate: time must be non-negative");
    check_step(step);
    PropagationResult out;
    CompensatedSum log_det;
    const auto boxes = gen.boxes();
    walk_orbit(flow, p, t, boxes, [&](const OrbitPiece& piece) {
        const PieceTransition tr = piece_transition(gen, piece, step);
        out.matrix = tr.matrix * out.matrix;
        log_det += tr.trace_integral;
        if (!is_finite(out.matrix))
            throw NumericalError("propagate: non-finite state", piece.t0);
        const double n = norm(out.matrix);
        if (n > renorm_upper || n < renorm_lower) {
            out.matrix *= 1.0 / n;
            out.renorm_log += std::log(n);
        }
    });
    out.log_det = log_det.value();
    return out;
}

/// ||Phi(t+s, p) - Phi(t, phi^s p) Phi(s, p)|| / ||Phi(t+s, p)||.
inline double check_cocycle_property(const SuspensionFlow& flow, const GeneratorField& gen, const SuspensionPoint& p,
                                     double s, double t, double step = 1e-3)
{
    if (!(s >= 0.0 && t >= 0.0))
        throw DomainError("check_cocycle_property: s and t must be non-negative");
    const PropagationResult whole = propagate(flow, gen, p, s + t, step);
    const PropagationResult first = propagate(flow, gen, p, s, step);
    const PropagationResult second = propagate(flow, gen, flow.flow(p, s), t, step);
    const double scale = std::exp(first.renorm_log + second.renorm_log - whole.renorm_log);
    const Mat2 composed = (second.matrix * first.matrix) * scale;
    return norm(whole.matrix - composed) / norm(whole.matrix);
}

/// int_0^t tr A(phi^s p) ds by Gauss-Legendre quadrature on each orbit piece.
inline double liouville_logdet(const SuspensionFlow& flow, const GeneratorField& gen, const SuspensionPoint& p,
                               double t)
{
    if (!(t >= 0.0))
        throw DomainError("liouville_logdet: time must be non-negative");
    CompensatedSum total;
    const auto boxes = gen.boxes();
    walk_orbit(flow, p, t, boxes,
               [&](const OrbitPiece& piece) { total += detail::piece_trace_integral(gen, piece); });
    return total.value();
}

/// (1/T) int_0^T tr A: the sum lambda_1 + lambda_2 along the orbit of p.
inline double spectrum_sum_via_trace(const SuspensionFlow& flow, const GeneratorField& gen, const SuspensionPoint& p,
                                     double horizon)
{
    if (!(horizon > 0.0))
        throw DomainError("spectrum_sum_via_trace: horizon must be positive");
    return liouville_logdet(flow, gen, p, horizon) / horizon;
}

/// Finite-time growth rate (1/T) log ||Phi(T, p) v0||, renormalizing the vector as it goes.
inline double top_lyapunov(const SuspensionFlow& flow, const GeneratorField& gen, const SuspensionPoint& p,
                           const Vec2& v0, double horizon, double step = 1e-3)
{
    if (!(norm(v0) > 0.0))
        throw DomainError("top_lyapunov: initial vector must be nonzero");
    if (!(horizon > 0.0))
        throw DomainError("top_lyapunov: horizon must be positive");
    check_step(step);
    Vec2 w = v0;
    CompensatedSum growth;
    growth += -std::log(norm(v0));
    const auto boxes = gen.boxes();
    walk_orbit(flow, p, horizon, boxes, [&](const OrbitPiece& piece) {
        w = piece_transition(gen, piece, step).matrix * w;
        if (!is_finite(w))
            throw NumericalError("top_lyapunov: non-finite state", piece.t0);
        const double n = norm(w);
        if (n > renorm_upper || n < renorm_lower) {
            w /= n;
            growth += std::log(n);
        }
    });
    growth += std::log(norm(w));
    return growth.value() / horizon;
}

struct FiniteTimeRow
{
    double t;
    double lambda1_ft;
    double lambda2_ft;
    double logdet_avg;
};

struct LyapunovReport
{
    double lambda1 = 0.0;
    double lambda2 = 0.0;          ///< sum_via_trace - lambda1
    double sum_via_trace = 0.0;
    double lambda1_frame = 0.0;    ///< two-frame (QR) cross-check
    double lambda2_frame = 0.0;
    double horizon = 0.0;
    std::size_t samples = 0;
    double std_error = 0.0;        ///< standard error of lambda1 across samples
    double sum_std_error = 0.0;
    double frame_sum_residual = 0.0;  ///< |lambda1_frame + lambda2_frame - sum_via_trace|
    std::size_t periodic_resamples = 0;
    std::vector<double> per_sample_lambda1;
    std::vector<FiniteTimeRow> finite_time;  ///< sample 0 only

    double gap() const { return lambda1 - lambda2; }
};

struct SpectrumOptions
{
    double horizon = 1e5;
    std::size_t samples = 4;
    double step = 1e-3;
    std::uint64_t seed = 1;
    std::size_t checkpoints = 0;
};

namespace detail {

struct FrameRun
{
    double log_r11 = 0.0;
    double log_r22 = 0.0;
    double trace_integral = 0.0;
    std::vector<FiniteTimeRow> rows;
};

/// Propagate an orthonormal frame (v0, v0^perp) with a QR step after every piece.
inline FrameRun run_frame(const SuspensionFlow& flow, const GeneratorField& gen, const SuspensionPoint& p,
                          const Vec2& v0, double horizon, double step, std::size_t checkpoints)
{
    Vec2 q1 = normalized(v0);
    Vec2 q2{-q1.y, q1.x};
    CompensatedSum r11, r22, tr;
    FrameRun run;
    std::size_t next_checkpoint = 1;
    const auto boxes = gen.boxes();
    walk_orbit(flow, p, horizon, boxes, [&](const OrbitPiece& piece) {
        const PieceTransition t = piece_transition(gen, piece, step);
        Vec2 c1 = t.matrix * q1;
        Vec2 c2 = t.matrix * q2;
        tr += t.trace_integral;
        const double n1 = norm(c1);
        if (!std::isfinite(n1) || !is_finite(c2) || !(n1 > 0.0))
            throw NumericalError("lyapunov_spectrum: non-finite state", piece.t0);
        q1 = c1 / n1;
        c2 -= dot(q1, c2) * q1;
        const double n2 = norm(c2);
        q2 = c2 / n2;
        r11 += std::log(n1);
        r22 += std::log(n2);
        const double t_end = piece.t0 + piece.length();
        while (checkpoints > 0 && next_checkpoint <= checkpoints &&
               t_end >= horizon * static_cast<double>(next_checkpoint) / static_cast<double>(checkpoints) - 1e-9) {
            const double l1 = r11.value() / t_end;
            const double ld = tr.value() / t_end;
            run.rows.push_back(FiniteTimeRow{t_end, l1, ld - l1, ld});
            ++next_checkpoint;
        }
    });
    run.log_r11 = r11.value();
    run.log_r22 = r22.value();
    run.trace_integral = tr.value();
    return run;
}

inline double mean_of(const std::vector<double>& xs)
{
    CompensatedSum s;
    for (double x : xs)
        s += x;
    return s.value() / static_cast<double>(xs.size());
}

inline double std_error_of(const std::vector<double>& xs)
{
    if (xs.size() < 2)
        return 0.0;
    const double m = mean_of(xs);
    double ss = 0.0;
    for (double x : xs)
        ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

} // namespace detail

/// mu-random orbit starts, resampling points whose base orbit is periodic within the horizon.
inline std::vector<SuspensionPoint> sample_orbit_starts(const SuspensionFlow& flow, std::size_t n, double horizon,
                                                        std::uint64_t seed, std::size_t* resamples = nullptr)
{
    Rng rng(seed, 0);
    const auto max_steps = static_cast<std::size_t>(std::ceil(horizon / flow.min_height())) + 1;
    std::vector<SuspensionPoint> out;
    std::size_t rejected = 0;
    while (out.size() < n) {
        const SuspensionPoint p = sample_mu_point(flow, rng);
        if (is_periodic_within(flow.base(), p.base, max_steps)) {
            ++rejected;
            continue;
        }
        out.push_back(p);
    }
    if (resamples)
        *resamples = rejected;
    return out;
}

/**
 * Finite-horizon Lyapunov spectrum averaged over mu-random orbits.
 * lambda1 is the growth of a random vector; lambda2 follows from the trace sum
 * rule. The two-frame QR estimates are reported alongside as a cross-check.
 * Samples run in parallel and are reduced in index order.
 */
inline LyapunovReport lyapunov_spectrum(const SuspensionFlow& flow, const GeneratorField& gen,
                                        const SpectrumOptions& opt)
{
    if (!(opt.horizon > 0.0))
        throw DomainError("lyapunov_spectrum: horizon must be positive");
    if (opt.samples < 1)
        throw DomainError("lyapunov_spectrum: need at least one sample");
    check_step(opt.step);

    LyapunovReport report;
    report.horizon = opt.horizon;
    report.samples = opt.samples;
    const auto starts = sample_orbit_starts(flow, opt.samples, opt.horizon, opt.seed, &report.periodic_resamples);

    std::vector<detail::FrameRun> runs(opt.samples);
    parallel_for(opt.samples, [&](std::size_t i) {
        Rng rng(opt.seed, 1 + i);
        const double angle = two_pi * rng.uniform();
        const Vec2 v0{std::cos(angle), std::sin(angle)};
        runs[i] = detail::run_frame(flow, gen, starts[i], v0, opt.horizon, opt.step, i == 0 ? opt.checkpoints : 0);
    });

    std::vector<double> l1, l2, sums;
    for (const auto& run : runs) {
        l1.push_back(run.log_r11 / opt.horizon);
        l2.push_back(run.log_r22 / opt.horizon);
        sums.push_back(run.trace_integral / opt.horizon);
    }
    report.lambda1 = detail::mean_of(l1);
    report.lambda1_frame = report.lambda1;
    report.lambda2_frame = detail::mean_of(l2);
    report.sum_via_trace = detail::mean_of(sums);
    report.lambda2 = report.sum_via_trace - report.lambda1;
    report.std_error = detail::std_error_of(l1);
    report.sum_std_error = detail::std_error_of(sums);
    report.frame_sum_residual = std::abs(report.lambda1_frame + report.lambda2_frame - report.sum_via_trace);
    report.per_sample_lambda1 = l1;
    report.finite_time = std::move(runs[0].rows);
    return report;
}

/// Mean and max over mu-samples of sup_{0<=t<=1} log+ ||Phi(t, p)^{+-1}||.
struct IntegrabilityProxy
{
    double mean = 0.0;
    double max = 0.0;
};

inline IntegrabilityProxy integrability_proxy(const SuspensionFlow& flow, const GeneratorField& gen, std::size_t n,
                                              std::uint64_t seed, double step = 1e-3, std::size_t grid = 16)
{
    const auto points = sample_mu(flow, n, seed);
    IntegrabilityProxy out;
    CompensatedSum total;
    const double dt = 1.0 / static_cast<double>(grid);
    for (const auto& p : points) {
        Mat2 phi = Mat2::identity();
        SuspensionPoint q = p;
        double sup = 0.0;
        for (std::size_t k = 0; k < grid; ++k) {
            phi = propagate(flow, gen, q, dt, step).matrix * phi;
            q = flow.flow(q, dt);
            const double forward = norm(phi);
            const double inverse = forward / std::abs(det(phi));  // ||M^-1|| = ||M|| / |det M| for 2x2
            sup = std::max({sup, std::log(std::max(1.0, forward)), std::log(std::max(1.0, inverse))});
        }
        total += sup;
        out.max = std::max(out.max, sup);
    }
    out.mean = total.value() / static_cast<double>(n);
    return out;
}

} // namespace kinetic

#endif // KINETIC_COCYCLE_HPP
