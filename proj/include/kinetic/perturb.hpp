#ifndef KINETIC_PERTURB_HPP
#define KINETIC_PERTURB_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "kinetic/baseflow.hpp"
#include "kinetic/cocycle.hpp"
#include "kinetic/error.hpp"
#include "kinetic/generator.hpp"
#include "kinetic/lpmetric.hpp"
#include "kinetic/mat2.hpp"
#include "kinetic/quadrature.hpp"
#include "kinetic/random.hpp"

namespace kinetic {

inline constexpr double four_pi_sq = two_pi * two_pi;

/// B_r at the origin, the rotation box V_R = phi^[0,1)(B_r) and the stretch box V_S = phi^[1,2)(B_r).
struct PerturbationPlan
{
    double r = 0.0;
    double p = 1.0;
    double eps = std::numeric_limits<double>::infinity();
    BaseRegion region;
    FlowboxSpec rotate_box;
    FlowboxSpec stretch_box;
    Vec2 v{std::numbers::sqrt2 / 2.0, std::numbers::sqrt2 / 2.0};

    static PerturbationPlan make(const SuspensionFlow& flow, double r, double p, double eps)
    {
        if (!(r > 0.0 && r < 1.0))
            throw ConfigError("plan: r must lie in (0, 1)");
        if (!(p >= 1.0) || !std::isfinite(p))
            throw ConfigError("plan: p must be >= 1");
        if (!(eps > 0.0))
            throw ConfigError("plan: eps must be positive");
        PerturbationPlan plan;
        plan.r = r;
        plan.p = p;
        plan.eps = eps;
        plan.region = origin_region(flow.base(), r);
        plan.rotate_box = FlowboxSpec{plan.region, 0.0, 1.0};
        plan.stretch_box = FlowboxSpec{plan.region, 1.0, 2.0};
        flow.validate(plan.rotate_box);
        flow.validate(plan.stretch_box);
        return plan;
    }

    double measure_rotate(const SuspensionFlow& flow) const { return measure_of_flowbox(flow, rotate_box); }
    double measure_stretch(const SuspensionFlow& flow) const { return measure_of_flowbox(flow, stretch_box); }
    bool budget_enforced() const { return std::isfinite(eps); }
};

/// Uniform bounds on ||A - A0||, ||A0 - B0||, ||B0 - B|| over the boxes.
struct StageBounds
{
    double c1;
    double c2;
    double c3;
};

inline StageBounds stage_bounds(const GeneratorField& a)
{
    return {four_pi_sq + a.base_sup_norm(), four_pi_sq, four_pi_sq + 1.0};
}

/**
 * Largest admissible r, halved for margin: stage one perturbs mass 2r/m, stage two r/m,
 * stage three r/m, and each must stay below the support budget for eps/3. Capped at 0.5.
 */
inline double budget_r(const SuspensionFlow& flow, const GeneratorField& a, double p, double eps)
{
    if (!std::isfinite(eps))
        return 0.5;
    const StageBounds c = stage_bounds(a);
    const double m = flow.mass();
    const double third = eps / 3.0;
    const double r1 = support_budget(p, third, c.c1) * m / 2.0;
    const double r2 = support_budget(p, third, c.c2) * m;
    const double r3 = support_budget(p, third, c.c3) * m;
    return std::min(0.5, 0.5 * std::min({r1, r2, r3}));
}

/// (int_{boxes} ||A - M||^p dmu)^(1/p) for a constant M.
inline double box_distance_to(const SuspensionFlow& flow, const GeneratorField& a, const Mat2& m,
                              const std::vector<FlowboxSpec>& boxes, double p)
{
    double total = 0.0;
    for (const auto& box : boxes)
        total += flowbox_integral(flow, box, [&](const SuspensionPoint& q) { return std::pow(norm(a.evaluate(q) - m), p); });
    return std::pow(total, 1.0 / p);
}

/// A0: A with R_{2pi} on both boxes.
inline GeneratorField build_A0(const SuspensionFlow& flow, const GeneratorField& a, const PerturbationPlan& plan)
{
    if (a.classify() == GeneratorClass::general)
        throw ConfigError("build_A0: input generator must be kinetic");
    const Mat2 r2pi = rotation_generator(two_pi);
    if (plan.budget_enforced()) {
        const double d = box_distance_to(flow, a, r2pi, {plan.rotate_box, plan.stretch_box}, plan.p);
        if (!(d < plan.eps / 3.0))
            throw BudgetError("build_A0: sigma_hat(A, A0) = " + std::to_string(d) + " exceeds eps/3",
                              budget_r(flow, a, plan.p, plan.eps));
    }
    return a.with_override(plan.rotate_box, r2pi).with_override(plan.stretch_box, r2pi);
}

/**
 * g(P): the normalized image of v under Phi_field from the last visit of phi^1(B_r).
 * `field` must agree with B0 off the interior of V_R (A0 does). Looks back through
 * the base map; LookbackError past `max_lookback` time units.
 */
inline Vec2 g_field(const SuspensionFlow& flow, const GeneratorField& field, const PerturbationPlan& plan,
                    const SuspensionPoint& p, double step = 1e-3, double max_lookback = 1e7)
{
    const SuspensionPoint q = flow.normalize(p);
    SuspensionPoint start{q.base, 1.0};
    double k = 0.0;
    if (plan.region.contains(q.base) && q.height >= 1.0) {
        k = q.height - 1.0;
    } else {
        CompensatedSum elapsed;
        elapsed += q.height;
        BasePoint w = q.base;
        while (true) {
            w = flow.base().inverse(w);
            elapsed += flow.roof_at(w);
            if (plan.region.contains(w))
                break;
            if (elapsed.value() > max_lookback)
                throw LookbackError("g_field: no visit of phi^1(B_r) within " + std::to_string(max_lookback));
        }
        start.base = w;
        k = elapsed.value() - 1.0;
    }
    if (k <= 0.0)
        return plan.v;
    const PropagationResult res = propagate(flow, field, start, k, step);
    return normalized(res.matrix * plan.v);
}

/// theta*(w0) = solve_alignment_theta(g(w0, 0), v), memoized per entry point.
class AlignmentRotationRule : public TunedRotationRule
{
public:
    AlignmentRotationRule(SuspensionFlow flow, GeneratorField a0, PerturbationPlan plan, double step)
        : flow_(std::move(flow)), a0_(std::move(a0)), plan_(std::move(plan)), step_(step)
    {
    }

    double theta_at(const BasePoint& entry) const override
    {
        {
            std::lock_guard lock(mutex_);
            if (auto it = cache_.find(entry); it != cache_.end())
                return it->second;
        }
        const Vec2 g = g_field(flow_, a0_, plan_, SuspensionPoint{entry, 0.0}, step_);
        const double theta = solve_alignment_theta(g, plan_.v);
        std::lock_guard lock(mutex_);
        cache_.emplace(entry, theta);
        return theta;
    }

    std::size_t cache_size() const
    {
        std::lock_guard lock(mutex_);
        return cache_.size();
    }

private:
    SuspensionFlow flow_;
    GeneratorField a0_;
    PerturbationPlan plan_;
    double step_;
    mutable std::mutex mutex_;
    mutable std::map<BasePoint, double> cache_;
};

/// B0: A0 with the tuned rotation on V_R.
inline GeneratorField build_B0(const SuspensionFlow& flow, const GeneratorField& a0, const PerturbationPlan& plan,
                               double step = 1e-3)
{
    auto rule = std::make_shared<const AlignmentRotationRule>(flow, a0, plan, step);
    return a0.with_override(plan.rotate_box, std::shared_ptr<const TunedRotationRule>(rule));
}

/// B: B0 with the stretch S on V_S.
inline GeneratorField build_B(const GeneratorField& b0, const PerturbationPlan& plan)
{
    return b0.with_override(plan.stretch_box, stretch_generator());
}

/// Visit bookkeeping of the V_S passages: entry s_n, exit l_n = s_n + 1, gap Delta_n = s_n - l_{n-1}.
struct ReturnLedger
{
    std::vector<double> s;
    std::vector<double> l;
    std::vector<double> delta;

    std::size_t visits() const { return s.size(); }
    /// J(t): completed entries up to time t.
    std::size_t count_at(double t) const
    {
        return static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), t) - s.begin());
    }
};

struct ScalarCocycleTrace
{
    double log_b = 0.0;                 ///< log |b(T, P0)|
    double horizon = 0.0;
    std::vector<double> increments;     ///< log growth across each full V_S passage
    ReturnLedger ledger;
    Vec2 final_direction{};
    SuspensionPoint final_point{};

    double rate() const { return log_b / horizon; }
};

/**
 * log|b| along phi^t(P0), where b(t) g(phi^t P0) = Phi_gen(t, P0) g(P0) and g(P0) = v
 * at P0 in phi^1(B_r). `initial` overrides the starting direction (continuation runs).
 */
inline ScalarCocycleTrace scalar_cocycle_track(const SuspensionFlow& flow, const GeneratorField& gen,
                                               const PerturbationPlan& plan, const SuspensionPoint& p0, double horizon,
                                               double step = 1e-3, std::optional<Vec2> initial = std::nullopt)
{
    if (!(horizon > 0.0))
        throw DomainError("scalar_cocycle_track: horizon must be positive");
    check_step(step);
    const SuspensionPoint start = flow.normalize(p0);
    if (!initial && !(start.height == 1.0 && plan.region.contains(start.base)))
        throw DomainError("scalar_cocycle_track: start must lie on phi^1(B_r) unless a direction is given");

    std::vector<FlowboxSpec> boxes = gen.boxes();
    int stretch_index = -1;
    for (const FlowboxSpec& extra : {plan.rotate_box, plan.stretch_box}) {
        auto it = std::find(boxes.begin(), boxes.end(), extra);
        if (it == boxes.end()) {
            for (const auto& b : boxes)
                if (b.overlaps(extra))
                    throw ConfigError("scalar_cocycle_track: generator boxes overlap the plan boxes");
            boxes.push_back(extra);
            it = boxes.end() - 1;
        }
        if (extra == plan.stretch_box)
            stretch_index = static_cast<int>(it - boxes.begin());
    }

    ScalarCocycleTrace out;
    out.horizon = horizon;
    Vec2 w = initial ? normalized(*initial) : plan.v;
    CompensatedSum log_b;
    walk_orbit(flow, start, horizon, boxes, [&](const OrbitPiece& piece) {
        const Mat2 m = piece_transition(gen, piece, step).matrix;
        w = m * w;
        const double n = norm(w);
        if (!std::isfinite(n) || !(n > 0.0))
            throw NumericalError("scalar_cocycle_track: non-finite state", piece.t0);
        w /= n;
        const double inc = std::log(n);
        log_b += inc;
        if (piece.box == stretch_index && piece.h0 == plan.stretch_box.a && piece.h1 == plan.stretch_box.b) {
            auto& led = out.ledger;
            const double entry = piece.t0;
            led.delta.push_back(led.l.empty() ? entry : entry - led.l.back());
            led.s.push_back(entry);
            led.l.push_back(entry + 1.0);
            out.increments.push_back(inc);
        }
    });
    out.log_b = log_b.value();
    out.final_direction = w;
    out.final_point = flow.flow(start, horizon);
    return out;
}

/// A point of phi^1(B_r) drawn uniformly over B_r.
inline SuspensionPoint sample_face_point(const PerturbationPlan& plan, Rng& rng)
{
    BasePoint w{rng.uniform(plan.region.lo[0], plan.region.hi[0]), 0.0};
    if (plan.region.dimension == 2)
        w[1] = rng.uniform(plan.region.lo[1], plan.region.hi[1]);
    return SuspensionPoint{w, 1.0};
}

/// log|det Phi(T, P)| from propagated matrices, in chunks short enough that det stays representable.
inline double propagated_log_det(const SuspensionFlow& flow, const GeneratorField& gen, const SuspensionPoint& p,
                                 double horizon, double step = 1e-3, double chunk = 10.0)
{
    CompensatedSum total;
    SuspensionPoint q = flow.normalize(p);
    double done = 0.0;
    while (done < horizon) {
        const double len = std::min(chunk, horizon - done);
        total += propagate(flow, gen, q, len, step).matrix_log_det();
        q = flow.flow(q, len);
        done += len;
    }
    return total.value();
}

struct SplittingVerdict
{
    double lambda_B_g = 0.0;
    double lambda_B0_g = 0.0;
    double difference = 0.0;
    double mu_stretch = 0.0;
    double difference_residual = 0.0;   ///< |difference - mu(V_S)|
    double trace_residual = 0.0;        ///< |log det Phi_B - log det Phi_B0| / T
    double trace_avg = 0.0;             ///< (1/T) int tr B
    double mean_increment = 0.0;
    double max_increment_error = 0.0;   ///< max |increment - 1|
    std::size_t visits = 0;
    double visit_rate = 0.0;            ///< J_T / T
    bool difference_ok = false;
    bool trace_ok = false;
    bool margin_ok = false;

    bool pass() const { return difference_ok && trace_ok && margin_ok; }
};

/// lambda(B, g) - lambda(B0, g) = mu(V_S) along one orbit from phi^1(B_r).
inline SplittingVerdict verify_splitting(const SuspensionFlow& flow, const GeneratorField& b, const GeneratorField& b0,
                                         const PerturbationPlan& plan, double horizon, std::uint64_t seed,
                                         double step = 1e-3, double tolerance = 1e-2)
{
    Rng rng(seed, 0x5b11);
    SuspensionPoint p0 = sample_face_point(plan, rng);
    for (int tries = 0; is_periodic_within(flow.base(), p0.base,
                                           static_cast<std::size_t>(std::ceil(horizon / flow.min_height())) + 1);
         ++tries) {
        if (tries > 100)
            throw NumericalError("verify_splitting: only periodic starts found");
        p0 = sample_face_point(plan, rng);
    }
    const ScalarCocycleTrace tb = scalar_cocycle_track(flow, b, plan, p0, horizon, step);
    const ScalarCocycleTrace tb0 = scalar_cocycle_track(flow, b0, plan, p0, horizon, step);

    SplittingVerdict v;
    v.lambda_B_g = tb.rate();
    v.lambda_B0_g = tb0.rate();
    v.difference = v.lambda_B_g - v.lambda_B0_g;
    v.mu_stretch = plan.measure_stretch(flow);
    v.difference_residual = std::abs(v.difference - v.mu_stretch);
    v.visits = tb.ledger.visits();
    v.visit_rate = static_cast<double>(v.visits) / horizon;
    CompensatedSum incs;
    for (double x : tb.increments) {
        incs += x;
        v.max_increment_error = std::max(v.max_increment_error, std::abs(x - 1.0));
    }
    v.mean_increment = tb.increments.empty() ? 0.0 : incs.value() / static_cast<double>(tb.increments.size());

    const double ld_b = propagated_log_det(flow, b, p0, horizon, step);
    const double ld_b0 = propagated_log_det(flow, b0, p0, horizon, step);
    v.trace_residual = std::abs(ld_b - ld_b0) / horizon;
    v.trace_avg = liouville_logdet(flow, b, p0, horizon) / horizon;

    v.difference_ok = v.difference_residual <= tolerance;
    v.trace_ok = v.trace_residual <= 1e-7;
    v.margin_ok = v.difference >= 0.5 * v.mu_stretch;
    return v;
}

/// Largest relative determinant mismatch of det Phi_B = det Phi_B0 = det Phi_A0 over random (P, t <= t_max).
struct DetChainResidual
{
    double b_vs_b0 = 0.0;
    double b0_vs_a0 = 0.0;
};

inline DetChainResidual det_chain_residual(const SuspensionFlow& flow, const GeneratorField& a0,
                                           const GeneratorField& b0, const GeneratorField& b, std::size_t n,
                                           std::uint64_t seed, double t_max = 10.0, double step = 1e-3)
{
    const auto points = sample_mu(flow, n, seed);
    Rng rng(seed, 0xde7);
    DetChainResidual out;
    for (const auto& p : points) {
        const double t = rng.uniform() * t_max;
        const double la = propagate(flow, a0, p, t, step).matrix_log_det();
        const double lb0 = propagate(flow, b0, p, t, step).matrix_log_det();
        const double lb = propagate(flow, b, p, t, step).matrix_log_det();
        out.b_vs_b0 = std::max(out.b_vs_b0, std::abs(std::expm1(lb - lb0)));
        out.b0_vs_a0 = std::max(out.b0_vs_a0, std::abs(std::expm1(lb0 - la)));
    }
    return out;
}

struct StageDistance
{
    double sigma_hat = 0.0;
    double sigma = 0.0;
    bool exact = false;
};

inline StageDistance make_stage_distance(double hat, bool exact)
{
    return {hat, sigma_from_hat(hat), exact};
}

/**
 * Upper bound on sigma_hat(A, B): on V_R the tuned theta^2 ranges over (0, 4pi^2] and
 * ||A - R_theta|| is convex in theta^2, so the larger endpoint value bounds it; on V_S
 * the integrand ||A - S|| is exact. For a Schrodinger field this is also the bound on
 * ||Q~ - Q||_{L^p}.
 */
inline double direct_distance_bound(const SuspensionFlow& flow, const GeneratorField& a, const PerturbationPlan& plan)
{
    const Mat2 r_low{0.0, 1.0, 0.0, 0.0};
    const Mat2 r_high = rotation_generator(two_pi);
    const double on_r = flowbox_integral(flow, plan.rotate_box, [&](const SuspensionPoint& q) {
        const Mat2 x = a.evaluate(q);
        return std::pow(std::max(norm(x - r_low), norm(x - r_high)), plan.p);
    });
    const double on_s = flowbox_integral(
        flow, plan.stretch_box, [&](const SuspensionPoint& q) { return std::pow(norm(a.evaluate(q) - stretch_generator()), plan.p); });
    return std::pow(on_r + on_s, 1.0 / plan.p);
}

struct PipelineOptions
{
    double p = 1.0;
    double eps = 0.1;
    double r = 0.0;  ///< 0 selects budget_r
    double horizon = 1e5;
    double step = 1e-3;
    std::size_t samples = 4;
    std::uint64_t seed = 1;
    bool pretest = true;
    std::size_t det_checks = 32;
};

struct PipelineReport
{
    double r = 0.0;
    double p = 1.0;
    double eps = 0.0;
    double mu_rotate = 0.0;
    double mu_stretch = 0.0;
    bool unchanged = false;  ///< input already simple, returned as is
    std::optional<LyapunovReport> input_spectrum;
    StageDistance a_a0;
    StageDistance a0_b0;
    StageDistance b0_b;
    StageDistance total;     ///< direct bound on sigma(A, B)
    bool budget_ok = false;
    DetChainResidual det_chain;
    SplittingVerdict splitting;
    LyapunovReport output_spectrum;
    double predicted_lambda1 = 0.0;
    double certified_gap = 0.0;  ///< 2 lambda(B, g) - (lambda1 + lambda2)
    bool simple = false;
};

struct PipelineResult
{
    GeneratorField output;
    PipelineReport report;
};

/// Bound C in |finite-time exponent - limit| <= C / T assumed for bounded conjugacies.
inline constexpr double finite_time_slack = 5.0;

/// Gap beyond three standard errors plus the finite-horizon slack.
inline bool spectrum_is_simple(const LyapunovReport& s)
{
    const double se_gap = 2.0 * s.std_error;
    return s.gap() > 3.0 * se_gap + finite_time_slack / s.horizon;
}

/**
 * A -> A0 -> B0 -> B. Stage failures are rethrown as PipelineError carrying the stage
 * id and the exit code (2 for budget or configuration, 3 for numerical failures).
 */
inline PipelineResult run_pipeline(const SuspensionFlow& flow, const GeneratorField& a, const PipelineOptions& opt)
{
    std::string stage = "input";
    try {
        if (a.classify() == GeneratorClass::general)
            throw ConfigError("generator must be kinetic");
        PipelineReport rep;
        rep.p = opt.p;
        rep.eps = opt.eps;
        const SpectrumOptions spec_opt{opt.horizon, opt.samples, opt.step, opt.seed, 0};

        if (opt.pretest) {
            stage = "pretest";
            rep.input_spectrum = lyapunov_spectrum(flow, a, spec_opt);
            if (spectrum_is_simple(*rep.input_spectrum)) {
                rep.unchanged = true;
                rep.simple = true;
                rep.budget_ok = true;
                rep.output_spectrum = *rep.input_spectrum;
                rep.predicted_lambda1 = rep.output_spectrum.lambda1;
                return {a, rep};
            }
        }

        stage = "plan";
        const double auto_r = budget_r(flow, a, opt.p, opt.eps);
        rep.r = opt.r > 0.0 ? opt.r : auto_r;
        const PerturbationPlan plan = PerturbationPlan::make(flow, rep.r, opt.p, opt.eps);
        rep.mu_rotate = plan.measure_rotate(flow);
        rep.mu_stretch = plan.measure_stretch(flow);
        const double third = opt.eps / 3.0;

        stage = "A0";
        const GeneratorField a0 = build_A0(flow, a, plan);
        rep.a_a0 = make_stage_distance(
            box_distance_to(flow, a, rotation_generator(two_pi), {plan.rotate_box, plan.stretch_box}, opt.p),
            a.constant_base().has_value());

        stage = "B0";
        const GeneratorField b0 = build_B0(flow, a0, plan, opt.step);
        rep.a0_b0 = make_stage_distance(four_pi_sq * std::pow(rep.mu_rotate, 1.0 / opt.p), false);
        if (plan.budget_enforced() && !(rep.a0_b0.sigma < third))
            throw BudgetError("sigma(A0, B0) exceeds eps/3", auto_r);

        stage = "B";
        const GeneratorField b = build_B(b0, plan);
        rep.b0_b = make_stage_distance((four_pi_sq + 1.0) * std::pow(rep.mu_stretch, 1.0 / opt.p), true);
        if (plan.budget_enforced() && !(rep.b0_b.sigma < third))
            throw BudgetError("sigma(B0, B) exceeds eps/3", auto_r);

        rep.total = make_stage_distance(direct_distance_bound(flow, a, plan), false);
        rep.budget_ok = !plan.budget_enforced() ||
                        (rep.a_a0.sigma < third && rep.a0_b0.sigma < third && rep.b0_b.sigma < third &&
                         rep.total.sigma < opt.eps);
        if (plan.budget_enforced() && !rep.budget_ok)
            throw BudgetError("sigma(A, B) exceeds eps", auto_r);

        stage = "verify";
        rep.det_chain = det_chain_residual(flow, a0, b0, b, opt.det_checks, opt.seed, 10.0, opt.step);
        rep.splitting = verify_splitting(flow, b, b0, plan, opt.horizon, opt.seed, opt.step);
        rep.output_spectrum = lyapunov_spectrum(flow, b, spec_opt);
        rep.predicted_lambda1 = rep.splitting.lambda_B0_g + rep.mu_stretch;
        rep.certified_gap = 2.0 * rep.splitting.lambda_B_g - rep.output_spectrum.sum_via_trace;
        rep.simple = rep.certified_gap >= rep.mu_stretch || spectrum_is_simple(rep.output_spectrum);
        return {b, rep};
    } catch (const PipelineError&) {
        throw;
    } catch (const BudgetError& e) {
        throw PipelineError(stage, e.what(), 2);
    } catch (const ConfigError& e) {
        throw PipelineError(stage, e.what(), 2);
    } catch (const DomainError& e) {
        throw PipelineError(stage, e.what(), 2);
    } catch (const Error& e) {
        throw PipelineError(stage, e.what(), 3);
    }
}

} // namespace kinetic

#endif // KINETIC_PERTURB_HPP
