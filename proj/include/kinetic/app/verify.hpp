#ifndef KINETIC_APP_VERIFY_HPP
#define KINETIC_APP_VERIFY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kinetic/app/config.hpp"
#include "kinetic/baseflow.hpp"
#include "kinetic/cocycle.hpp"
#include "kinetic/lpmetric.hpp"
#include "kinetic/mat2.hpp"
#include "kinetic/perturb.hpp"
#include "kinetic/random.hpp"

namespace kinetic::app {

/// One named invariant: passes when value <= tolerance * scale.
struct InvariantResult
{
    std::string id;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

namespace verify_detail {

inline SuspensionFlow golden_flow() { return {BaseSystem::circle_rotation(), RoofFunction::constant(3.0)}; }
inline SuspensionFlow cat_flow() { return {BaseSystem::torus_cat_map(), RoofFunction::cosine(3.0, 0.5)}; }

inline GeneratorField generic_field()
{
    return GeneratorField::kinetic(FieldExpr{{0.2, 0.1, 0.0, 0.05}, 3.0}, FieldExpr{{1.5, 0.4, 0.2, 0.1}, 3.0});
}

inline FieldExpr random_expr(Rng& rng)
{
    return FieldExpr{{rng.uniform(-2.0, 2.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 0.0}, 3.0};
}

inline double rotation_det(Rng& rng)
{
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
        const double th = two_pi * (1.0 - rng.uniform());
        const double t = rng.uniform(-4.0, 4.0);
        worst = std::max(worst, std::abs(det(rotation_flow(th, t)) - 1.0));
    }
    return worst;
}

inline double rotation_group(Rng& rng)
{
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
        const double th = rng.uniform(0.1, two_pi);
        const double s = rng.uniform(-2.0, 2.0), t = rng.uniform(-2.0, 2.0);
        worst = std::max(worst, max_abs_diff(rotation_flow(th, s + t), rotation_flow(th, t) * rotation_flow(th, s)));
    }
    return worst;
}

inline double rotation_derivative(Rng& rng)
{
    double worst = 0.0;
    const double h = 1e-6;
    for (int i = 0; i < 200; ++i) {
        const double th = rng.uniform(0.1, two_pi);
        const double t = rng.uniform(-4.0, 4.0);
        const Mat2 fd = (1.0 / (2.0 * h)) * (rotation_flow(th, t + h) - rotation_flow(th, t - h));
        worst = std::max(worst, max_abs_diff(fd, rotation_generator(th) * rotation_flow(th, t)));
    }
    return worst;
}

inline double stretch_inverse(Rng& rng)
{
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
        const double t = rng.uniform(-3.0, 3.0);
        worst = std::max(worst, max_abs_diff(stretch_flow(t) * stretch_flow(-t), Mat2::identity()));
    }
    return worst;
}

inline double alignment(Rng& rng)
{
    double worst = 0.0;
    for (int i = 0; i < 300; ++i) {
        const double a = two_pi * rng.uniform(), b = two_pi * rng.uniform();
        const Vec2 u{std::cos(a), std::sin(a)}, v{std::cos(b), std::sin(b)};
        worst = std::max(worst, parallel_defect(rotation_flow(solve_alignment_theta(u, v), 1.0) * u, v));
    }
    return worst;
}

inline double inverse_map(Rng& rng)
{
    double worst = 0.0;
    for (const auto& base : {BaseSystem::circle_rotation(), BaseSystem::torus_cat_map()})
        for (int i = 0; i < 1000; ++i) {
            const BasePoint w = base.sample(rng);
            worst = std::max(worst, base.distance(base.forward(base.inverse(w)), w));
        }
    return worst;
}

inline double flow_group(Rng& rng)
{
    double worst = 0.0;
    for (const auto& flow : {golden_flow(), cat_flow()})
        for (int i = 0; i < 5000; ++i) {
            const SuspensionPoint p = sample_mu_point(flow, rng);
            const double s = rng.uniform(-20.0, 20.0), t = rng.uniform(-20.0, 20.0);
            const SuspensionPoint a = flow.flow(flow.flow(p, s), t);
            const SuspensionPoint b = flow.flow(p, s + t);
            worst = std::max({worst, flow.base().distance(a.base, b.base), std::abs(a.height - b.height)});
        }
    return worst;
}

inline double box_average(std::uint64_t seed)
{
    double worst = 0.0;
    Rng rng(seed, 11);
    for (const auto& flow : {golden_flow(), cat_flow()}) {
        const FlowboxSpec box{origin_region(flow.base(), 0.2), 1.0, 2.0};
        const double avg = time_average_in_box(flow, sample_mu_point(flow, rng), 1e5, box);
        worst = std::max(worst, std::abs(avg - measure_of_flowbox(flow, box)));
    }
    return worst;
}

inline double itinerary_durations(Rng& rng)
{
    const SuspensionFlow flow = golden_flow();
    const std::vector<FlowboxSpec> boxes{{origin_region(flow.base(), 0.2), 0.0, 1.0},
                                         {origin_region(flow.base(), 0.2), 1.0, 2.0}};
    double worst = 0.0;
    for (int i = 0; i < 20; ++i)
        for (const auto& e : itinerary(flow, sample_mu_point(flow, rng), 1000.0, boxes))
            if (!e.clipped)
                worst = std::max(worst, std::abs(e.duration() - 1.0));
    return worst;
}

inline double closed_form()
{
    const SuspensionFlow flow = golden_flow();
    const SuspensionPoint p{{0.3, 0.0}, 0.5};
    double worst = 0.0;
    for (int k = 0; k <= 10; ++k) {
        const double t = 0.5 * k;
        worst = std::max(worst, max_abs_diff(propagate(flow, GeneratorField(stretch_generator()), p, t).matrix,
                                             stretch_flow(t)));
        for (double th : {0.5, 1.0, 2.0, std::numbers::pi})
            worst = std::max(worst, max_abs_diff(propagate(flow, GeneratorField(rotation_generator(th)), p, t).matrix,
                                                 rotation_flow(th, t)));
        const FlowboxSpec all{whole_base(flow.base()), 0.0, 2.9};
        const GeneratorField ov = GeneratorField(Mat2::zero()).with_override(all, rotation_generator(two_pi));
        worst = std::max(worst, max_abs_diff(propagate(flow, ov, SuspensionPoint{{0.3, 0.0}, 0.0}, std::min(t, 2.9)).matrix,
                                             rotation_flow(two_pi, std::min(t, 2.9))));
    }
    return worst;
}

inline double cocycle_law(Rng& rng)
{
    const SuspensionFlow flow = golden_flow();
    const GeneratorField gen = generic_field();
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const SuspensionPoint p = sample_mu_point(flow, rng);
        worst = std::max(worst, check_cocycle_property(flow, gen, p, rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0)));
    }
    return worst;
}

inline double determinant_law(Rng& rng)
{
    const SuspensionFlow flow = golden_flow();
    const GeneratorField gen = generic_field();
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const SuspensionPoint p = sample_mu_point(flow, rng);
        const double t = rng.uniform(0.0, 20.0);
        const PropagationResult r = propagate(flow, gen, p, t);
        worst = std::max(worst, std::abs(r.matrix_log_det() - liouville_logdet(flow, gen, p, t)));
    }
    return worst;
}

inline double step_halving()
{
    const SuspensionFlow flow{BaseSystem::circle_rotation(), RoofFunction::constant(10.0)};
    const GeneratorField gen(rotation_generator(2.0));
    const SuspensionPoint p{{0.1, 0.0}, 0.0};
    const Mat2 exact = rotation_flow(2.0, 5.0);
    const double coarse = max_abs_diff(propagate(flow, gen, p, 5.0, 0.04).matrix, exact);
    const double fine = max_abs_diff(propagate(flow, gen, p, 5.0, 0.02).matrix, exact);
    return 8.0 * fine / coarse;  // <= 1 iff the error ratio is at least 8
}

} // namespace verify_detail

/**
 * Runs every invariant suite and returns one row per invariant. `scale` multiplies
 * all tolerances (scale 0 makes every inexact invariant fail).
 */
inline std::vector<InvariantResult> run_invariants(std::uint64_t seed, double scale = 1.0)
{
    using namespace verify_detail;
    std::vector<InvariantResult> out;
    auto add = [&](std::string id, double value, double tol) {
        out.push_back({std::move(id), value, tol, std::isfinite(value) && value <= tol * scale});
    };
    Rng rng(seed, 0x7e51);

    add("mat2.rotation_det", rotation_det(rng), 1e-12);
    add("mat2.rotation_group_law", rotation_group(rng), 1e-12);
    add("mat2.rotation_classical_derivative", rotation_derivative(rng), 1e-6);
    add("mat2.stretch_inverse", stretch_inverse(rng), 1e-12);
    add("mat2.alignment_parallel", alignment(rng), 1e-9);

    add("baseflow.inverse_map", inverse_map(rng), 1e-12);
    add("baseflow.group_law", flow_group(rng), 1e-10);
    add("baseflow.box_time_average", box_average(seed), 1e-2);
    add("baseflow.itinerary_durations", itinerary_durations(rng), 1e-10);

    add("cocycle.closed_form_agreement", closed_form(), 1e-9);
    add("cocycle.cocycle_law", cocycle_law(rng), 1e-6);
    add("cocycle.determinant_law", determinant_law(rng), 1e-6);
    add("cocycle.step_halving_order4", step_halving(), 1.0);
    {
        const SuspensionFlow flow = golden_flow();
        const LyapunovReport r = lyapunov_spectrum(flow, generic_field(), {2e4, 4, 1e-3, seed, 0});
        add("cocycle.sum_rule", r.frame_sum_residual, 1e-6 + 2.0 * r.sum_std_error);
        const LyapunovReport s = lyapunov_spectrum(flow, GeneratorField(stretch_generator()), {1e4, 2, 1e-3, seed, 0});
        add("cocycle.stretch_spectrum", std::max(std::abs(s.lambda1 - 1.0), std::abs(s.lambda2 + 1.0)), 1e-3);
        add("cocycle.integrability_proxy", integrability_proxy(flow, generic_field(), 1000, seed).mean, 100.0);
    }

    {
        const SuspensionFlow flow = golden_flow();
        const LpConfig lp{1.0, 4000, seed};
        double asym = 0.0, tri = 0.0, mono = 0.0;
        for (int i = 0; i < 20; ++i) {
            const GeneratorField a = GeneratorField::kinetic(random_expr(rng), random_expr(rng));
            const GeneratorField b = GeneratorField::kinetic(random_expr(rng), random_expr(rng));
            const GeneratorField c = GeneratorField::kinetic(random_expr(rng), random_expr(rng));
            const auto ab = sigma_p(flow, a, b, lp), ba = sigma_p(flow, b, a, lp);
            const auto bc = sigma_p(flow, b, c, lp), ac = sigma_p(flow, a, c, lp);
            asym = std::max(asym, std::abs(ab.value - ba.value));
            tri = std::max(tri, ac.value - ab.value - bc.value - 3.0 * (ac.std_error + ab.std_error + bc.std_error));
            const auto ab2 = sigma_p(flow, a, b, LpConfig{2.0, 4000, seed});
            mono = std::max(mono, ab.value - ab2.value - 2.0 * (ab.std_error + ab2.std_error));
        }
        add("lpmetric.symmetry", asym, 0.0);
        add("lpmetric.triangle", std::max(0.0, tri), 0.0);
        add("lpmetric.monotone_in_p", std::max(0.0, mono), 0.0);

        const GeneratorField base(FieldExpr::constant(0.0), FieldExpr::constant(1.0));
        auto boxed = [&](double r) {
            return base.with_override(FlowboxSpec{origin_region(flow.base(), r), 1.0, 2.0}, stretch_generator());
        };
        const double full = sigma_hat_p(flow, base, boxed(0.2), lp).value;
        const double half = sigma_hat_p(flow, base, boxed(0.1), lp).value;
        add("lpmetric.shrinking_support", half / full, 0.5 + 1e-12);
        const double c = norm(stretch_generator() - kinetic_matrix(0.0, 1.0));
        const double delta = support_budget(1.0, 0.1, c);
        const double r_box = 0.5 * delta * flow.mass();
        add("lpmetric.support_budget", sigma_hat_p(flow, base, boxed(r_box), lp).value / 0.1, 1.0 - 1e-12);
    }

    {
        const SuspensionFlow flow = golden_flow();
        const GeneratorField a(rotation_generator(two_pi));
        const PerturbationPlan plan = PerturbationPlan::make(flow, 0.2, 1.0, std::numeric_limits<double>::infinity());
        const GeneratorField a0 = build_A0(flow, a, plan);
        const GeneratorField b0 = build_B0(flow, a0, plan);
        const GeneratorField b = build_B(b0, plan);

        double table = 0.0;
        for (int i = 0; i < 500; ++i) {
            const SuspensionPoint q = sample_mu_point(flow, rng);
            const bool in_r = plan.rotate_box.contains(q), in_s = plan.stretch_box.contains(q);
            const Mat2 r2pi = rotation_generator(two_pi);
            table += !(a0.evaluate(q) == ((in_r || in_s) ? r2pi : a.evaluate(q)));
            table += !(b.evaluate(q) == (in_s ? stretch_generator() : b0.evaluate(q)));
            if (!in_r)
                table += !(b0.evaluate(q) == a0.evaluate(q));
            if (in_r)
                table += b0.evaluate(q).a11 != 0.0 || b0.evaluate(q).a22 != 0.0 || !(b0.evaluate(q).a21 < 0.0);
        }
        add("perturb.table1_conformance", table, 0.0);

        const DetChainResidual dc = det_chain_residual(flow, a0, b0, b, 100, seed);
        add("perturb.det_chain", std::max(dc.b_vs_b0, dc.b0_vs_a0), 1e-7);

        double align = 0.0, inv = 0.0;
        for (int i = 0; i < 200; ++i) {
            const BasePoint w0{rng.uniform(0.0, plan.r), 0.0};
            const Vec2 g = g_field(flow, a0, plan, SuspensionPoint{w0, 0.0});
            const Mat2 m = propagate(flow, b0, SuspensionPoint{w0, 0.0}, 1.0).matrix;
            align = std::max(align, parallel_defect(m * g, plan.v));
            const SuspensionPoint p{w0, 2.0};
            const double t = rng.uniform(0.0, 3.0);
            const SuspensionPoint q = flow.flow(p, t);
            if (plan.rotate_box.contains(q) && q.height > 0.0)
                continue;
            const Vec2 moved = propagate(flow, b0, p, t).matrix * g_field(flow, a0, plan, p);
            inv = std::max(inv, parallel_defect(moved, g_field(flow, a0, plan, q)));
        }
        add("perturb.alignment_on_VR", align, 1e-6);
        add("perturb.g_invariance", inv, 1e-6);

        const SuspensionPoint p0{{0.1, 0.0}, 1.0};
        const ScalarCocycleTrace tr = scalar_cocycle_track(flow, b, plan, p0, 2e4);
        double inc = 0.0;
        for (double x : tr.increments)
            inc = std::max(inc, std::abs(x - 1.0));
        add("perturb.stretch_increment", inc, 1e-6);
        add("perturb.visit_rate", std::abs(static_cast<double>(tr.ledger.visits()) / 2e4 - plan.measure_stretch(flow)),
            1e-2);
        const SplittingVerdict sv = verify_splitting(flow, b, b0, plan, 2e4, seed);
        add("perturb.splitting_identity", sv.difference_residual, 1e-2);
        add("perturb.trace_identity", sv.trace_residual, 1e-7);
    }

    {
        const SuspensionFlow flow = golden_flow();
        const GeneratorField a = GeneratorField::traceless(FieldExpr{{2.0, 0.3, 0.0, 0.0}, 3.0});
        const double r = budget_r(flow, a, 1.0, 0.1);
        const PerturbationPlan plan = PerturbationPlan::make(flow, r, 1.0, 0.1);
        const GeneratorField a0 = build_A0(flow, a, plan);
        const GeneratorField b0 = build_B0(flow, a0, plan);
        const GeneratorField b = build_B(b0, plan);
        const double s1 = sigma_from_hat(box_distance_to(flow, a, rotation_generator(two_pi),
                                                         {plan.rotate_box, plan.stretch_box}, 1.0));
        const double s2 = sigma_from_hat(four_pi_sq * plan.measure_rotate(flow));
        const double s3 = sigma_from_hat((four_pi_sq + 1.0) * plan.measure_stretch(flow));
        const double total = sigma_from_hat(direct_distance_bound(flow, a, plan));
        add("perturb.budget_chain", std::max({s1, s2, s3}) / (0.1 / 3.0) + (total >= 0.1), 1.0 - 1e-12);
        const int closure = (a0.classify() != GeneratorClass::traceless_kinetic) +
                            (b0.classify() != GeneratorClass::traceless_kinetic) +
                            (b.classify() != GeneratorClass::traceless_kinetic);
        add("perturb.kinetic_closure", closure, 0.0);
    }

    {
        int bad = 0;
        ExperimentConfig c;
        for (auto preset : {GeneratorPreset::damped, GeneratorPreset::traceless, GeneratorPreset::schrodinger}) {
            c.generator = preset;
            c.alpha = preset == GeneratorPreset::damped ? std::array<double, 4>{0.1, 0.2, 0.0, 0.0}
                                                        : std::array<double, 4>{};
            c.beta = {1.0 / 3.0, 0.1, 0.2, 0.0};
            c.q = {0.3, 0.7, 0.0, 0.0};
            c.energy = 2.0 / 7.0;
            bad += !(parse_config(serialize_config(c)) == c);
        }
        add("cli.config_round_trip", bad, 0.0);
    }
    return out;
}

} // namespace kinetic::app

#endif // KINETIC_APP_VERIFY_HPP
