// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "kinetic/app/commands.hpp"
#include "kinetic/kinetic.hpp"

using namespace kinetic;

namespace {

constexpr double pi = std::numbers::pi;
constexpr double inf = std::numeric_limits<double>::infinity();

SuspensionFlow golden3() { return {BaseSystem::circle_rotation(), RoofFunction::constant(3.0)}; }
SuspensionFlow cat_cosine() { return {BaseSystem::torus_cat_map(), RoofFunction::cosine(3.0, 0.5)}; }

GeneratorField generic()
{
    return GeneratorField::kinetic(FieldExpr{{0.2, 0.1, 0.05, 0.05}, 3.0}, FieldExpr{{1.5, 0.4, 0.2, 0.1}, 3.0});
}

GeneratorField traceless_field() { return GeneratorField::traceless(FieldExpr{{2.0, 0.3, 0.0, 0.0}, 3.0}); }

double entry_error(const Mat2& a, const Mat2& b)
{
    return std::max({std::abs(a.a11 - b.a11), std::abs(a.a12 - b.a12), std::abs(a.a21 - b.a21), std::abs(a.a22 - b.a22)});
}

struct Outcome
{
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

Outcome closed_form()
{
    const auto t0 = std::chrono::steady_clock::now();
    const SuspensionFlow flow{BaseSystem::circle_rotation(), RoofFunction::constant(8.0)};
    const SuspensionPoint p{{0.3, 0.0}, 0.0};
    double worst = 0.0;
    for (double th : {0.5, 1.0, 2.0, pi}) {
        const GeneratorField g(rotation_generator(th));
        for (int k = 0; k <= 20; ++k)
            worst = std::max(worst, entry_error(propagate(flow, g, p, 0.25 * k).matrix, rotation_flow(th, 0.25 * k)));
    }
    const GeneratorField s(stretch_generator());
    const GeneratorField r2pi =
        GeneratorField(Mat2::zero()).with_override({whole_base(flow.base()), 0.0, 6.0}, rotation_generator(2.0 * pi));
    for (int k = 0; k <= 20; ++k) {
        worst = std::max(worst, entry_error(propagate(flow, s, p, 0.25 * k).matrix, stretch_flow(0.25 * k)));
        worst = std::max(worst, entry_error(propagate(flow, r2pi, p, 0.25 * k).matrix, rotation_flow(2.0 * pi, 0.25 * k)));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst <= 1e-9 && secs < 1.0, "max entry error " + fmt("%.3g", worst) + ", " + fmt("%.3g", secs) + " s"};
}

Outcome cocycle_law()
{
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (const auto& flow : {golden3(), cat_cosine()}) {
        Rng rng(101);
        for (int i = 0; i < 1000; ++i) {
            const SuspensionPoint p = sample_mu_point(flow, rng);
            const double s = 5.0 * rng.uniform(), t = 5.0 * rng.uniform();
            worst = std::max(worst, check_cocycle_property(flow, generic(), p, s, t));
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst <= 1e-6 && secs < 60.0, "max residual " + fmt("%.3g", worst) + ", " + fmt("%.3g", secs) + " s"};
}

Outcome liouville()
{
    double worst = 0.0;
    for (const auto& flow : {golden3(), cat_cosine()}) {
        Rng rng(102);
        for (int i = 0; i < 1000; ++i) {
            const SuspensionPoint p = sample_mu_point(flow, rng);
            const double t = 20.0 * rng.uniform();
            worst = std::max(worst, std::abs(propagate(flow, generic(), p, t).matrix_log_det() -
                                             liouville_logdet(flow, generic(), p, t)));
        }
    }
    const SuspensionFlow flow = golden3();
    const auto plan = PerturbationPlan::make(flow, 0.2, 1.0, inf);
    const GeneratorField a = GeneratorField::kinetic(FieldExpr::constant(0.3), FieldExpr{{1.0, 0.2, 0.0, 0.0}, 3.0});
    const GeneratorField a0 = build_A0(flow, a, plan);
    const GeneratorField b0 = build_B0(flow, a0, plan);
    const GeneratorField b = build_B(b0, plan);
    const DetChainResidual dc = det_chain_residual(flow, a0, b0, b, 100, 102);
    const double chain = std::max(dc.b_vs_b0, dc.b0_vs_a0);
    return {worst <= 1e-6 && chain <= 1e-7,
            "liouville " + fmt("%.3g", worst) + ", det chain " + fmt("%.3g", chain)};
}

struct SpectrumCase
{
    const char* name;
    SuspensionFlow flow;
    GeneratorField gen;
    double l1, l2;
};

std::vector<LyapunovReport> g_reports;

Outcome constant_spectra()
{
    const std::vector<SpectrumCase> cases{
        {"S", golden3(), GeneratorField::traceless(FieldExpr::constant(-1.0)), 1.0, -1.0},
        {"damped", golden3(), GeneratorField::kinetic(FieldExpr::constant(0.5), FieldExpr::constant(0.0)), 0.0, -0.5},
        {"R_theta", golden3(), GeneratorField(rotation_generator(1.3)), 0.0, 0.0},
    };
    bool ok = true;
    std::string detail;
    for (const auto& c : cases) {
        const LyapunovReport r = lyapunov_spectrum(c.flow, c.gen, {1e4, 4, 1e-3, 7, 0});
        g_reports.push_back(r);
        const double err = std::max(std::abs(r.lambda1 - c.l1), std::abs(r.lambda2 - c.l2));
        ok = ok && err <= 1e-3;
        detail += std::string(c.name) + " " + fmt("%.2g", err) + "; ";
    }
    return {ok, "max |error|: " + detail};
}

Outcome sum_rule()
{
    g_reports.push_back(lyapunov_spectrum(golden3(), GeneratorField::schrodinger(FieldExpr::constant(0.0), 1.0),
                                          {1e4, 4, 1e-3, 7, 0}));
    g_reports.push_back(lyapunov_spectrum(golden3(), generic(), {1e4, 4, 1e-3, 7, 0}));
    g_reports.push_back(lyapunov_spectrum(cat_cosine(), generic(), {1e4, 4, 1e-3, 7, 0}));
    bool ok = true;
    double worst = 0.0;
    for (const auto& r : g_reports) {
        ok = ok && r.frame_sum_residual <= 1e-6 + 2.0 * r.sum_std_error;
        worst = std::max(worst, r.frame_sum_residual);
    }
    return {ok, std::to_string(g_reports.size()) + " presets, max residual " + fmt("%.3g", worst)};
}

Outcome splitting()
{
    PipelineOptions opt;
    opt.eps = inf;
    opt.r = 0.2;
    opt.horizon = 1e5;
    const PipelineReport rep = run_pipeline(golden3(), GeneratorField(rotation_generator(2.0 * pi)), opt).report;
    const double l1 = rep.output_spectrum.lambda1, l2 = rep.output_spectrum.lambda2;
    const bool ok = std::abs(rep.mu_stretch - 0.0667) < 1e-4 && std::abs(l1 - 0.0667) <= 0.01 &&
                    std::abs(l2 + 0.0667) <= 0.01 && rep.simple;
    return {ok, "lambda1 " + fmt("%.5f", l1) + ", lambda2 " + fmt("%.5f", l2) + ", simple " + (rep.simple ? "true" : "false")};
}

PipelineReport g_traceless;

Outcome budget()
{
    PipelineOptions opt;
    opt.eps = 0.1;
    opt.p = 1.0;
    opt.horizon = 1e5;
    g_traceless = run_pipeline(golden3(), traceless_field(), opt).report;
    const auto& r = g_traceless;
    const double third = 0.1 / 3.0;
    bool ok = !r.unchanged && r.a_a0.sigma < third && r.a0_b0.sigma < third && r.b0_b.sigma < third && r.total.sigma < 0.1;
    double delta_err = 0.0;
    for (double c : {4.0 * pi * pi, 4.0 * pi * pi + 1.0, 2.0, 0.7})
        for (double p : {1.0, 2.0, 3.5})
            delta_err = std::max(delta_err, std::abs(support_budget(p, 0.1, c) - std::pow(0.1 / c, p)));
    ok = ok && delta_err <= 1e-12;
    return {ok, "stages " + fmt("%.4g", r.a_a0.sigma) + " " + fmt("%.4g", r.a0_b0.sigma) + " " + fmt("%.4g", r.b0_b.sigma) +
                    ", total " + fmt("%.4g", r.total.sigma) + ", delta error " + fmt("%.2g", delta_err)};
}

Outcome increment()
{
    const SuspensionFlow flow = golden3();
    const auto plan = PerturbationPlan::make(flow, 0.2, 1.0, inf);
    const GeneratorField a0 = build_A0(flow, GeneratorField(rotation_generator(2.0 * pi)), plan);
    const GeneratorField b = build_B(build_B0(flow, a0, plan), plan);
    const double T = 1e5;
    const auto tr = scalar_cocycle_track(flow, b, plan, {{0.07, 0.0}, 1.0}, T);
    double worst = 0.0;
    for (double x : tr.increments)
        worst = std::max(worst, std::abs(x - 1.0));
    const double rate = static_cast<double>(tr.ledger.visits()) / T;
    const double mu = plan.measure_stretch(flow);
    return {!tr.increments.empty() && worst <= 1e-6 && std::abs(rate - mu) <= 1e-2,
            "max |increment - 1| " + fmt("%.3g", worst) + ", J_T/T " + fmt("%.5f", rate) + " vs " + fmt("%.5f", mu)};
}

Outcome monotone()
{
    const SuspensionFlow flow = golden3();
    Rng rng(109);
    int bad = 0;
    for (int i = 0; i < 100; ++i) {
        auto draw = [&] {
            return GeneratorField::kinetic(FieldExpr{{rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0, rng.uniform(-1, 1)}, 3.0},
                                           FieldExpr{{rng.uniform(-2, 2), 0.0, rng.uniform(-1, 1), 0.0}, 3.0});
        };
        const GeneratorField a = draw(), b = draw();
        const double p = rng.uniform(1.0, 3.0), q = p + rng.uniform(0.0, 3.0);
        const auto seed = static_cast<std::uint64_t>(i);
        const auto dp = sigma_p(flow, a, b, {p, 5000, seed}), dq = sigma_p(flow, a, b, {q, 5000, seed});
        bad += !(dp.value <= dq.value + 2.0 * (dp.std_error + dq.std_error));
    }
    return {bad == 0, std::to_string(100 - bad) + "/100 pairs monotone"};
}

Outcome corollaries()
{
    const auto& r = g_traceless;
    const double l1 = r.output_spectrum.lambda1, l2 = r.output_spectrum.lambda2;
    const double sum = l1 + l2;
    app::ExperimentConfig c;
    c.generator = app::GeneratorPreset::schrodinger;
    c.q = {0.0, 0.3, 0.0, 0.0};
    c.energy = 2.0;
    c.eps = 0.1;
    c.p = 1.0;
    c.horizon = 1e5;
    app::CommandOptions quiet;
    quiet.write_files = false;
    const app::CommandResult s = app::cmd_perturb(c, quiet);
    const double dq = s.report.contains("schrodinger") ? s.report["schrodinger"]["potential_distance_Lp"].get<double>() : inf;
    const bool ok = l1 > 0.0 && l2 < 0.0 && std::abs(sum) <= 1e-7 && dq < 0.1;
    return {ok, "lambda1 " + fmt("%.3g", l1) + ", lambda2 " + fmt("%.3g", l2) + ", sum " + fmt("%.2g", sum) +
                    ", |Q~ - Q|_L1 " + fmt("%.4g", dq)};
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"closed-form oracle agreement", closed_form},
        {"cocycle law", cocycle_law},
        {"liouville and determinant chain", liouville},
        {"constant-coefficient spectra", constant_spectra},
        {"sum rule", sum_rule},
        {"splitting at desk scale", splitting},
        {"eps budget", budget},
        {"stretch increment and visit rate", increment},
        {"monotonicity in p", monotone},
        {"traceless and schrodinger corollaries", corollaries},
    };
    int failures = 0;
    int index = 0;
    for (const auto& [name, run] : criteria) {
        ++index;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s  %2d %-40s %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
