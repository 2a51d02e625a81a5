#ifndef KINETIC_LPMETRIC_HPP
#define KINETIC_LPMETRIC_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "kinetic/baseflow.hpp"
#include "kinetic/error.hpp"
#include "kinetic/generator.hpp"
#include "kinetic/mat2.hpp"
#include "kinetic/quadrature.hpp"

namespace kinetic {

struct LpConfig
{
    double p = 1.0;
    std::size_t mc_samples = 100000;
    std::uint64_t seed = 1;

    void validate() const
    {
        if (!(p >= 1.0) || !std::isfinite(p))
            throw DomainError("LpConfig: p must be >= 1");
        if (mc_samples < 1000)
            throw DomainError("LpConfig: need at least 1000 Monte-Carlo samples");
    }
};

/// Distance value with its Monte-Carlo standard error (zero when exact).
struct DistanceEstimate
{
    double value = 0.0;
    double std_error = 0.0;
    bool exact = false;
};

/// x / (1 + x), and 1 for x = infinity.
inline double sigma_from_hat(double hat)
{
    if (std::isinf(hat))
        return 1.0;
    return hat / (1.0 + hat);
}

/// (1/mass) int_B int_a^b f(w, s) ds dw: the mu-integral of f over a flowbox.
template <class F>
double flowbox_integral(const SuspensionFlow& flow, const FlowboxSpec& box, F&& f, std::size_t panels = 16)
{
    const auto& region = box.region;
    const std::size_t height_panels = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(box.b - box.a)) * 4);
    auto over_heights = [&](const BasePoint& w) {
        return gauss_legendre([&](double s) { return f(SuspensionPoint{w, s}); }, box.a, box.b, height_panels);
    };
    double total = 0.0;
    if (region.dimension == 1) {
        total = gauss_legendre([&](double x) { return over_heights(BasePoint{x, 0.0}); }, region.lo[0], region.hi[0],
                               panels);
    } else {
        total = gauss_legendre(
            [&](double x) {
                return gauss_legendre([&](double y) { return over_heights(BasePoint{x, y}); }, region.lo[1],
                                      region.hi[1], std::max<std::size_t>(1, panels / 4));
            },
            region.lo[0], region.hi[0], panels);
    }
    return total / flow.mass();
}

namespace detail {

/// Value of `gen` on the whole of `box` when it is a single constant matrix.
inline std::optional<Mat2> constant_on(const GeneratorField& gen, const FlowboxSpec& box)
{
    for (const auto& o : gen.overrides()) {
        if (o.box == box) {
            if (const auto* m = std::get_if<Mat2>(&o.value))
                return *m;
            return std::nullopt;
        }
        if (o.box.overlaps(box))
            return std::nullopt;
    }
    return gen.constant_base();
}

/// Constant matrix A - B off every override box, if the base difference is constant.
inline std::optional<Mat2> constant_base_difference(const GeneratorField& a, const GeneratorField& b)
{
    const auto* ka = std::get_if<KineticBase>(&a.base());
    const auto* kb = std::get_if<KineticBase>(&b.base());
    if (ka && kb) {
        auto same_shape = [](const FieldExpr& x, const FieldExpr& y) {
            return x.c[1] == y.c[1] && x.c[2] == y.c[2] && x.c[3] == y.c[3] &&
                   (x.c[3] == 0.0 || x.height_period == y.height_period);
        };
        if (!same_shape(ka->alpha, kb->alpha) || !same_shape(ka->beta, kb->beta))
            return std::nullopt;
        return Mat2{0.0, 0.0, -(ka->beta.c[0] - kb->beta.c[0]), -(ka->alpha.c[0] - kb->alpha.c[0])};
    }
    const auto ca = a.constant_base();
    const auto cb = b.constant_base();
    if (ca && cb)
        return *ca - *cb;
    return std::nullopt;
}

/// int ||A - B||^p dmu in closed form when A - B is piecewise constant on boxes.
inline std::optional<double> closed_form_power_integral(const SuspensionFlow& flow, const GeneratorField& a,
                                                        const GeneratorField& b, double p)
{
    const auto off_box = constant_base_difference(a, b);
    if (!off_box)
        return std::nullopt;
    std::vector<FlowboxSpec> boxes;
    auto add = [&](const FlowboxSpec& box) {
        for (const auto& existing : boxes) {
            if (existing == box)
                return true;
            if (existing.overlaps(box))
                return false;
        }
        boxes.push_back(box);
        return true;
    };
    for (const auto& o : a.overrides())
        if (!add(o.box))
            return std::nullopt;
    for (const auto& o : b.overrides())
        if (!add(o.box))
            return std::nullopt;

    double covered = 0.0;
    double total = 0.0;
    for (const auto& box : boxes) {
        const auto va = constant_on(a, box);
        const auto vb = constant_on(b, box);
        if (!va || !vb)
            return std::nullopt;
        const double m = measure_of_flowbox(flow, box);
        covered += m;
        total += std::pow(norm(*va - *vb), p) * m;
    }
    total += std::pow(norm(*off_box), p) * std::max(0.0, 1.0 - covered);
    return total;
}

} // namespace detail

/**
 * sigma_hat_p(A, B) = (int ||A - B||^p dmu)^(1/p). Exact when A - B is constant on
 * finitely many flowboxes and constant elsewhere; otherwise a Monte-Carlo estimate
 * over sample_mu with a delta-method standard error. Non-finite samples give +inf.
 */
inline DistanceEstimate sigma_hat_p(const SuspensionFlow& flow, const GeneratorField& a, const GeneratorField& b,
                                    const LpConfig& cfg)
{
    cfg.validate();
    if (auto exact = detail::closed_form_power_integral(flow, a, b, cfg.p)) {
        if (!std::isfinite(*exact))
            return {std::numeric_limits<double>::infinity(), 0.0, true};
        return {std::pow(*exact, 1.0 / cfg.p), 0.0, true};
    }
    const auto points = sample_mu(flow, cfg.mc_samples, cfg.seed);
    CompensatedSum sum;
    std::vector<double> values;
    values.reserve(points.size());
    for (const auto& pt : points) {
        const double x = std::pow(norm(a.evaluate(pt) - b.evaluate(pt)), cfg.p);
        if (!std::isfinite(x))
            return {std::numeric_limits<double>::infinity(), 0.0, false};
        values.push_back(x);
        sum += x;
    }
    const double n = static_cast<double>(values.size());
    const double mean = sum.value() / n;
    double ss = 0.0;
    for (double x : values)
        ss += (x - mean) * (x - mean);
    const double se_mean = std::sqrt(ss / (n - 1.0) / n);
    const double value = std::pow(mean, 1.0 / cfg.p);
    // d/dm m^(1/p) = (1/p) m^(1/p - 1)
    const double se = mean > 0.0 ? value / (cfg.p * mean) * se_mean : 0.0;
    return {value, se, false};
}

/// sigma_p(A, B) = sigma_hat / (1 + sigma_hat), in [0, 1].
inline DistanceEstimate sigma_p(const SuspensionFlow& flow, const GeneratorField& a, const GeneratorField& b,
                                const LpConfig& cfg)
{
    const DistanceEstimate hat = sigma_hat_p(flow, a, b, cfg);
    if (std::isinf(hat.value))
        return {1.0, 0.0, hat.exact};
    const double d = 1.0 / ((1.0 + hat.value) * (1.0 + hat.value));
    return {sigma_from_hat(hat.value), hat.std_error * d, hat.exact};
}

/**
 * Largest support measure delta such that a perturbation differing by at most
 * c_bound on a set of measure < delta has sigma_hat_p < eps: delta = (eps / c)^p.
 */
inline double support_budget(double p, double eps, double c_bound)
{
    if (!(p >= 1.0))
        throw DomainError("support_budget: p must be >= 1");
    if (!(eps > 0.0))
        throw DomainError("support_budget: eps must be positive");
    if (!(c_bound > 0.0))
        throw DomainError("support_budget: c_bound must be positive");
    return std::pow(eps / c_bound, p);
}

} // namespace kinetic

#endif // KINETIC_LPMETRIC_HPP
